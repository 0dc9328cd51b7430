use diffcore::{ParamStore, Tape};
use serde::{Deserialize, Serialize};

use super::episode::{assemble_episode, Episode, Pool};
use super::play::{forward_batch, EVAL_CHUNK};
use crate::agents::Agents;
use crate::channel::{argmax, ArgmaxChannel};
use crate::rng::Rng;
use crate::worldgen::Split;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub episode: Episode,
    pub target_id: usize,
    pub candidate_ids: Vec<usize>,
    pub chosen: usize,
    pub message: Vec<usize>,
}

impl EvalRecord {
    pub fn correct(&self) -> bool {
        self.chosen == self.episode.target_index
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: Split,
    pub distractors: usize,
    pub episodes: usize,
    pub accuracy: f64,
    #[serde(skip)]
    pub records: Vec<EvalRecord>,
}

/// Argmax-channel evaluation over `num_episodes` fresh episodes of `pool`.
pub fn evaluate(
    agents: &Agents,
    params: &ParamStore,
    pool: &Pool,
    distractors: usize,
    num_episodes: usize,
    rng: &mut Rng,
) -> Result<EvalReport> {
    let episodes = (0..num_episodes)
        .map(|_| assemble_episode(pool.len(), distractors, rng))
        .collect::<Result<Vec<_>>>()?;
    evaluate_episodes(agents, params, pool, &episodes)
}

/// Argmax-channel evaluation of given episodes.
pub fn evaluate_episodes(
    agents: &Agents,
    params: &ParamStore,
    pool: &Pool,
    episodes: &[Episode],
) -> Result<EvalReport> {
    let mut records = Vec::with_capacity(episodes.len());
    for chunk in episodes.chunks(EVAL_CHUNK) {
        let mut tape = Tape::with_params(params);
        let mut rng = crate::rng::stream(0, "argmax", 0);
        let out = forward_batch(&mut tape, agents, pool, chunk, &ArgmaxChannel, &mut rng)?;
        let probs = tape.value(out.probs);
        for ((b, ep), message) in chunk.iter().enumerate().zip(out.messages) {
            records.push(EvalRecord {
                target_id: pool.ids[ep.target()],
                candidate_ids: ep.candidates.iter().map(|&c| pool.ids[c]).collect(),
                chosen: argmax(probs.row_slice(b)),
                message,
                episode: ep.clone(),
            });
        }
    }
    let correct = records.iter().filter(|r| r.correct()).count();
    Ok(EvalReport {
        split: pool.split,
        distractors: episodes.first().map_or(0, Episode::num_distractors),
        episodes: records.len(),
        accuracy: if records.is_empty() {
            0.0
        } else {
            correct as f64 / records.len() as f64
        },
        records,
    })
}
