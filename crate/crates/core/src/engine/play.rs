use std::collections::HashMap;

use diffcore::{ParamStore, Tape, Var};

use super::episode::{Episode, Pool};
use crate::agents::Agents;
use crate::channel::{argmax, ArgmaxChannel, Channel};
use crate::rng::Rng;
use crate::worldgen::Input;
use crate::{Error, Result};

/// Tape handles for one batch of episodes.
#[derive(Debug, Clone)]
pub struct BatchForward {
    /// `B × (K+1)` candidate probabilities.
    pub probs: Var,
    /// Mean cross-entropy over the batch.
    pub loss: Var,
    pub messages: Vec<Vec<usize>>,
}

/// Mean of `−ln(p[b, target_b])` over rows of a `B × (K+1)` matrix.
pub fn episode_loss(tape: &mut Tape, probs: Var, targets: &[usize]) -> Result<Var> {
    let k1 = tape.shape(probs)[1];
    let mut total: Option<Var> = None;
    for (b, &t) in targets.iter().enumerate() {
        if t >= k1 {
            return Err(Error::OutOfRange {
                op: "target index",
                value: t,
                limit: k1,
            });
        }
        let l = tape.cross_entropy(probs, b * k1 + t)?;
        total = Some(match total {
            Some(acc) => tape.add(acc, l)?,
            None => l,
        });
    }
    let total = total.ok_or_else(|| Error::data("empty episode batch"))?;
    Ok(tape.scale(total, 1.0 / targets.len() as f64))
}

fn check_pool(agents: &Agents, pool: &Pool) -> Result<()> {
    if pool.repr != agents.config.repr {
        return Err(Error::ReprMismatch {
            expected: agents.config.repr.to_string(),
            actual: pool.repr.to_string(),
        });
    }
    Ok(())
}

/// Encodes each distinct candidate of the batch once and maps every
/// episode's candidates to rows of that embedding.
fn embed_candidates(
    tape: &mut Tape,
    agents: &Agents,
    pool: &Pool,
    episodes: &[Episode],
) -> Result<(Var, Vec<Vec<usize>>)> {
    let mut row_of: HashMap<usize, usize> = HashMap::new();
    let mut unique: Vec<&Input> = Vec::new();
    let choices = episodes
        .iter()
        .map(|ep| {
            ep.candidates
                .iter()
                .map(|&c| {
                    *row_of.entry(c).or_insert_with(|| {
                        unique.push(&pool.inputs[c]);
                        unique.len() - 1
                    })
                })
                .collect()
        })
        .collect();
    Ok((agents.listener.embed(tape, &unique)?, choices))
}

/// Speaker, channel and listener over a batch of episodes.
pub fn forward_batch(
    tape: &mut Tape,
    agents: &Agents,
    pool: &Pool,
    episodes: &[Episode],
    channel: &dyn Channel,
    rng: &mut Rng,
) -> Result<BatchForward> {
    check_pool(agents, pool)?;
    let targets: Vec<&Input> = episodes.iter().map(|ep| &pool.inputs[ep.target()]).collect();
    let utt = agents.speaker.speak(tape, &targets, channel, rng)?;
    let u = agents.listener.read(tape, &utt.steps)?;
    let (embedded, choices) = embed_candidates(tape, agents, pool, episodes)?;
    let probs = agents.listener.score(tape, u, embedded, &choices)?;
    let target_index: Vec<usize> = episodes.iter().map(|ep| ep.target_index).collect();
    let loss = episode_loss(tape, probs, &target_index)?;
    Ok(BatchForward {
        probs,
        loss,
        messages: utt.symbols,
    })
}

/// Listener probabilities for fixed discrete messages.
pub fn listen(
    agents: &Agents,
    params: &ParamStore,
    pool: &Pool,
    episodes: &[Episode],
    messages: &[&[usize]],
) -> Result<Vec<Vec<f64>>> {
    check_pool(agents, pool)?;
    let mut tape = Tape::with_params(params);
    let u = agents.listener.read_symbols(&mut tape, messages)?;
    let (embedded, choices) = embed_candidates(&mut tape, agents, pool, episodes)?;
    let probs = agents.listener.score(&mut tape, u, embedded, &choices)?;
    let v = tape.value(probs);
    Ok((0..v.rows()).map(|r| v.row_slice(r).to_vec()).collect())
}

/// Greedy messages for arbitrary inputs.
pub fn speak(agents: &Agents, params: &ParamStore, inputs: &[&Input]) -> Result<Vec<Vec<usize>>> {
    let mut out = Vec::with_capacity(inputs.len());
    for chunk in inputs.chunks(EVAL_CHUNK) {
        let mut tape = Tape::with_params(params);
        let mut rng = crate::rng::stream(0, "argmax", 0);
        let utt = agents.speaker.speak(&mut tape, chunk, &ArgmaxChannel, &mut rng)?;
        out.extend(utt.symbols);
    }
    Ok(out)
}

pub(crate) const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct PlayOutcome {
    pub probs: Vec<f64>,
    pub chosen: usize,
    pub loss: f64,
    pub message: Vec<usize>,
}

/// Plays one episode; `channel` decides between training and evaluation
/// behaviour.
pub fn play_episode(
    agents: &Agents,
    params: &ParamStore,
    pool: &Pool,
    episode: &Episode,
    channel: &dyn Channel,
    rng: &mut Rng,
) -> Result<PlayOutcome> {
    let mut tape = Tape::with_params(params);
    let out = forward_batch(&mut tape, agents, pool, std::slice::from_ref(episode), channel, rng)?;
    let probs = tape.value(out.probs).data().to_vec();
    Ok(PlayOutcome {
        chosen: argmax(&probs),
        loss: tape.value(out.loss).data()[0],
        message: out.messages.into_iter().next().expect("one message"),
        probs,
    })
}
