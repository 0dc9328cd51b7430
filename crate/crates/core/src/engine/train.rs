use std::path::Path;

use diffcore::{Adam, ParamStore, Tape};
use serde::{Deserialize, Serialize};

use super::episode::{assemble_episode, Pool};
use super::eval::evaluate;
use super::play::forward_batch;
use crate::agents::{AgentConfig, Agents};
use crate::channel::{builtin_channels, ChannelSpec};
use crate::rng::stream;
use crate::worldgen::{Dataset, Split};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    #[serde(flatten)]
    pub agent: AgentConfig,
    pub distractors: usize,
    pub learning_rate: f64,
    pub temperature: f64,
    pub batch_size: usize,
    pub max_episodes: usize,
    pub seed: u64,
    /// Training episodes between validation passes.
    pub eval_every: usize,
    /// Episodes per validation pass.
    pub eval_episodes: usize,
    /// Validation passes without improvement before stopping.
    pub patience: usize,
    /// Training channel name.
    pub channel: String,
    /// Stop as soon as validation accuracy reaches this value.
    pub target_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            agent: AgentConfig::default(),
            distractors: 9,
            learning_rate: 0.001,
            temperature: 1.0,
            batch_size: 32,
            max_episodes: 200_000,
            seed: 0,
            eval_every: 3_200,
            eval_episodes: 1_000,
            patience: 20,
            channel: "gumbel-st".into(),
            target_accuracy: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.agent.validate()?;
        let positive = [
            ("distractors", self.distractors),
            ("batch_size", self.batch_size),
            ("max_episodes", self.max_episodes),
            ("eval_every", self.eval_every),
            ("eval_episodes", self.eval_episodes),
            ("patience", self.patience),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be finite and non-negative"));
        }
        builtin_channels().get(&self.channel)?(&ChannelSpec {
            temperature: self.temperature,
        })?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub episode: usize,
    pub loss: f64,
    pub valid_acc: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub agents: Agents,
    /// Parameters at the best validation accuracy.
    pub params: ParamStore,
    pub log: Vec<LogRow>,
    pub best_valid_acc: f64,
    pub episodes: usize,
}

/// Trains a speaker/listener pair on the train split, validating on the
/// valid split.
pub fn train(config: &TrainConfig, dataset: &Dataset) -> Result<TrainOutcome> {
    config.validate()?;
    let repr = config.agent.repr;
    let train_pool = Pool::new(dataset, Split::Train, repr)?;
    let valid_pool = Pool::new(dataset, Split::Valid, repr)?;
    let (agents, mut params) = Agents::build(&config.agent, dataset.spec.input_dims(), config.seed)?;
    let channel = builtin_channels().get(&config.channel)?(&ChannelSpec {
        temperature: config.temperature,
    })?;
    let mut adam = Adam::new(config.learning_rate);
    let mut episode_rng = stream(config.seed, "episodes", 0);

    let mut best_params = params.clone();
    let mut best = f64::NEG_INFINITY;
    let mut stale = 0;
    let mut log = Vec::new();
    let mut done = 0;
    let mut step = 0u64;
    let mut next_eval = config.eval_every;
    let (mut loss_sum, mut loss_n) = (0.0, 0usize);

    while done < config.max_episodes {
        let b = config.batch_size.min(config.max_episodes - done);
        let episodes = (0..b)
            .map(|_| assemble_episode(train_pool.len(), config.distractors, &mut episode_rng))
            .collect::<Result<Vec<_>>>()?;
        let mut channel_rng = stream(config.seed, "channel", step);
        let grads = {
            let mut tape = Tape::with_params(&params);
            let out = forward_batch(&mut tape, &agents, &train_pool, &episodes, channel.as_ref(), &mut channel_rng)?;
            let loss = tape.value(out.loss).data()[0];
            if !loss.is_finite() {
                return Err(Error::Divergence { episode: done, loss });
            }
            loss_sum += loss * b as f64;
            loss_n += b;
            tape.backward(out.loss)?.dense(&params)
        };
        adam.step(&mut params, &grads);
        done += b;
        step += 1;

        if done >= next_eval || done == config.max_episodes {
            next_eval = done + config.eval_every;
            let mut rng = stream(config.seed, "validation", 0);
            let acc = evaluate(&agents, &params, &valid_pool, config.distractors, config.eval_episodes, &mut rng)?.accuracy;
            log::debug!("episode {done}: loss {:.4}, valid {acc:.4}", loss_sum / loss_n as f64);
            log.push(LogRow {
                episode: done,
                loss: loss_sum / loss_n as f64,
                valid_acc: acc,
            });
            (loss_sum, loss_n) = (0.0, 0);
            if acc > best {
                best = acc;
                best_params.copy_from(&params)?;
                stale = 0;
            } else {
                stale += 1;
            }
            if stale >= config.patience || config.target_accuracy.is_some_and(|t| acc >= t) {
                break;
            }
        }
    }
    Ok(TrainOutcome {
        agents,
        params: best_params,
        log,
        best_valid_acc: best,
        episodes: done,
    })
}

/// Writes the log as CSV with header `episode,loss,valid_acc`.
pub fn write_log(path: impl AsRef<Path>, rows: &[LogRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<LogRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}
