//! Flat TOML experiment files, merged under command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use graphref::engine::TrainConfig;
use serde::Deserialize;

/// A scalar or a list of values to sweep over.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(v) => v,
        }
    }
}

/// Every key an experiment file may set. Unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub game: Option<String>,
    pub dims: Option<Vec<usize>>,
    pub num_nodes: Option<usize>,
    pub sizes: Option<Vec<usize>>,
    pub ood_fraction: Option<f64>,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,

    pub repr: Option<OneOrMany<String>>,
    pub distractors: Option<OneOrMany<usize>>,
    pub vocab: Option<OneOrMany<usize>>,
    pub msg_len: Option<OneOrMany<usize>>,
    pub seed: Option<OneOrMany<u64>>,
    pub graph_layer: Option<String>,
    pub sage_aggregator: Option<String>,
    pub pooling: Option<String>,
    pub layers: Option<usize>,
    pub hidden: Option<usize>,
    pub embedding: Option<usize>,
    pub learning_rate: Option<f64>,
    pub temperature: Option<f64>,
    pub batch_size: Option<usize>,
    pub max_episodes: Option<usize>,
    pub eval_every: Option<usize>,
    pub eval_episodes: Option<usize>,
    pub patience: Option<usize>,
    pub channel: Option<String>,
    pub target_accuracy: Option<f64>,
    pub off_grid: Option<bool>,
    pub jobs: Option<usize>,

    pub episodes: Option<usize>,
    pub pairs: Option<String>,
    pub position: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Supported hyperparameter grid. Values outside it are rejected unless the
/// caller opts out.
pub mod grid {
    pub const DISTRACTORS: &[usize] = &[1, 2, 4, 9, 19, 29, 49];
    pub const VOCAB: &[usize] = &[10, 25, 50, 100];
    pub const MSG_LEN: &[usize] = &[3, 4, 5, 10, 25];
    pub const LAYERS: &[usize] = &[1, 2, 3];
    pub const HIDDEN: &[usize] = &[100, 200];
    pub const EMBEDDING: &[usize] = &[50, 100];
    pub const LEARNING_RATE: &[f64] = &[0.01, 0.001];
    pub const TEMPERATURE: &[f64] = &[1.0];
}

/// Lists every field of `c` that lies outside the grid.
pub fn grid_violations(c: &TrainConfig) -> Vec<String> {
    let mut out = Vec::new();
    let mut check_int = |name: &str, v: usize, allowed: &[usize]| {
        if !allowed.contains(&v) {
            out.push(format!("{name}={v} not in {allowed:?}"));
        }
    };
    check_int("distractors", c.distractors, grid::DISTRACTORS);
    check_int("vocab", c.agent.vocab_size, grid::VOCAB);
    check_int("msg_len", c.agent.message_len, grid::MSG_LEN);
    check_int("layers", c.agent.num_layers, grid::LAYERS);
    check_int("hidden", c.agent.hidden_size, grid::HIDDEN);
    check_int("embedding", c.agent.embedding_size, grid::EMBEDDING);
    let mut check_real = |name: &str, v: f64, allowed: &[f64]| {
        if !allowed.iter().any(|a| (a - v).abs() < 1e-12) {
            out.push(format!("{name}={v} not in {allowed:?}"));
        }
    };
    check_real("learning_rate", c.learning_rate, grid::LEARNING_RATE);
    check_real("temperature", c.temperature, grid::TEMPERATURE);
    out
}

pub fn check_grid(configs: &[TrainConfig], off_grid: bool) -> Result<()> {
    if off_grid {
        return Ok(());
    }
    let mut problems: Vec<String> = configs.iter().flat_map(grid_violations).collect();
    problems.sort();
    problems.dedup();
    if !problems.is_empty() {
        bail!(
            "configuration outside the hyperparameter grid (pass --off-grid to allow): {}",
            problems.join("; ")
        );
    }
    Ok(())
}

/// Flag value, else file value, else default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}
