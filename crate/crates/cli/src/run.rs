//! Run directories: checkpoint, training log, and a self-describing sidecar.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use diffcore::ParamStore;
use graphref::agents::Agents;
use graphref::engine::{write_log, TrainConfig, TrainOutcome};
use graphref::worldgen::{Dataset, DatasetManifest, DATASET_FILE};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const CHECKPOINT: &str = "checkpoint.bin";
pub const SIDECAR: &str = "config.json";
pub const LOG: &str = "log.csv";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub game: String,
    pub data: PathBuf,
    pub dataset: DatasetManifest,
    pub seed: u64,
    pub train: TrainConfig,
    /// SHA-256 over the training config and the dataset file.
    pub content_hash: String,
    pub episodes: usize,
    pub best_valid_acc: f64,
}

pub fn run_dir_name(game: &str, c: &TrainConfig) -> String {
    format!(
        "{game}-{}-K{}-V{}-L{}-seed{}",
        c.agent.repr, c.distractors, c.agent.vocab_size, c.agent.message_len, c.seed
    )
}

pub fn content_hash(config: &TrainConfig, data_dir: &Path) -> Result<String> {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(config)?);
    h.update(b"\n");
    let data = data_dir.join(DATASET_FILE);
    h.update(std::fs::read(&data).with_context(|| format!("reading {}", data.display()))?);
    Ok(hex::encode(h.finalize()))
}

/// Hash of the config with the seed cleared; runs that differ only by seed
/// share it.
pub fn fingerprint(config: &TrainConfig) -> Result<String> {
    let mut c = config.clone();
    c.seed = 0;
    let digest = Sha256::digest(serde_json::to_vec(&c)?);
    Ok(hex::encode(digest)[..12].to_string())
}

pub fn save(
    dir: &Path,
    sidecar: &Sidecar,
    outcome: &TrainOutcome,
) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    outcome.params.save(dir.join(CHECKPOINT))?;
    write_log(dir.join(LOG), &outcome.log)?;
    let text = serde_json::to_string_pretty(sidecar)? + "\n";
    std::fs::write(dir.join(SIDECAR), text)?;
    Ok(())
}

pub fn read_sidecar(dir: &Path) -> Result<Sidecar> {
    let path = dir.join(SIDECAR);
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?)
}

/// A trained run ready for evaluation.
pub struct LoadedRun {
    pub sidecar: Sidecar,
    pub dataset: Dataset,
    pub agents: Agents,
    pub params: ParamStore,
}

pub fn load(dir: &Path, data_override: Option<&Path>) -> Result<LoadedRun> {
    let sidecar = read_sidecar(dir)?;
    let data = data_override.unwrap_or(&sidecar.data);
    let (dataset, _) = Dataset::load(data).with_context(|| format!("loading dataset {}", data.display()))?;
    let ckpt = dir.join(CHECKPOINT);
    let loaded = ParamStore::load(&ckpt).with_context(|| format!("loading checkpoint {}", ckpt.display()))?;
    let (agents, params) = Agents::restore(&sidecar.train.agent, dataset.spec.input_dims(), &loaded)?;
    Ok(LoadedRun {
        sidecar,
        dataset,
        agents,
        params,
    })
}
