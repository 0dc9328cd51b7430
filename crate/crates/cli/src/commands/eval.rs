use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use graphref::engine::{evaluate, speak, EvalReport, Pool};
use graphref::metrics::{robustness_sweep, topographic_similarity, PairBudget, TopoReport};
use graphref::rng::stream;
use graphref::worldgen::{Input, Split};
use log::info;
use serde::{Deserialize, Serialize};

use super::{usage, Common};
use crate::config::{pick, FileConfig};
use crate::run;

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Run directory produced by `train`.
    #[arg(long)]
    pub run: PathBuf,
    /// Dataset directory, overriding the one recorded in the run.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// `train`, `valid`, `test` or `ood`.
    #[arg(long, default_value = "test")]
    pub split: Split,
    /// Evaluate on the OOD pool only.
    #[arg(long)]
    pub ood: bool,
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Distractor count; defaults to the training value.
    #[arg(long)]
    pub distractors: Option<usize>,
    /// Seed for episode sampling.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also measure topographic similarity over the split's objects.
    #[arg(long)]
    pub toposim: bool,
    /// `full` or a number of sampled objects.
    #[arg(long)]
    pub pairs: Option<String>,
    /// Also run the symbol-replacement sweep.
    #[arg(long)]
    pub robustness: bool,
    /// Message position replaced during the robustness sweep.
    #[arg(long)]
    pub position: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopoFile {
    pub split: Split,
    #[serde(flatten)]
    pub report: TopoReport,
}

pub fn eval_file(split: Split) -> String {
    format!("eval-{}.json", split.as_str())
}

pub const TOPOSIM_FILE: &str = "toposim.json";

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

pub fn run(args: EvalArgs) -> Result<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let split = if args.ood { Split::Ood } else { args.split };
    let budget: PairBudget = pick(args.pairs.clone(), file.pairs.clone(), "500".into())
        .parse()
        .map_err(|e: graphref::Error| usage(e.to_string()))?;
    let episodes = pick(args.episodes, file.episodes, 5000);
    let position = pick(args.position, file.position, 0);
    let seed = args.seed.unwrap_or(0);

    let loaded = run::load(&args.run, args.data.as_deref())?;
    let distractors = args.distractors.unwrap_or(loaded.sidecar.train.distractors);
    let pool = Pool::new(&loaded.dataset, split, loaded.agents.config.repr)?;
    if pool.is_empty() {
        return Err(usage(format!("the dataset has no {} items", split.as_str())));
    }

    let mut rng = stream(seed, "eval", 0);
    let report: EvalReport = evaluate(&loaded.agents, &loaded.params, &pool, distractors, episodes, &mut rng)?;
    info!("{} accuracy {:.4} over {} episodes", split.as_str(), report.accuracy, report.episodes);
    write_json(&args.run.join(eval_file(split)), &report)?;
    println!("accuracy\t{}\t{:.6}", split.as_str(), report.accuracy);

    if args.toposim {
        let inputs: Vec<&Input> = pool.inputs.iter().collect();
        let messages = speak(&loaded.agents, &loaded.params, &inputs)?;
        let flat: Vec<Vec<f64>> = pool.inputs.iter().map(Input::flatten).collect();
        let mut rng = stream(seed, "toposim", 0);
        let topo = topographic_similarity(&flat, &messages, budget, &mut rng)?;
        println!("toposim\t{}\t{:.6}", split.as_str(), topo.toposim);
        write_json(&args.run.join(TOPOSIM_FILE), &TopoFile { split, report: topo })?;
    }

    if args.robustness {
        let rob = robustness_sweep(&loaded.agents, &loaded.params, &pool, &report.records, position)?;
        println!("robustness\tposition {position}\t{:.6}", rob.fraction_original_best());
        write_json(&args.run.join("robustness.json"), &rob)?;
        rob.write_csv(args.run.join("robustness.csv"))?;
    }
    Ok(())
}
