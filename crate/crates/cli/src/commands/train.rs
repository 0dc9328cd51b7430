use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{anyhow, Context, Result};
use clap::Args;
use graphref::agents::AgentConfig;
use graphref::engine::{train, TrainConfig};
use graphref::worldgen::{Dataset, DatasetManifest, ReprKind};
use log::{error, info};

use super::{usage, Common};
use crate::config::{check_grid, pick, FileConfig};
use crate::run::{self, Sidecar};

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset directory produced by `generate`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Expected game of the dataset; a mismatch is an error.
    #[arg(long)]
    pub game: Option<String>,
    /// Directory receiving one sub-directory per run; defaults to the output root.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Input representation(s): bow, seq, graph.
    #[arg(long, value_delimiter = ',')]
    pub repr: Option<Vec<ReprKind>>,
    #[arg(long, value_delimiter = ',')]
    pub distractors: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub vocab: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub msg_len: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub seed: Option<Vec<u64>>,

    /// `gcn` or `sage`.
    #[arg(long)]
    pub graph_layer: Option<String>,
    /// `mean`, `pool` or `gcn`.
    #[arg(long)]
    pub sage_aggregator: Option<String>,
    /// `sum`, `mean` or `max`.
    #[arg(long)]
    pub pooling: Option<String>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub embedding: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_episodes: Option<usize>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    #[arg(long)]
    pub eval_episodes: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// `gumbel-st`, `argmax` or `soft`.
    #[arg(long)]
    pub channel: Option<String>,
    /// Stop once validation accuracy reaches this value.
    #[arg(long)]
    pub target_accuracy: Option<f64>,
    /// Allow hyperparameters outside the supported grid.
    #[arg(long)]
    pub off_grid: bool,
    /// Runs trained concurrently.
    #[arg(long)]
    pub jobs: Option<usize>,
}

fn list<T: Clone>(flag: &Option<Vec<T>>, file: Option<Vec<T>>, default: T) -> Vec<T> {
    flag.clone().or(file).unwrap_or_else(|| vec![default])
}

/// Cross product of every sweep axis, with scalar settings applied.
pub fn expand(args: &TrainArgs, file: &FileConfig) -> Result<Vec<TrainConfig>> {
    let d = TrainConfig::default();
    let a = AgentConfig::default();
    let reprs = match (&args.repr, &file.repr) {
        (Some(r), _) => r.clone(),
        (None, Some(r)) => r
            .clone()
            .into_vec()
            .iter()
            .map(|s| s.parse::<ReprKind>().map_err(|e| usage(e.to_string())))
            .collect::<Result<_>>()?,
        (None, None) => vec![a.repr],
    };
    let distractors = list(&args.distractors, file.distractors.clone().map(|v| v.into_vec()), d.distractors);
    let vocabs = list(&args.vocab, file.vocab.clone().map(|v| v.into_vec()), a.vocab_size);
    let lens = list(&args.msg_len, file.msg_len.clone().map(|v| v.into_vec()), a.message_len);
    let seeds = list(&args.seed, file.seed.clone().map(|v| v.into_vec()), d.seed);

    let base = TrainConfig {
        agent: AgentConfig {
            repr: a.repr,
            graph_layer: pick(args.graph_layer.clone(), file.graph_layer.clone(), a.graph_layer.clone()),
            sage_aggregator: pick(
                args.sage_aggregator.clone(),
                file.sage_aggregator.clone(),
                a.sage_aggregator.clone(),
            ),
            pooling: pick(args.pooling.clone(), file.pooling.clone(), a.pooling.clone()),
            num_layers: pick(args.layers, file.layers, a.num_layers),
            hidden_size: pick(args.hidden, file.hidden, a.hidden_size),
            embedding_size: pick(args.embedding, file.embedding, a.embedding_size),
            vocab_size: a.vocab_size,
            message_len: a.message_len,
        },
        distractors: d.distractors,
        learning_rate: pick(args.learning_rate, file.learning_rate, d.learning_rate),
        temperature: pick(args.temperature, file.temperature, d.temperature),
        batch_size: pick(args.batch_size, file.batch_size, d.batch_size),
        max_episodes: pick(args.max_episodes, file.max_episodes, d.max_episodes),
        seed: d.seed,
        eval_every: pick(args.eval_every, file.eval_every, d.eval_every),
        eval_episodes: pick(args.eval_episodes, file.eval_episodes, d.eval_episodes),
        patience: pick(args.patience, file.patience, d.patience),
        channel: pick(args.channel.clone(), file.channel.clone(), d.channel.clone()),
        target_accuracy: args.target_accuracy.or(file.target_accuracy),
    };

    let mut out = Vec::new();
    for &repr in &reprs {
        for &k in &distractors {
            for &v in &vocabs {
                for &l in &lens {
                    for &seed in &seeds {
                        let mut c = base.clone();
                        c.agent.repr = repr;
                        c.distractors = k;
                        c.agent.vocab_size = v;
                        c.agent.message_len = l;
                        c.seed = seed;
                        out.push(c);
                    }
                }
            }
        }
    }
    Ok(out)
}

struct Job {
    dir: PathBuf,
    config: TrainConfig,
}

pub fn run(args: TrainArgs) -> Result<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let data = args
        .data
        .clone()
        .or(file.data.clone())
        .ok_or_else(|| usage("--data is required (or `data` in the config file)"))?;
    let configs = expand(&args, &file)?;
    for c in &configs {
        c.validate().map_err(|e| usage(e.to_string()))?;
    }
    check_grid(&configs, args.off_grid || file.off_grid.unwrap_or(false))
        .map_err(|e| usage(e.to_string()))?;
    let jobs = pick(args.jobs, file.jobs, 1);
    if jobs == 0 {
        return Err(usage("--jobs must be positive"));
    }

    let (dataset, manifest) =
        Dataset::load(&data).with_context(|| format!("loading dataset {}", data.display()))?;
    let game = dataset.spec.name();
    if let Some(expected) = args.game.clone().or(file.game.clone()) {
        if expected != game {
            return Err(usage(format!("--game {expected} but dataset {} holds {game}", data.display())));
        }
    }
    let root = args.out.clone().or(file.out.clone()).unwrap_or(args.common.out_root.clone());
    let mut queue = Vec::with_capacity(configs.len());
    for config in configs {
        let dir = root.join(run::run_dir_name(game, &config));
        if queue.iter().any(|j: &Job| j.dir == dir) {
            return Err(usage(format!("sweep produces {} twice", dir.display())));
        }
        queue.push(Job { dir, config });
    }

    let next = AtomicUsize::new(0);
    let failures = Mutex::new(Vec::new());
    std::thread::scope(|s| {
        for _ in 0..jobs.min(queue.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = queue.get(i) else { break };
                if let Err(e) = train_one(job, &data, &dataset, &manifest) {
                    error!("{}: {e:#}", job.dir.display());
                    failures.lock().unwrap().push(format!("{}: {e:#}", job.dir.display()));
                }
            });
        }
    });
    let failures = failures.into_inner().unwrap();
    if !failures.is_empty() {
        return Err(anyhow!("{} of {} runs failed:\n{}", failures.len(), queue.len(), failures.join("\n")));
    }
    Ok(())
}

fn train_one(job: &Job, data: &Path, dataset: &Dataset, manifest: &DatasetManifest) -> Result<()> {
    info!("training {}", job.dir.display());
    let outcome = train(&job.config, dataset)?;
    let sidecar = Sidecar {
        game: dataset.spec.name().into(),
        data: data.to_path_buf(),
        dataset: manifest.clone(),
        seed: job.config.seed,
        train: job.config.clone(),
        content_hash: run::content_hash(&job.config, data)?,
        episodes: outcome.episodes,
        best_valid_acc: outcome.best_valid_acc,
    };
    run::save(&job.dir, &sidecar, &outcome)?;
    info!(
        "{}: {} episodes, best validation accuracy {:.4}",
        job.dir.display(),
        outcome.episodes,
        outcome.best_valid_acc
    );
    println!("{}", job.dir.display());
    Ok(())
}
