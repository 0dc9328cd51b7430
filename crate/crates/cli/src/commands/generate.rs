use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use graphref::worldgen::{
    generate_dataset, GameSpec, GenerateOptions, PerceptualSpec, RelationalSpec, SplitSizes,
};
use log::info;

use super::{usage, Common};
use crate::config::{pick, FileConfig};

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: Common,
    /// `g1` (perceptual objects) or `g2` (random graphs).
    #[arg(long)]
    pub game: Option<String>,
    /// Game-1 property cardinalities, e.g. `10,6,8`.
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    /// Game-2 node count.
    #[arg(long)]
    pub num_nodes: Option<usize>,
    /// Line counts as `train,valid,test`.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Fraction of distinct samples held out as the OOD pool.
    #[arg(long)]
    pub ood_fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; defaults to `<out-root>/data/<name>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn options(args: &GenerateArgs, file: &FileConfig) -> Result<GenerateOptions> {
    let game = pick(args.game.clone(), file.game.clone(), "g1".into());
    let spec = match game.as_str() {
        "g1" => GameSpec::G1 {
            dims: PerceptualSpec::new(pick(args.dims.clone(), file.dims.clone(), vec![5, 5, 5]))?,
        },
        "g2" => GameSpec::G2(RelationalSpec::new(pick(args.num_nodes, file.num_nodes, 5))?),
        other => return Err(usage(format!("unknown game {other:?}; expected g1 or g2"))),
    };
    let sizes = match args.sizes.clone().or(file.sizes.clone()) {
        None => SplitSizes::default(),
        Some(v) if v.len() == 3 => SplitSizes {
            train: v[0],
            valid: v[1],
            test: v[2],
        },
        Some(v) => return Err(usage(format!("sizes needs three values, got {v:?}"))),
    };
    Ok(GenerateOptions {
        spec,
        sizes,
        ood_fraction: pick(args.ood_fraction, file.ood_fraction, 0.0),
        seed: pick(args.seed, file.seed.clone().and_then(|s| s.into_vec().first().copied()), 0),
    })
}

pub fn default_name(opts: &GenerateOptions) -> String {
    let shape = match &opts.spec {
        GameSpec::G1 { dims } => dims
            .dims()
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join("x"),
        GameSpec::G2(r) => format!("n{}", r.num_nodes),
    };
    format!("{}-{shape}-seed{}", opts.spec.name(), opts.seed)
}

pub fn run(args: GenerateArgs) -> Result<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let opts = options(&args, &file)?;
    let out = args
        .out
        .clone()
        .or(file.out.clone())
        .unwrap_or_else(|| args.common.out_root.join("data").join(default_name(&opts)));
    let dataset = generate_dataset(&opts)?;
    dataset
        .save(&out, &opts)
        .with_context(|| format!("writing dataset to {}", out.display()))?;
    info!("wrote {} lines to {}", dataset.items.len(), out.display());
    println!("{}", out.display());
    Ok(())
}
