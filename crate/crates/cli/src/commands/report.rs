use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use graphref::engine::EvalReport;
use graphref::metrics::mean_std;
use graphref::worldgen::Split;
use log::warn;

use super::eval::{eval_file, TopoFile, TOPOSIM_FILE};
use super::{usage, Common};
use crate::run::{self, Sidecar, SIDECAR};

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[command(flatten)]
    pub common: Common,
    /// Run directories, or directories containing run directories.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Metrics of one run; `None` where the metric file is absent.
#[derive(Debug, Clone)]
pub struct RunMetrics {
    pub sidecar: Sidecar,
    pub test_acc: Option<f64>,
    pub ood_acc: Option<f64>,
    pub toposim: Option<f64>,
}

fn read_optional<T: serde::de::DeserializeOwned>(path: &Path, warnings: &mut usize) -> Result<Option<T>> {
    if !path.exists() {
        warn!("missing {}", path.display());
        *warnings += 1;
        return Ok(None);
    }
    let text = std::fs::read_to_string(path)?;
    Ok(Some(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?))
}

pub fn collect(dirs: &[PathBuf]) -> Result<(Vec<RunMetrics>, usize)> {
    let mut runs = Vec::new();
    for d in dirs {
        if d.join(SIDECAR).exists() {
            runs.push(d.clone());
            continue;
        }
        let mut children: Vec<PathBuf> = std::fs::read_dir(d)
            .with_context(|| format!("reading {}", d.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join(SIDECAR).exists())
            .collect();
        children.sort();
        runs.extend(children);
    }
    if runs.is_empty() {
        return Err(usage("no run directories found"));
    }
    let mut warnings = 0;
    let mut out = Vec::with_capacity(runs.len());
    for dir in runs {
        let sidecar = run::read_sidecar(&dir)?;
        let test: Option<EvalReport> = read_optional(&dir.join(eval_file(Split::Test)), &mut warnings)?;
        let ood: Option<EvalReport> = read_optional(&dir.join(eval_file(Split::Ood)), &mut warnings)?;
        let topo: Option<TopoFile> = read_optional(&dir.join(TOPOSIM_FILE), &mut warnings)?;
        out.push(RunMetrics {
            sidecar,
            test_acc: test.map(|r| r.accuracy),
            ood_acc: ood.map(|r| r.accuracy),
            toposim: topo.map(|t| t.report.toposim),
        });
    }
    Ok((out, warnings))
}

fn stat(values: impl Iterator<Item = Option<f64>>) -> [String; 2] {
    let present: Vec<f64> = values.flatten().collect();
    match mean_std(&present) {
        Some((m, s)) => [format!("{m:.6}"), format!("{s:.6}")],
        None => ["null".into(), "null".into()],
    }
}

/// One row per configuration, aggregated over seeds.
pub fn write_report<W: Write>(runs: &[RunMetrics], w: W) -> Result<()> {
    let mut groups: BTreeMap<(String, String), Vec<&RunMetrics>> = BTreeMap::new();
    for r in runs {
        let key = (
            run::run_dir_name(&r.sidecar.game, &r.sidecar.train)
                .rsplit_once("-seed")
                .map(|(a, _)| a.to_string())
                .unwrap_or_default(),
            run::fingerprint(&r.sidecar.train)?,
        );
        groups.entry(key).or_default().push(r);
    }
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record([
        "config", "fingerprint", "runs", "seeds", "test_acc_mean", "test_acc_std", "ood_acc_mean",
        "ood_acc_std", "toposim_mean", "toposim_std",
    ])?;
    for ((name, fp), members) in &groups {
        let seeds = members.iter().map(|m| m.sidecar.seed.to_string()).collect::<Vec<_>>().join(" ");
        let [ta, ts] = stat(members.iter().map(|m| m.test_acc));
        let [oa, os] = stat(members.iter().map(|m| m.ood_acc));
        let [pa, ps] = stat(members.iter().map(|m| m.toposim));
        csv.write_record([
            name.as_str(),
            fp,
            &members.len().to_string(),
            &seeds,
            &ta,
            &ts,
            &oa,
            &os,
            &pa,
            &ps,
        ])?;
    }
    csv.flush()?;
    Ok(())
}

pub fn run(args: ReportArgs) -> Result<()> {
    let (runs, warnings) = collect(&args.runs)?;
    match &args.out {
        Some(path) => {
            let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_report(&runs, f)?;
        }
        None => write_report(&runs, std::io::stdout().lock())?,
    }
    if warnings > 0 {
        eprintln!("warning: {warnings} metric file(s) missing; affected cells are null");
    }
    Ok(())
}
