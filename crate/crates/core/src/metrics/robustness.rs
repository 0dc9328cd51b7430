use std::collections::BTreeMap;
use std::path::Path;

use diffcore::ParamStore;
use serde::{Deserialize, Serialize};

use crate::agents::Agents;
use crate::channel::{argmax, distort_message, Message};
use crate::engine::{listen, EvalRecord, Pool};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessGroup {
    pub original_symbol: usize,
    pub episodes: usize,
    pub original_accuracy: f64,
    /// Accuracy when the symbol is replaced by each vocabulary entry.
    pub accuracy: Vec<f64>,
}

impl RobustnessGroup {
    /// Whether the undistorted symbol attains the group's maximum accuracy.
    pub fn original_is_best(&self) -> bool {
        let max = self.accuracy.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        self.accuracy[self.original_symbol] >= max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub position: usize,
    pub vocab_size: usize,
    pub groups: Vec<RobustnessGroup>,
}

#[derive(Serialize)]
struct CsvRow {
    original_symbol: usize,
    replacement_symbol: usize,
    accuracy: f64,
    n: usize,
}

impl RobustnessReport {
    /// Fraction of groups whose undistorted symbol attains the maximum.
    pub fn fraction_original_best(&self) -> f64 {
        if self.groups.is_empty() {
            return 0.0;
        }
        let hits = self.groups.iter().filter(|g| g.original_is_best()).count();
        hits as f64 / self.groups.len() as f64
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for g in &self.groups {
            for (r, &acc) in g.accuracy.iter().enumerate() {
                w.serialize(CsvRow {
                    original_symbol: g.original_symbol,
                    replacement_symbol: r,
                    accuracy: acc,
                    n: g.episodes,
                })?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Groups evaluation records by the symbol at `position` and replays the
/// listener with that symbol replaced by every vocabulary entry.
pub fn robustness_sweep(
    agents: &Agents,
    params: &ParamStore,
    pool: &Pool,
    records: &[EvalRecord],
    position: usize,
) -> Result<RobustnessReport> {
    let v = agents.config.vocab_size;
    if position >= agents.config.message_len {
        return Err(Error::OutOfRange {
            op: "distortion position",
            value: position,
            limit: agents.config.message_len,
        });
    }
    let mut groups: BTreeMap<usize, Vec<&EvalRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.message[position]).or_default().push(r);
    }
    let mut out = Vec::with_capacity(groups.len());
    for (symbol, recs) in groups {
        let episodes: Vec<_> = recs.iter().map(|r| r.episode.clone()).collect();
        let originals = recs
            .iter()
            .map(|r| Message::new(r.message.clone(), v))
            .collect::<Result<Vec<_>>>()?;
        let mut accuracy = Vec::with_capacity(v);
        for replacement in 0..v {
            let distorted = originals
                .iter()
                .map(|m| distort_message(m, position, replacement))
                .collect::<Result<Vec<_>>>()?;
            let views: Vec<&[usize]> = distorted.iter().map(Message::symbols).collect();
            let mut correct = 0;
            for (chunk_eps, chunk_msgs) in episodes.chunks(256).zip(views.chunks(256)) {
                let probs = listen(agents, params, pool, chunk_eps, chunk_msgs)?;
                correct += probs
                    .iter()
                    .zip(chunk_eps)
                    .filter(|(p, ep)| argmax(p) == ep.target_index)
                    .count();
            }
            accuracy.push(correct as f64 / episodes.len() as f64);
        }
        let original_correct = recs.iter().filter(|r| r.correct()).count();
        out.push(RobustnessGroup {
            original_symbol: symbol,
            episodes: recs.len(),
            original_accuracy: original_correct as f64 / recs.len() as f64,
            accuracy,
        });
    }
    Ok(RobustnessReport {
        position,
        vocab_size: v,
        groups: out,
    })
}
