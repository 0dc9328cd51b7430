use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::distance::{cosine_similarity, levenshtein, spearman};
use crate::rng::Rng;
use crate::{Error, Result};

/// How many items enter the pairwise comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairBudget {
    Full,
    Items(usize),
}

impl Default for PairBudget {
    fn default() -> Self {
        PairBudget::Items(500)
    }
}

impl std::str::FromStr for PairBudget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "full" {
            return Ok(PairBudget::Full);
        }
        match s.parse::<usize>() {
            Ok(n) if n >= 2 => Ok(PairBudget::Items(n)),
            _ => Err(Error::config(format!(
                "pair budget must be \"full\" or an item count of at least 2, got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopoReport {
    pub toposim: f64,
    pub num_items: usize,
    pub num_pairs: usize,
    pub input_metric: String,
    pub message_metric: String,
}

/// Rounds to 12 decimals so similarities equal up to rounding error rank as
/// ties.
fn snap(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// Negative Spearman correlation between pairwise input cosine similarities
/// and pairwise message edit distances.
pub fn topographic_similarity(
    inputs: &[Vec<f64>],
    messages: &[Vec<usize>],
    budget: PairBudget,
    rng: &mut Rng,
) -> Result<TopoReport> {
    if inputs.len() != messages.len() {
        return Err(Error::data(format!(
            "{} inputs but {} messages",
            inputs.len(),
            messages.len()
        )));
    }
    let n = inputs.len();
    let chosen: Vec<usize> = match budget {
        PairBudget::Items(m) if m < n => {
            let mut idx = index::sample(rng, n, m).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..n).collect(),
    };
    let m = chosen.len();
    let pairs = m * m.saturating_sub(1) / 2;
    let mut sims = Vec::with_capacity(pairs);
    let mut dists = Vec::with_capacity(pairs);
    for (a, &i) in chosen.iter().enumerate() {
        for &j in &chosen[a + 1..] {
            sims.push(snap(cosine_similarity(&inputs[i], &inputs[j])?));
            dists.push(levenshtein(&messages[i], &messages[j]) as f64);
        }
    }
    let rho = spearman(&sims, &dists)?;
    Ok(TopoReport {
        toposim: -rho,
        num_items: m,
        num_pairs: pairs,
        input_metric: "cosine".into(),
        message_metric: "levenshtein".into(),
    })
}
