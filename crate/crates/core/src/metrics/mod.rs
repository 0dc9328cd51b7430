//! Compositionality and robustness measurements.

mod distance;
mod robustness;
mod topsim;

pub use distance::{average_ranks, cosine_similarity, levenshtein, mean_std, pearson, spearman};
pub use robustness::{robustness_sweep, RobustnessGroup, RobustnessReport};
pub use topsim::{topographic_similarity, PairBudget, TopoReport};
