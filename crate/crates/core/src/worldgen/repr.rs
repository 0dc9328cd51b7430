//! Matched input representations derived from one underlying sample.

use serde::{Deserialize, Serialize};

use super::graph::GraphSample;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReprKind {
    Bow,
    Seq,
    Graph,
}

impl ReprKind {
    pub const ALL: [ReprKind; 3] = [ReprKind::Bow, ReprKind::Seq, ReprKind::Graph];

    pub fn as_str(self) -> &'static str {
        match self {
            ReprKind::Bow => "bow",
            ReprKind::Seq => "seq",
            ReprKind::Graph => "graph",
        }
    }
}

impl std::fmt::Display for ReprKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ReprKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bow" => Ok(ReprKind::Bow),
            "seq" => Ok(ReprKind::Seq),
            "graph" => Ok(ReprKind::Graph),
            other => Err(Error::config(format!(
                "unknown representation {other:?} (expected bow, seq or graph)"
            ))),
        }
    }
}

/// What an encoder consumes.
#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    Bow(Vec<f64>),
    Seq { tokens: Vec<usize>, vocab: usize },
    Graph(GraphSample),
}

impl Input {
    pub fn kind(&self) -> ReprKind {
        match self {
            Input::Bow(_) => ReprKind::Bow,
            Input::Seq { .. } => ReprKind::Seq,
            Input::Graph(_) => ReprKind::Graph,
        }
    }

    /// Flat real vector used as the input side of topographic similarity.
    /// Sequences become concatenated token one-hots; graphs become their node
    /// feature rows concatenated in node order.
    pub fn flatten(&self) -> Vec<f64> {
        match self {
            Input::Bow(v) => v.clone(),
            Input::Seq { tokens, vocab } => {
                let mut out = vec![0.0; tokens.len() * vocab];
                for (i, &t) in tokens.iter().enumerate() {
                    out[i * vocab + t] = 1.0;
                }
                out
            }
            Input::Graph(g) => g.node_features().data().to_vec(),
        }
    }
}

/// Sizes encoders need to allocate their input layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDims {
    pub bow_width: usize,
    pub seq_vocab: usize,
    pub node_features: usize,
}
