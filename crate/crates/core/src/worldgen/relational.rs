//! Game-2 objects: random undirected graphs with degree features.

use diffcore::Tensor;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::GraphSample;
use crate::{Error, Result};

/// Parameters of the Game-2 graph distribution.
///
/// Each sample draws its own edge probability uniformly from
/// `edge_prob_min..=edge_prob_max`, so edge counts vary across graphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationalSpec {
    pub num_nodes: usize,
    pub edge_prob_min: f64,
    pub edge_prob_max: f64,
}

impl RelationalSpec {
    pub fn new(num_nodes: usize) -> Result<Self> {
        let spec = Self {
            num_nodes,
            edge_prob_min: 0.1,
            edge_prob_max: 0.9,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_nodes < 2 {
            return Err(Error::config("Game-2 graphs need at least 2 nodes"));
        }
        let ok = |p: f64| p > 0.0 && p < 1.0;
        if !ok(self.edge_prob_min) || !ok(self.edge_prob_max) || self.edge_prob_min > self.edge_prob_max {
            return Err(Error::config("edge probability range must lie inside (0, 1)"));
        }
        Ok(())
    }

    /// Draws one graph with a per-sample edge probability.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<GraphSample> {
        let p = if self.edge_prob_min == self.edge_prob_max {
            self.edge_prob_min
        } else {
            rng.random_range(self.edge_prob_min..=self.edge_prob_max)
        };
        generate_game2_graph(self.num_nodes, p, rng)
    }
}

/// One-hot of each node's degree (self-loops excluded); width `num_nodes`.
pub fn degree_features(num_nodes: usize, degrees: &[usize]) -> Result<Tensor> {
    let mut feats = vec![0.0; num_nodes * num_nodes];
    for (i, &d) in degrees.iter().enumerate() {
        feats[i * num_nodes + d] = 1.0;
    }
    Ok(Tensor::new(vec![num_nodes, num_nodes], feats)?)
}

/// Builds a Game-2 graph from its non-loop edges: adds every self-loop and
/// computes degree features.
pub fn relational_graph(num_nodes: usize, edges: &[(usize, usize)]) -> Result<GraphSample> {
    let bare = GraphSample::new(
        num_nodes,
        edges.iter().copied().filter(|(a, b)| a != b),
        Tensor::zeros(&[num_nodes, 1]),
    )?;
    let degrees = bare.degrees();
    GraphSample::new(
        num_nodes,
        bare.edges().iter().copied().chain((0..num_nodes).map(|i| (i, i))),
        degree_features(num_nodes, &degrees)?,
    )
}

/// Erdős–Rényi draw over all unordered node pairs, then a self-loop on
/// every node.
pub fn generate_game2_graph<R: Rng + ?Sized>(
    num_nodes: usize,
    edge_probability: f64,
    rng: &mut R,
) -> Result<GraphSample> {
    if num_nodes < 2 {
        return Err(Error::config("Game-2 graphs need at least 2 nodes"));
    }
    if !(0.0..=1.0).contains(&edge_probability) {
        return Err(Error::config(format!(
            "edge probability {edge_probability} outside [0, 1]"
        )));
    }
    let mut edges = Vec::new();
    for a in 0..num_nodes {
        for b in a + 1..num_nodes {
            if rng.random::<f64>() < edge_probability {
                edges.push((a, b));
            }
        }
    }
    relational_graph(num_nodes, &edges)
}

/// Degree of each node in index order.
pub fn graph_to_sequence(g: &GraphSample) -> Vec<usize> {
    g.degrees()
}

/// Degree histogram of width `num_nodes`.
pub fn graph_to_bow(g: &GraphSample) -> Vec<f64> {
    let mut hist = vec![0.0; g.num_nodes()];
    for d in g.degrees() {
        hist[d] += 1.0;
    }
    hist
}
