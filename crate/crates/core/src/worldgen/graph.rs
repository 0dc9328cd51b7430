use std::collections::BTreeSet;

use diffcore::Tensor;

use crate::{Error, Result};

/// Undirected graph with per-node features.
///
/// Edges are stored canonically as `(min, max)` pairs, sorted and without
/// duplicates. Self-pairs `(i, i)` are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSample {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    node_features: Tensor,
}

impl GraphSample {
    pub fn new(
        num_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        node_features: Tensor,
    ) -> Result<Self> {
        if num_nodes == 0 {
            return Err(Error::data("graph needs at least one node"));
        }
        let mut canon = BTreeSet::new();
        for (a, b) in edges {
            if a >= num_nodes || b >= num_nodes {
                return Err(Error::data(format!(
                    "edge ({a}, {b}) outside {num_nodes} nodes"
                )));
            }
            canon.insert((a.min(b), a.max(b)));
        }
        if node_features.rows() != num_nodes || node_features.shape().len() != 2 {
            return Err(Error::data(format!(
                "feature matrix {:?} does not have {num_nodes} rows",
                node_features.shape()
            )));
        }
        Ok(Self {
            num_nodes,
            edges: canon.into_iter().collect(),
            node_features,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn node_features(&self) -> &Tensor {
        &self.node_features
    }

    pub fn has_self_loop(&self, i: usize) -> bool {
        self.edges.binary_search(&(i, i)).is_ok()
    }

    /// Neighbor lists in ascending order. A self-loop puts the node in its
    /// own list.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_nodes];
        for &(a, b) in &self.edges {
            out[a].push(b);
            if a != b {
                out[b].push(a);
            }
        }
        for list in &mut out {
            list.sort_unstable();
        }
        out
    }

    /// Incident edges per node, not counting self-loops.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_nodes];
        for &(a, b) in &self.edges {
            if a != b {
                deg[a] += 1;
                deg[b] += 1;
            }
        }
        deg
    }

    /// Relabels node `i` as `perm[i]`, permuting feature rows to match.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        let n = self.num_nodes;
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::data("relabeling is not a permutation"));
        }
        let f = self.node_features.cols();
        let mut rows = vec![0.0; n * f];
        for (old, &new) in perm.iter().enumerate() {
            rows[new * f..(new + 1) * f].copy_from_slice(self.node_features.row_slice(old));
        }
        Self::new(
            n,
            self.edges.iter().map(|&(a, b)| (perm[a], perm[b])),
            Tensor::new(vec![n, f], rows)?,
        )
    }
}
