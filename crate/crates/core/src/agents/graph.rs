//! Graph layers and pooling over a batch of graphs packed as one disjoint
//! union.

use std::sync::Arc;

use diffcore::{Aggregation, ParamId, Tape, Tensor, Var};

use super::builder::ParamBuilder;
use crate::registry::Registry;
use crate::worldgen::GraphSample;
use crate::{Error, Result};

/// Disjoint union of graphs with every neighborhood reduction precomputed.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    features: Tensor,
    /// `Σ_{j∈N(i)}` with `N(i)` taken verbatim from the edge list.
    pub neighbor_sum: Arc<Aggregation>,
    /// Mean over `N(i) \ {i}`; zero row when empty.
    pub neighbor_mean: Arc<Aggregation>,
    /// Mean over `{i} ∪ N(i)`.
    pub closed_mean: Arc<Aggregation>,
    /// `N(i) \ {i}` as global row indices.
    pub open_neighbors: Vec<Vec<usize>>,
    /// Node rows of each graph.
    pub segments: Vec<Vec<usize>>,
    pub segment_sum: Arc<Aggregation>,
    pub segment_mean: Arc<Aggregation>,
}

impl GraphBatch {
    pub fn new(graphs: &[&GraphSample]) -> Result<Self> {
        let first = graphs.first().ok_or_else(|| Error::data("empty graph batch"))?;
        let width = first.node_features().cols();
        let total: usize = graphs.iter().map(|g| g.num_nodes()).sum();
        let mut features = Vec::with_capacity(total * width);
        let mut neighbor_sum = Vec::with_capacity(total);
        let mut neighbor_mean = Vec::with_capacity(total);
        let mut closed_mean = Vec::with_capacity(total);
        let mut open_neighbors = Vec::with_capacity(total);
        let mut segments = Vec::with_capacity(graphs.len());
        let mut offset = 0;
        for g in graphs {
            if g.node_features().cols() != width {
                return Err(Error::ReprMismatch {
                    expected: format!("node features of width {width}"),
                    actual: format!("width {}", g.node_features().cols()),
                });
            }
            features.extend_from_slice(g.node_features().data());
            for (i, list) in g.neighbors().into_iter().enumerate() {
                let gi = offset + i;
                neighbor_sum.push(list.iter().map(|&j| (offset + j, 1.0)).collect());
                let open: Vec<usize> = list.iter().filter(|&&j| j != i).map(|&j| offset + j).collect();
                let w = 1.0 / open.len().max(1) as f64;
                neighbor_mean.push(open.iter().map(|&j| (j, w)).collect());
                let w = 1.0 / (open.len() + 1) as f64;
                closed_mean.push(std::iter::once(gi).chain(open.iter().copied()).map(|j| (j, w)).collect());
                open_neighbors.push(open);
            }
            segments.push((offset..offset + g.num_nodes()).collect());
            offset += g.num_nodes();
        }
        let segment_sum = segments.iter().map(|s: &Vec<usize>| s.iter().map(|&j| (j, 1.0)).collect()).collect();
        let segment_mean = segments
            .iter()
            .map(|s: &Vec<usize>| {
                let w = 1.0 / s.len() as f64;
                s.iter().map(|&j| (j, w)).collect()
            })
            .collect();
        let agg = |rows| Arc::new(Aggregation { rows });
        Ok(Self {
            features: Tensor::new(vec![total, width], features)?,
            neighbor_sum: agg(neighbor_sum),
            neighbor_mean: agg(neighbor_mean),
            closed_mean: agg(closed_mean),
            open_neighbors,
            segments,
            segment_sum: agg(segment_sum),
            segment_mean: agg(segment_mean),
        })
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn num_graphs(&self) -> usize {
        self.segments.len()
    }
}

/// One round of neighborhood aggregation.
pub trait GraphLayer: Send + Sync + std::fmt::Debug {
    fn forward(&self, tape: &mut Tape, h: Var, batch: &GraphBatch) -> Result<Var>;
}

pub type LayerFactory = fn(&mut ParamBuilder, usize, usize) -> Result<Box<dyn GraphLayer>>;

/// `ReLU(Σ_{j∈N(i)} h_j · W)` without normalization or bias.
#[derive(Debug)]
pub struct GcnLayer {
    w: ParamId,
}

impl GraphLayer for GcnLayer {
    fn forward(&self, tape: &mut Tape, h: Var, batch: &GraphBatch) -> Result<Var> {
        let w = tape.param(self.w)?;
        let hw = tape.matmul(h, w)?;
        let s = tape.aggregate(hw, &batch.neighbor_sum)?;
        Ok(tape.relu(s))
    }
}

fn gcn(pb: &mut ParamBuilder, inp: usize, out: usize) -> Result<Box<dyn GraphLayer>> {
    Ok(Box::new(GcnLayer {
        w: pb.xavier("w", inp, out)?,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SageAggregator {
    Mean,
    Pool,
    Gcn,
}

/// GraphSAGE layer:
/// mean `ReLU([h_i ‖ mean_{N(i)} h_j]·W)`,
/// pool `ReLU([h_i ‖ max_{N(i)} ReLU(h_j·W_pool)]·W)`,
/// gcn `ReLU(mean_{{i}∪N(i)} h_j · W)`.
#[derive(Debug)]
pub struct SageLayer {
    aggregator: SageAggregator,
    w: ParamId,
    w_pool: Option<ParamId>,
}

impl GraphLayer for SageLayer {
    fn forward(&self, tape: &mut Tape, h: Var, batch: &GraphBatch) -> Result<Var> {
        let w = tape.param(self.w)?;
        let pre = match self.aggregator {
            SageAggregator::Mean => {
                let m = tape.aggregate(h, &batch.neighbor_mean)?;
                let cat = tape.concat_cols(&[h, m])?;
                tape.matmul(cat, w)?
            }
            SageAggregator::Pool => {
                let wp = tape.param(self.w_pool.expect("pool weights"))?;
                let p = tape.matmul(h, wp)?;
                let p = tape.relu(p);
                let m = tape.segment_max(p, &batch.open_neighbors)?;
                let cat = tape.concat_cols(&[h, m])?;
                tape.matmul(cat, w)?
            }
            SageAggregator::Gcn => {
                let m = tape.aggregate(h, &batch.closed_mean)?;
                tape.matmul(m, w)?
            }
        };
        Ok(tape.relu(pre))
    }
}

fn sage(
    pb: &mut ParamBuilder,
    aggregator: SageAggregator,
    inp: usize,
    out: usize,
) -> Result<Box<dyn GraphLayer>> {
    let (w, w_pool) = match aggregator {
        SageAggregator::Gcn => (pb.xavier("w", inp, out)?, None),
        SageAggregator::Mean => (pb.xavier("w", 2 * inp, out)?, None),
        SageAggregator::Pool => (
            pb.xavier("w", 2 * inp, out)?,
            Some(pb.xavier("w_pool", inp, inp)?),
        ),
    };
    Ok(Box::new(SageLayer {
        aggregator,
        w,
        w_pool,
    }))
}

pub fn builtin_layers() -> Registry<LayerFactory> {
    Registry::<LayerFactory>::new("graph layer")
        .with("gcn", gcn)
        .with("sage-mean", |pb, i, o| sage(pb, SageAggregator::Mean, i, o))
        .with("sage-pool", |pb, i, o| sage(pb, SageAggregator::Pool, i, o))
        .with("sage-gcn", |pb, i, o| sage(pb, SageAggregator::Gcn, i, o))
}

/// Reduces node rows to one row per graph.
pub trait Pooling: Send + Sync + std::fmt::Debug {
    fn reduce(&self, tape: &mut Tape, h: Var, batch: &GraphBatch) -> Result<Var>;
}

pub type PoolingFactory = fn() -> Box<dyn Pooling>;

#[derive(Debug)]
pub struct SumPooling;
#[derive(Debug)]
pub struct MeanPooling;
#[derive(Debug)]
pub struct MaxPooling;

impl Pooling for SumPooling {
    fn reduce(&self, tape: &mut Tape, h: Var, batch: &GraphBatch) -> Result<Var> {
        Ok(tape.aggregate(h, &batch.segment_sum)?)
    }
}

impl Pooling for MeanPooling {
    fn reduce(&self, tape: &mut Tape, h: Var, batch: &GraphBatch) -> Result<Var> {
        Ok(tape.aggregate(h, &batch.segment_mean)?)
    }
}

impl Pooling for MaxPooling {
    fn reduce(&self, tape: &mut Tape, h: Var, batch: &GraphBatch) -> Result<Var> {
        Ok(tape.segment_max(h, &batch.segments)?)
    }
}

pub fn builtin_pooling() -> Registry<PoolingFactory> {
    Registry::<PoolingFactory>::new("pooling")
        .with("sum", || Box::new(SumPooling))
        .with("mean", || Box::new(MeanPooling))
        .with("max", || Box::new(MaxPooling))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Rng};
    use diffcore::ParamStore;

    fn graph(n: usize, edges: &[(usize, usize)], rows: Vec<Vec<f64>>) -> GraphSample {
        GraphSample::new(n, edges.iter().copied(), Tensor::from_rows(&rows).unwrap()).unwrap()
    }

    fn run_layer(name: &str, g: &GraphSample, set: &[(&str, Tensor)]) -> Tensor {
        let mut store = ParamStore::new();
        let mut rng: Rng = stream(0, "t", 0);
        let f = g.node_features().cols();
        let layer = builtin_layers().get(name).unwrap()(&mut ParamBuilder::new(&mut store, &mut rng), f, f).unwrap();
        for (n, t) in set {
            let id = store.id(n).unwrap();
            *store.get_mut(id) = t.clone();
        }
        let batch = GraphBatch::new(&[g]).unwrap();
        let mut tape = Tape::with_params(&store);
        let h = tape.constant(batch.features().clone());
        let out = layer.forward(&mut tape, h, &batch).unwrap();
        tape.value(out).clone()
    }

    #[test]
    fn gcn_single_node_with_self_loop() {
        let g = graph(1, &[(0, 0)], vec![vec![1.0, -1.0]]);
        let out = run_layer("gcn", &g, &[("w", Tensor::eye(2))]);
        assert_eq!(out.data(), &[1.0, 0.0]);
    }

    #[test]
    fn gcn_two_nodes_swap_features() {
        let g = graph(2, &[(0, 1)], vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let out = run_layer("gcn", &g, &[("w", Tensor::eye(2))]);
        assert_eq!(out.data(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn gcn_zero_weights() {
        let g = graph(2, &[(0, 1), (1, 1)], vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let out = run_layer("gcn", &g, &[("w", Tensor::zeros(&[2, 2]))]);
        assert!(out.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn sage_mean_isolated_node_uses_own_features() {
        let g = graph(1, &[(0, 0)], vec![vec![2.0, -1.0]]);
        let mut w = Tensor::zeros(&[4, 2]);
        w.data_mut()[0] = 1.0; // row 0 col 0
        w.data_mut()[3] = 1.0; // row 1 col 1
        let out = run_layer("sage-mean", &g, &[("w", w)]);
        assert_eq!(out.data(), &[2.0, 0.0]);
    }

    #[test]
    fn sage_mean_and_gcn_agree_on_single_node() {
        let g = graph(1, &[], vec![vec![0.5, 1.5]]);
        let mut wm = Tensor::zeros(&[4, 2]);
        wm.data_mut()[..4].copy_from_slice(&[1.0, 2.0, -1.0, 0.5]);
        let wg = Tensor::from_rows(&[vec![1.0, 2.0], vec![-1.0, 0.5]]).unwrap();
        let a = run_layer("sage-mean", &g, &[("w", wm)]);
        let b = run_layer("sage-gcn", &g, &[("w", wg)]);
        assert_eq!(a, b);
    }

    #[test]
    fn sage_pool_matches_hand_rolled_max() {
        let rows = vec![vec![1.0, -2.0], vec![0.5, 3.0], vec![-1.0, 1.0]];
        let g = graph(3, &[(0, 1), (1, 2)], rows.clone());
        let wp = Tensor::from_rows(&[vec![1.0, -0.5], vec![0.25, 1.0]]).unwrap();
        let w = Tensor::from_rows(&[
            vec![0.3, -0.2],
            vec![0.1, 0.4],
            vec![-0.5, 0.7],
            vec![0.6, 0.2],
        ])
        .unwrap();
        let out = run_layer("sage-pool", &g, &[("w", w.clone()), ("w_pool", wp.clone())]);

        let relu = |x: f64| x.max(0.0);
        let pooled = |j: usize| -> Vec<f64> {
            (0..2)
                .map(|c| relu(rows[j][0] * wp.at(0, c) + rows[j][1] * wp.at(1, c)))
                .collect()
        };
        let nbrs = [vec![1], vec![0, 2], vec![1]];
        for i in 0..3 {
            let mut m = vec![f64::NEG_INFINITY; 2];
            for &j in &nbrs[i] {
                for (c, v) in pooled(j).into_iter().enumerate() {
                    m[c] = m[c].max(v);
                }
            }
            let cat = [rows[i][0], rows[i][1], m[0], m[1]];
            for c in 0..2 {
                let want = relu((0..4).map(|k| cat[k] * w.at(k, c)).sum());
                assert!((out.at(i, c) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pooling_variants() {
        let g = graph(2, &[(0, 1)], vec![vec![1.0, 2.0], vec![1.0, 2.0]]);
        let batch = GraphBatch::new(&[&g]).unwrap();
        let reduce = |name: &str| {
            let mut tape = Tape::new();
            let h = tape.constant(batch.features().clone());
            let p = builtin_pooling().get(name).unwrap()();
            let out = p.reduce(&mut tape, h, &batch).unwrap();
            tape.value(out).data().to_vec()
        };
        assert_eq!(reduce("sum"), vec![2.0, 4.0]);
        assert_eq!(reduce("mean"), vec![1.0, 2.0]);
        assert_eq!(reduce("max"), vec![1.0, 2.0]);
    }

    #[test]
    fn batch_offsets_neighbors() {
        let a = graph(2, &[(0, 1)], vec![vec![1.0], vec![2.0]]);
        let b = graph(2, &[(0, 0), (0, 1)], vec![vec![3.0], vec![4.0]]);
        let batch = GraphBatch::new(&[&a, &b]).unwrap();
        assert_eq!(batch.segments, vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(batch.open_neighbors, vec![vec![1], vec![0], vec![3], vec![2]]);
        assert_eq!(batch.neighbor_sum.rows[2], vec![(2, 1.0), (3, 1.0)]);
    }
}
