//! Input encoders, one per representation kind.

use diffcore::{ParamId, Tape, Tensor, Var};

use super::blocks::{GruCell, Linear};
use super::builder::ParamBuilder;
use super::config::AgentConfig;
use super::graph::{GraphBatch, GraphLayer, LayerFactory, Pooling, PoolingFactory};
use crate::registry::Registry;
use crate::worldgen::{GraphSample, Input, InputDims, ReprKind};
use crate::{Error, Result};

/// Maps a batch of inputs of one representation to a `B × hidden` matrix.
pub trait Encoder: Send + Sync + std::fmt::Debug {
    fn repr(&self) -> ReprKind;
    fn encode(&self, tape: &mut Tape, inputs: &[&Input]) -> Result<Var>;
}

pub struct EncoderSpec<'a> {
    pub config: &'a AgentConfig,
    pub dims: InputDims,
    pub layers: &'a Registry<LayerFactory>,
    pub pooling: &'a Registry<PoolingFactory>,
}

pub type EncoderFactory = fn(&mut ParamBuilder, &EncoderSpec) -> Result<Box<dyn Encoder>>;

pub fn builtin_encoders() -> Registry<EncoderFactory> {
    Registry::<EncoderFactory>::new("encoder")
        .with("bow", BowEncoder::build)
        .with("seq", SeqEncoder::build)
        .with("graph", GraphEncoder::build)
}

fn mismatch(expected: ReprKind, got: &Input) -> Error {
    Error::ReprMismatch {
        expected: expected.to_string(),
        actual: got.kind().to_string(),
    }
}

/// Linear, ReLU, linear.
#[derive(Debug)]
pub struct BowEncoder {
    width: usize,
    l1: Linear,
    l2: Linear,
}

impl BowEncoder {
    fn build(pb: &mut ParamBuilder, spec: &EncoderSpec) -> Result<Box<dyn Encoder>> {
        let (w, h) = (spec.dims.bow_width, spec.config.hidden_size);
        Ok(Box::new(Self {
            width: w,
            l1: Linear::new(&mut pb.scope("l1"), w, h, true)?,
            l2: Linear::new(&mut pb.scope("l2"), h, h, true)?,
        }))
    }
}

impl Encoder for BowEncoder {
    fn repr(&self) -> ReprKind {
        ReprKind::Bow
    }

    fn encode(&self, tape: &mut Tape, inputs: &[&Input]) -> Result<Var> {
        let mut data = Vec::with_capacity(inputs.len() * self.width);
        for inp in inputs {
            let Input::Bow(v) = inp else {
                return Err(mismatch(ReprKind::Bow, inp));
            };
            if v.len() != self.width {
                return Err(Error::ReprMismatch {
                    expected: format!("bag of words of width {}", self.width),
                    actual: format!("width {}", v.len()),
                });
            }
            data.extend_from_slice(v);
        }
        let x = tape.constant(Tensor::new(vec![inputs.len(), self.width], data)?);
        let h = self.l1.forward(tape, x)?;
        let h = tape.relu(h);
        self.l2.forward(tape, h)
    }
}

/// Token embedding, GRU over the sequence, projection of the final state.
#[derive(Debug)]
pub struct SeqEncoder {
    vocab: usize,
    embedding: ParamId,
    cell: GruCell,
    out: Linear,
}

impl SeqEncoder {
    fn build(pb: &mut ParamBuilder, spec: &EncoderSpec) -> Result<Box<dyn Encoder>> {
        let c = spec.config;
        let vocab = spec.dims.seq_vocab;
        Ok(Box::new(Self {
            vocab,
            embedding: pb.xavier("embedding", vocab, c.embedding_size)?,
            cell: GruCell::new(&mut pb.scope("gru"), c.embedding_size, c.hidden_size)?,
            out: Linear::new(&mut pb.scope("out"), c.hidden_size, c.hidden_size, true)?,
        }))
    }
}

impl Encoder for SeqEncoder {
    fn repr(&self) -> ReprKind {
        ReprKind::Seq
    }

    fn encode(&self, tape: &mut Tape, inputs: &[&Input]) -> Result<Var> {
        let mut seqs = Vec::with_capacity(inputs.len());
        for inp in inputs {
            let Input::Seq { tokens, .. } = inp else {
                return Err(mismatch(ReprKind::Seq, inp));
            };
            if let Some(&t) = tokens.iter().find(|&&t| t >= self.vocab) {
                return Err(Error::OutOfRange {
                    op: "sequence token",
                    value: t,
                    limit: self.vocab,
                });
            }
            seqs.push(tokens.as_slice());
        }
        let len = seqs.first().map_or(0, |s| s.len());
        if len == 0 || seqs.iter().any(|s| s.len() != len) {
            return Err(Error::data("sequence batch needs equal, non-zero lengths"));
        }
        let table = tape.param(self.embedding)?;
        let mut h = tape.constant(Tensor::zeros(&[inputs.len(), self.cell.hidden()]));
        for t in 0..len {
            let idx: Vec<usize> = seqs.iter().map(|s| s[t]).collect();
            let x = tape.gather_rows(table, &idx)?;
            h = self.cell.step(tape, x, h)?;
        }
        self.out.forward(tape, h)
    }
}

/// Stacked graph layers, pooling, then a bias-free linear map.
#[derive(Debug)]
pub struct GraphEncoder {
    width: usize,
    layers: Vec<Box<dyn GraphLayer>>,
    pooling: Box<dyn Pooling>,
    w_out: ParamId,
}

impl GraphEncoder {
    fn build(pb: &mut ParamBuilder, spec: &EncoderSpec) -> Result<Box<dyn Encoder>> {
        let c = spec.config;
        let factory = spec.layers.get(&c.layer_key())?;
        let mut layers = Vec::with_capacity(c.num_layers);
        let mut inp = spec.dims.node_features;
        for l in 0..c.num_layers {
            layers.push(factory(&mut pb.scope(&format!("layer{l}")), inp, c.hidden_size)?);
            inp = c.hidden_size;
        }
        Ok(Box::new(Self {
            width: spec.dims.node_features,
            layers,
            pooling: spec.pooling.get(&c.pooling)?(),
            w_out: pb.xavier("w_out", c.hidden_size, c.hidden_size)?,
        }))
    }

    /// Encodes an already packed batch.
    pub fn encode_batch(&self, tape: &mut Tape, batch: &GraphBatch) -> Result<Var> {
        let mut h = tape.constant(batch.features().clone());
        for layer in &self.layers {
            h = layer.forward(tape, h, batch)?;
        }
        let pooled = self.pooling.reduce(tape, h, batch)?;
        let w = tape.param(self.w_out)?;
        Ok(tape.matmul(pooled, w)?)
    }
}

impl Encoder for GraphEncoder {
    fn repr(&self) -> ReprKind {
        ReprKind::Graph
    }

    fn encode(&self, tape: &mut Tape, inputs: &[&Input]) -> Result<Var> {
        let mut graphs: Vec<&GraphSample> = Vec::with_capacity(inputs.len());
        for inp in inputs {
            let Input::Graph(g) = inp else {
                return Err(mismatch(ReprKind::Graph, inp));
            };
            if g.node_features().cols() != self.width {
                return Err(Error::ReprMismatch {
                    expected: format!("node features of width {}", self.width),
                    actual: format!("width {}", g.node_features().cols()),
                });
            }
            graphs.push(g);
        }
        let batch = GraphBatch::new(&graphs)?;
        self.encode_batch(tape, &batch)
    }
}
