use diffcore::{ParamId, Tape, Tensor, Var};

use super::blocks::GruCell;
use super::builder::ParamBuilder;
use super::encoders::{Encoder, EncoderSpec};
use crate::worldgen::Input;
use crate::{Error, Result};

/// Reads a message into a vector `u`, encodes candidates into `c_i`, and
/// outputs `softmax_i(u · c_i)`.
#[derive(Debug)]
pub struct Listener {
    encoder: Box<dyn Encoder>,
    symbols: ParamId,
    cell: GruCell,
    vocab_size: usize,
}

impl Listener {
    pub(crate) fn build(
        pb: &mut ParamBuilder,
        spec: &EncoderSpec,
        encoder: Box<dyn Encoder>,
    ) -> Result<Self> {
        let c = spec.config;
        Ok(Self {
            encoder,
            symbols: pb.xavier("symbols", c.vocab_size, c.embedding_size)?,
            cell: GruCell::new(&mut pb.scope("reader"), c.embedding_size, c.hidden_size)?,
            vocab_size: c.vocab_size,
        })
    }

    pub fn encoder(&self) -> &dyn Encoder {
        self.encoder.as_ref()
    }

    /// Runs the reader over per-step `B × V` symbol rows.
    pub fn read(&self, tape: &mut Tape, steps: &[Var]) -> Result<Var> {
        let first = steps.first().ok_or_else(|| Error::data("empty message"))?;
        let b = tape.shape(*first)[0];
        let table = tape.param(self.symbols)?;
        let mut h = tape.constant(Tensor::zeros(&[b, self.cell.hidden()]));
        for &y in steps {
            let x = tape.matmul(y, table)?;
            h = self.cell.step(tape, x, h)?;
        }
        Ok(h)
    }

    /// Reads discrete messages given as symbol lists of equal length.
    pub fn read_symbols(&self, tape: &mut Tape, messages: &[&[usize]]) -> Result<Var> {
        let len = messages.first().map_or(0, |m| m.len());
        if messages.iter().any(|m| m.len() != len) {
            return Err(Error::data("messages in a batch must share one length"));
        }
        let v = self.vocab_size;
        let mut steps = Vec::with_capacity(len);
        for t in 0..len {
            let mut onehot = vec![0.0; messages.len() * v];
            for (b, m) in messages.iter().enumerate() {
                if m[t] >= v {
                    return Err(Error::OutOfRange {
                        op: "message symbol",
                        value: m[t],
                        limit: v,
                    });
                }
                onehot[b * v + m[t]] = 1.0;
            }
            steps.push(tape.constant(Tensor::new(vec![messages.len(), v], onehot)?));
        }
        self.read(tape, &steps)
    }

    pub fn embed(&self, tape: &mut Tape, candidates: &[&Input]) -> Result<Var> {
        self.encoder.encode(tape, candidates)
    }

    /// Candidate probabilities, `B × (K+1)`. Row `b` scores the embedding
    /// rows `choices[b]` of `embedded` against `u[b]`.
    pub fn score(
        &self,
        tape: &mut Tape,
        u: Var,
        embedded: Var,
        choices: &[Vec<usize>],
    ) -> Result<Var> {
        let k1 = choices.first().map_or(0, Vec::len);
        if k1 == 0 || choices.iter().any(|c| c.len() != k1) {
            return Err(Error::data("every episode needs the same non-zero candidate count"));
        }
        let flat: Vec<usize> = choices.iter().flatten().copied().collect();
        let owner: Vec<usize> = (0..choices.len()).flat_map(|b| std::iter::repeat_n(b, k1)).collect();
        let c = tape.gather_rows(embedded, &flat)?;
        let us = tape.gather_rows(u, &owner)?;
        let prod = tape.mul(us, c)?;
        let dots = tape.sum_cols(prod);
        let scores = tape.reshape(dots, &[choices.len(), k1])?;
        Ok(tape.softmax_rows(scores))
    }
}
