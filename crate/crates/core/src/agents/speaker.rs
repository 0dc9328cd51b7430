use diffcore::{ParamId, Tape, Var};

use super::blocks::{GruCell, Linear};
use super::builder::ParamBuilder;
use super::encoders::{Encoder, EncoderSpec};
use crate::channel::Channel;
use crate::rng::Rng;
use crate::worldgen::Input;
use crate::Result;

/// Encoder followed by a recurrent decoder emitting one symbol per step.
#[derive(Debug)]
pub struct Speaker {
    encoder: Box<dyn Encoder>,
    start: ParamId,
    symbols: ParamId,
    cell: GruCell,
    out: Linear,
    message_len: usize,
}

/// A batch of messages as produced on a tape.
#[derive(Debug, Clone)]
pub struct Utterance {
    /// Per step, `B × V` logits.
    pub logits: Vec<Var>,
    /// Per step, `B × V` channel outputs fed to the listener.
    pub steps: Vec<Var>,
    /// Per sample, the `L` discrete symbols.
    pub symbols: Vec<Vec<usize>>,
}

impl Speaker {
    pub(crate) fn build(
        pb: &mut ParamBuilder,
        spec: &EncoderSpec,
        encoder: Box<dyn Encoder>,
    ) -> Result<Self> {
        let c = spec.config;
        Ok(Self {
            encoder,
            start: pb.xavier("start", 1, c.embedding_size)?,
            symbols: pb.xavier("symbols", c.vocab_size, c.embedding_size)?,
            cell: GruCell::new(&mut pb.scope("decoder"), c.embedding_size, c.hidden_size)?,
            out: Linear::new(&mut pb.scope("vocab"), c.hidden_size, c.vocab_size, true)?,
            message_len: c.message_len,
        })
    }

    pub fn encoder(&self) -> &dyn Encoder {
        self.encoder.as_ref()
    }

    /// Encodes the targets and decodes `L` steps through `channel`. Each
    /// step's channel output times the symbol table is the next input.
    pub fn speak(
        &self,
        tape: &mut Tape,
        inputs: &[&Input],
        channel: &dyn Channel,
        rng: &mut Rng,
    ) -> Result<Utterance> {
        let b = inputs.len();
        let mut h = self.encoder.encode(tape, inputs)?;
        let start = tape.param(self.start)?;
        let table = tape.param(self.symbols)?;
        let mut x = tape.gather_rows(start, &vec![0; b])?;
        let mut logits = Vec::with_capacity(self.message_len);
        let mut steps = Vec::with_capacity(self.message_len);
        let mut symbols = vec![Vec::with_capacity(self.message_len); b];
        for _ in 0..self.message_len {
            h = self.cell.step(tape, x, h)?;
            let l = self.out.forward(tape, h)?;
            let (y, syms) = channel.emit(tape, l, rng)?;
            for (row, s) in symbols.iter_mut().zip(syms) {
                row.push(s);
            }
            x = tape.matmul(y, table)?;
            logits.push(l);
            steps.push(y);
        }
        Ok(Utterance {
            logits,
            steps,
            symbols,
        })
    }
}
