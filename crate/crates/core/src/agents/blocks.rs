//! Dense building blocks shared by encoders and decoders.

use diffcore::{ParamId, Tape, Var};

use super::builder::ParamBuilder;
use crate::Result;

/// `x·W (+ b)`.
#[derive(Debug, Clone)]
pub struct Linear {
    w: ParamId,
    b: Option<ParamId>,
}

impl Linear {
    pub fn new(pb: &mut ParamBuilder, inp: usize, out: usize, bias: bool) -> Result<Self> {
        let w = pb.xavier("w", inp, out)?;
        let b = if bias { Some(pb.zeros("b", &[1, out])?) } else { None };
        Ok(Self { w, b })
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let w = tape.param(self.w)?;
        let y = tape.matmul(x, w)?;
        match self.b {
            Some(b) => {
                let b = tape.param(b)?;
                Ok(tape.add_bias(y, b)?)
            }
            None => Ok(y),
        }
    }
}

/// Gated recurrent unit with gate order reset, update, candidate:
///
/// ```text
/// r  = σ(x·W_r + b_ir + h·U_r + b_hr)
/// z  = σ(x·W_z + b_iz + h·U_z + b_hz)
/// n  = tanh(x·W_n + b_in + r ⊙ (h·U_n + b_hn))
/// h' = (1 − z) ⊙ n + z ⊙ h
/// ```
#[derive(Debug, Clone)]
pub struct GruCell {
    w_ih: ParamId,
    w_hh: ParamId,
    b_ih: ParamId,
    b_hh: ParamId,
    hidden: usize,
}

impl GruCell {
    pub fn new(pb: &mut ParamBuilder, inp: usize, hidden: usize) -> Result<Self> {
        let bound = 1.0 / (hidden as f64).sqrt();
        Ok(Self {
            w_ih: pb.uniform("w_ih", &[inp, 3 * hidden], bound)?,
            w_hh: pb.uniform("w_hh", &[hidden, 3 * hidden], bound)?,
            b_ih: pb.uniform("b_ih", &[1, 3 * hidden], bound)?,
            b_hh: pb.uniform("b_hh", &[1, 3 * hidden], bound)?,
            hidden,
        })
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn step(&self, tape: &mut Tape, x: Var, h: Var) -> Result<Var> {
        let hs = self.hidden;
        let (w_ih, w_hh) = (tape.param(self.w_ih)?, tape.param(self.w_hh)?);
        let (b_ih, b_hh) = (tape.param(self.b_ih)?, tape.param(self.b_hh)?);
        let gi = tape.matmul(x, w_ih)?;
        let gi = tape.add_bias(gi, b_ih)?;
        let gh = tape.matmul(h, w_hh)?;
        let gh = tape.add_bias(gh, b_hh)?;

        let (gi_r, gh_r) = (tape.slice_cols(gi, 0, hs)?, tape.slice_cols(gh, 0, hs)?);
        let (gi_z, gh_z) = (tape.slice_cols(gi, hs, hs)?, tape.slice_cols(gh, hs, hs)?);
        let (gi_n, gh_n) = (
            tape.slice_cols(gi, 2 * hs, hs)?,
            tape.slice_cols(gh, 2 * hs, hs)?,
        );
        let r = tape.add(gi_r, gh_r)?;
        let r = tape.sigmoid(r);
        let z = tape.add(gi_z, gh_z)?;
        let z = tape.sigmoid(z);
        let rn = tape.mul(r, gh_n)?;
        let n = tape.add(gi_n, rn)?;
        let n = tape.tanh(n);
        // h' = n + z ⊙ (h − n)
        let d = tape.sub(h, n)?;
        let zd = tape.mul(z, d)?;
        Ok(tape.add(n, zd)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use diffcore::{ParamStore, Tensor};

    fn sigmoid(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    #[test]
    fn gru_matches_scalar_reference() {
        let mut store = ParamStore::new();
        let mut rng = stream(1, "test", 0);
        let cell = GruCell::new(&mut ParamBuilder::new(&mut store, &mut rng), 2, 3).unwrap();
        let x = [0.3, -0.7];
        let h = [0.1, 0.5, -0.2];

        let mut tape = diffcore::Tape::with_params(&store);
        let xv = tape.constant(Tensor::row(x.to_vec()));
        let hv = tape.constant(Tensor::row(h.to_vec()));
        let out = cell.step(&mut tape, xv, hv).unwrap();
        let got = tape.value(out).data().to_vec();

        let p = |name: &str| store.get(store.id(name).unwrap()).clone();
        let (w_ih, w_hh, b_ih, b_hh) = (p("w_ih"), p("w_hh"), p("b_ih"), p("b_hh"));
        let gate = |g: usize, j: usize| {
            let col = g * 3 + j;
            let gi: f64 = (0..2).map(|k| x[k] * w_ih.at(k, col)).sum::<f64>() + b_ih.at(0, col);
            let gh: f64 = (0..3).map(|k| h[k] * w_hh.at(k, col)).sum::<f64>() + b_hh.at(0, col);
            (gi, gh)
        };
        for j in 0..3 {
            let (ir, hr) = gate(0, j);
            let (iz, hz) = gate(1, j);
            let (inn, hn) = gate(2, j);
            let r = sigmoid(ir + hr);
            let z = sigmoid(iz + hz);
            let n = (inn + r * hn).tanh();
            let want = (1.0 - z) * n + z * h[j];
            assert!((got[j] - want).abs() < 1e-12, "{j}: {} vs {want}", got[j]);
        }
    }
}
