//! Discretization of speaker logits and message manipulation.

use diffcore::{Tape, Tensor, Var};
use rand_distr::{Distribution, Gumbel};
use serde::{Serialize, Serializer};

use crate::registry::Registry;
use crate::rng::Rng;
use crate::{Error, Result};

/// A fixed-length message over a vocabulary of `vocab_size` symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    symbols: Vec<usize>,
    vocab_size: usize,
    /// Soft sample behind a straight-through draw.
    soft: Option<Tensor>,
}

impl Message {
    pub fn new(symbols: Vec<usize>, vocab_size: usize) -> Result<Self> {
        if let Some(&s) = symbols.iter().find(|&&s| s >= vocab_size) {
            return Err(Error::OutOfRange {
                op: "message symbol",
                value: s,
                limit: vocab_size,
            });
        }
        Ok(Self {
            symbols,
            vocab_size,
            soft: None,
        })
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn soft(&self) -> Option<&Tensor> {
        self.soft.as_ref()
    }

    /// Rows `one_hot(symbol)`, `L × V`.
    pub fn one_hot(&self) -> Tensor {
        one_hot(&self.symbols, self.vocab_size)
    }
}

impl Serialize for Message {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.symbols.serialize(s)
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate().skip(1) {
        if x > row[best] {
            best = i;
        }
    }
    best
}

fn one_hot(symbols: &[usize], v: usize) -> Tensor {
    let mut data = vec![0.0; symbols.len() * v];
    for (r, &s) in symbols.iter().enumerate() {
        data[r * v + s] = 1.0;
    }
    Tensor::new(vec![symbols.len(), v], data).expect("non-empty one-hot")
}

fn row_argmax(t: &Tensor) -> Vec<usize> {
    (0..t.rows()).map(|r| argmax(t.row_slice(r))).collect()
}

fn gumbel_noise(shape: &[usize], rng: &mut Rng) -> Tensor {
    let g = Gumbel::new(0.0, 1.0).expect("unit Gumbel");
    let mut t = Tensor::zeros(shape);
    for x in t.data_mut() {
        *x = g.sample(rng);
    }
    t
}

fn check_temperature(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("temperature must be positive, got {t}")))
    }
}

fn gumbel_soft(tape: &mut Tape, logits: Var, temperature: f64, rng: &mut Rng) -> Result<Var> {
    check_temperature(temperature)?;
    let noise = gumbel_noise(tape.shape(logits), rng);
    let noise = tape.constant(noise);
    let perturbed = tape.add(logits, noise)?;
    let scaled = tape.scale(perturbed, 1.0 / temperature);
    Ok(tape.softmax_rows(scaled))
}

/// Straight-through Gumbel-Softmax on a tape. Returns the hard one-hot rows
/// (soft in the backward pass) and the sampled symbols.
pub fn gumbel_st_on_tape(
    tape: &mut Tape,
    logits: Var,
    temperature: f64,
    rng: &mut Rng,
) -> Result<(Var, Vec<usize>)> {
    let soft = gumbel_soft(tape, logits, temperature, rng)?;
    let symbols = row_argmax(tape.value(soft));
    let hard = one_hot(&symbols, tape.value(soft).cols());
    Ok((tape.straight_through(soft, hard)?, symbols))
}

/// Straight-through Gumbel-Softmax sample of an `L × V` logit matrix.
pub fn gumbel_softmax_st(logits: &Tensor, temperature: f64, rng: &mut Rng) -> Result<Message> {
    let mut tape = Tape::new();
    let l = tape.constant(logits.clone());
    let soft = gumbel_soft(&mut tape, l, temperature, rng)?;
    let soft = tape.value(soft).clone();
    Ok(Message {
        symbols: row_argmax(&soft),
        vocab_size: logits.cols(),
        soft: Some(soft),
    })
}

/// Symbol per row by argmax, lowest index on ties.
pub fn argmax_decode(logits: &Tensor) -> Message {
    Message {
        symbols: row_argmax(logits),
        vocab_size: logits.cols(),
        soft: None,
    }
}

/// Copy of `msg` with `symbols[position] = replacement`.
pub fn distort_message(msg: &Message, position: usize, replacement: usize) -> Result<Message> {
    if position >= msg.len() {
        return Err(Error::OutOfRange {
            op: "distortion position",
            value: position,
            limit: msg.len(),
        });
    }
    if replacement >= msg.vocab_size {
        return Err(Error::OutOfRange {
            op: "replacement symbol",
            value: replacement,
            limit: msg.vocab_size,
        });
    }
    let mut symbols = msg.symbols.clone();
    symbols[position] = replacement;
    Message::new(symbols, msg.vocab_size)
}

/// Turns one step of `B × V` logits into channel output and symbols.
pub trait Channel: Send + Sync + std::fmt::Debug {
    fn emit(&self, tape: &mut Tape, logits: Var, rng: &mut Rng) -> Result<(Var, Vec<usize>)>;
}

/// Training channel.
#[derive(Debug, Clone)]
pub struct GumbelStraightThrough {
    temperature: f64,
}

impl GumbelStraightThrough {
    pub fn new(temperature: f64) -> Result<Self> {
        check_temperature(temperature)?;
        Ok(Self { temperature })
    }
}

impl Channel for GumbelStraightThrough {
    fn emit(&self, tape: &mut Tape, logits: Var, rng: &mut Rng) -> Result<(Var, Vec<usize>)> {
        gumbel_st_on_tape(tape, logits, self.temperature, rng)
    }
}

/// Evaluation channel: greedy, no gradient.
#[derive(Debug, Clone, Copy)]
pub struct ArgmaxChannel;

impl Channel for ArgmaxChannel {
    fn emit(&self, tape: &mut Tape, logits: Var, _rng: &mut Rng) -> Result<(Var, Vec<usize>)> {
        let v = tape.value(logits);
        let symbols = row_argmax(v);
        let y = one_hot(&symbols, v.cols());
        Ok((tape.constant(y), symbols))
    }
}

/// Differentiable identity path: passes `softmax(logits)` through.
#[derive(Debug, Clone, Copy)]
pub struct SoftChannel;

impl Channel for SoftChannel {
    fn emit(&self, tape: &mut Tape, logits: Var, _rng: &mut Rng) -> Result<(Var, Vec<usize>)> {
        let y = tape.softmax_rows(logits);
        let symbols = row_argmax(tape.value(y));
        Ok((y, symbols))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    pub temperature: f64,
}

pub type ChannelFactory = fn(&ChannelSpec) -> Result<Box<dyn Channel>>;

pub fn builtin_channels() -> Registry<ChannelFactory> {
    Registry::<ChannelFactory>::new("channel")
        .with("gumbel-st", |s| Ok(Box::new(GumbelStraightThrough::new(s.temperature)?)))
        .with("argmax", |_| Ok(Box::new(ArgmaxChannel)))
        .with("soft", |_| Ok(Box::new(SoftChannel)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn argmax_examples() {
        let t = Tensor::from_rows(&[vec![0.1, 2.0, -1.0], vec![0.5, 0.5, 0.5]]).unwrap();
        let m = argmax_decode(&t);
        assert_eq!(m.symbols(), &[1, 0]);
        assert_eq!(argmax_decode(&t), m);
    }

    #[test]
    fn distortion() {
        let m = Message::new(vec![3, 1, 4], 10).unwrap();
        assert_eq!(distort_message(&m, 0, 7).unwrap().symbols(), &[7, 1, 4]);
        assert_eq!(distort_message(&m, 0, 3).unwrap(), m);
        let sweep: Vec<Message> = (0..10).map(|r| distort_message(&m, 0, r).unwrap()).collect();
        assert_eq!(sweep.iter().filter(|x| **x == m).count(), 1);
        assert!(distort_message(&m, 3, 0).is_err());
        assert!(distort_message(&m, 0, 10).is_err());
    }

    #[test]
    fn serializes_as_integer_array() {
        let m = Message::new(vec![2, 0, 1], 3).unwrap();
        assert_eq!(serde_json::to_string(&m).unwrap(), "[2,0,1]");
    }

    #[test]
    fn straight_through_rows_are_one_hot() {
        let mut rng = stream(3, "t", 0);
        let logits = Tensor::from_rows(&[vec![0.3, -1.0, 2.0], vec![0.0, 0.0, 0.0]]).unwrap();
        let m = gumbel_softmax_st(&logits, 1.0, &mut rng).unwrap();
        let soft = m.soft().unwrap();
        for r in 0..2 {
            assert_eq!(argmax(soft.row_slice(r)), m.symbols()[r]);
            assert!((soft.row_slice(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let hard = m.one_hot();
        assert!(hard.data().iter().all(|&x| x == 0.0 || x == 1.0));
        assert_eq!(hard.sum(), 2.0);
    }

    #[test]
    fn non_positive_temperature_is_rejected() {
        let mut rng = stream(3, "t", 0);
        let logits = Tensor::row(vec![1.0, 2.0]);
        assert!(gumbel_softmax_st(&logits, 0.0, &mut rng).is_err());
        assert!(gumbel_softmax_st(&logits, -1.0, &mut rng).is_err());
        assert!(builtin_channels().get("gumbel-st").unwrap()(&ChannelSpec { temperature: 0.0 }).is_err());
    }

    #[test]
    fn soft_sample_approaches_hard_as_temperature_falls() {
        let mut rng = stream(9, "t", 0);
        let draws = 2000;
        let mut mean_max = Vec::new();
        let mut near_hard = 0;
        for tau in [1.0, 0.3, 0.05] {
            let mut total = 0.0;
            for _ in 0..draws {
                let logits = diffcore::init::uniform(&[1, 6], 2.0, &mut rng);
                let m = gumbel_softmax_st(&logits, tau, &mut rng).unwrap();
                let max = m.soft().unwrap().data().iter().cloned().fold(0.0, f64::max);
                total += max;
                if tau == 0.05 && max > 0.99 {
                    near_hard += 1;
                }
            }
            mean_max.push(total / draws as f64);
        }
        assert!(mean_max.windows(2).all(|w| w[0] < w[1]), "{mean_max:?}");
        assert!(near_hard as f64 / draws as f64 > 0.8, "{near_hard}");
    }

    #[test]
    fn same_seed_same_sample() {
        let logits = Tensor::row(vec![0.1, 0.2, 0.3, 0.4]);
        let a = gumbel_softmax_st(&logits, 1.0, &mut stream(5, "t", 0)).unwrap();
        let b = gumbel_softmax_st(&logits, 1.0, &mut stream(5, "t", 0)).unwrap();
        assert_eq!(a, b);
    }
}
