//! Central finite-difference checks for every tape operation.

use std::sync::Arc;

use diffcore::{Aggregation, Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-3;
const TOL: f64 = 1e-4;

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    random_avoiding(shape, rng, &[])
}

/// Uniform in [-2, 2], staying at least 1e-2 away from each kink.
fn random_avoiding(shape: &[usize], rng: &mut ChaCha8Rng, kinks: &[f64]) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| loop {
            let x: f64 = rng.random_range(-2.0..2.0);
            if kinks.iter().all(|k| (x - k).abs() >= 1e-2) {
                break x;
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

fn positive(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(0.2..2.0)).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// Reduces `out` to a scalar through a fixed random weighting so that every
/// output entry is probed.
fn probe(tape: &mut Tape, out: Var, seed: u64) -> Var {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = tape.shape(out).to_vec();
    let w = tape.constant(random(&shape, &mut rng));
    let p = tape.mul(out, w).unwrap();
    tape.sum_all(p)
}

fn eval(inputs: &[Tensor], f: &dyn Fn(&mut Tape, &[Var]) -> Var) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
    let out = f(&mut tape, &vars);
    tape.value(out).data()[0]
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Compares tape gradients of a scalar function with central differences.
fn check(name: &str, inputs: Vec<Tensor>, f: &dyn Fn(&mut Tape, &[Var]) -> Var) {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = f(&mut tape, &vars);
    let grads = tape.backward(out).unwrap();

    for (k, input) in inputs.iter().enumerate() {
        let analytic = grads
            .get(vars[k])
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(input.shape()));
        let mut numeric = vec![0.0; input.len()];
        for i in 0..input.len() {
            let mut plus = inputs.clone();
            plus[k].data_mut()[i] += STEP;
            let mut minus = inputs.clone();
            minus[k].data_mut()[i] -= STEP;
            numeric[i] = (eval(&plus, f) - eval(&minus, f)) / (2.0 * STEP);
        }
        let err = rel_err(analytic.data(), &numeric);
        assert!(err < TOL, "{name}: input {k} relative error {err:e}");
    }
}

#[test]
fn matmul_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..5 {
        let a = random(&[3, 2], &mut rng);
        let b = random(&[2, 4], &mut rng);
        check("matmul/sum", vec![a.clone(), b.clone()], &|t, v| {
            let m = t.matmul(v[0], v[1]).unwrap();
            t.sum_all(m)
        });
        check("matmul/probe", vec![a, b], &|t, v| {
            let m = t.matmul(v[0], v[1]).unwrap();
            probe(t, m, 7)
        });
    }
}

#[test]
fn elementwise_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = random(&[3, 4], &mut rng);
    let b = random(&[3, 4], &mut rng);
    let bias = random(&[1, 4], &mut rng);

    check("add", vec![a.clone(), b.clone()], &|t, v| {
        let o = t.add(v[0], v[1]).unwrap();
        probe(t, o, 1)
    });
    check("sub", vec![a.clone(), b.clone()], &|t, v| {
        let o = t.sub(v[0], v[1]).unwrap();
        probe(t, o, 2)
    });
    check("mul", vec![a.clone(), b.clone()], &|t, v| {
        let o = t.mul(v[0], v[1]).unwrap();
        probe(t, o, 3)
    });
    check("add_bias", vec![a.clone(), bias], &|t, v| {
        let o = t.add_bias(v[0], v[1]).unwrap();
        probe(t, o, 4)
    });
    check("affine", vec![a.clone()], &|t, v| {
        let o = t.affine(v[0], -1.5, 0.25);
        probe(t, o, 5)
    });
    check("sigmoid", vec![a.clone()], &|t, v| {
        let o = t.sigmoid(v[0]);
        probe(t, o, 6)
    });
    check("tanh", vec![a.clone()], &|t, v| {
        let o = t.tanh(v[0]);
        probe(t, o, 7)
    });
    check("exp", vec![a.clone()], &|t, v| {
        let o = t.exp(v[0]);
        probe(t, o, 8)
    });
    check("log", vec![positive(&[3, 4], &mut rng)], &|t, v| {
        let o = t.log(v[0]);
        probe(t, o, 9)
    });
    check("transpose", vec![a], &|t, v| {
        let o = t.transpose(v[0]);
        probe(t, o, 10)
    });
}

#[test]
fn relu_gradient_away_from_kink() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for s in 0..5 {
        let x = random_avoiding(&[4, 5], &mut rng, &[0.0]);
        check("relu", vec![x], &|t, v| {
            let o = t.relu(v[0]);
            probe(t, o, s)
        });
    }
}

#[test]
fn softmax_jacobian() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for s in 0..5 {
        let x = random(&[3, 6], &mut rng);
        check("softmax_rows", vec![x], &|t, v| {
            let o = t.softmax_rows(v[0]);
            probe(t, o, s)
        });
    }
}

#[test]
fn softmax_rows_are_distributions() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut tape = Tape::new();
    let x = tape.constant(random(&[50, 7], &mut rng));
    let y = tape.softmax_rows(x);
    for r in 0..50 {
        let row = tape.value(y).row_slice(r);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(row.iter().all(|&p| p > 0.0 && p < 1.0));
    }
}

#[test]
fn cross_entropy_through_softmax_is_probs_minus_onehot() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for target in 0..5 {
        let logits = random(&[1, 5], &mut rng);
        check("softmax+cross_entropy", vec![logits.clone()], &|t, v| {
            let p = t.softmax_rows(v[0]);
            t.cross_entropy(p, target).unwrap()
        });

        let mut tape = Tape::new();
        let l = tape.leaf(logits.clone());
        let p = tape.softmax_rows(l);
        let loss = tape.cross_entropy(p, target).unwrap();
        let g = tape.backward(loss).unwrap();
        let probs = tape.value(p).data().to_vec();
        for (i, (&gi, &pi)) in g.get(l).unwrap().data().iter().zip(&probs).enumerate() {
            let expected = pi - if i == target { 1.0 } else { 0.0 };
            assert!((gi - expected).abs() < 1e-9);
        }
    }
}

#[test]
fn shape_op_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a = random(&[3, 2], &mut rng);
    let b = random(&[3, 4], &mut rng);
    let c = random(&[2, 4], &mut rng);

    check("concat_cols", vec![a.clone(), b.clone()], &|t, v| {
        let o = t.concat_cols(&[v[0], v[1], v[0]]).unwrap();
        probe(t, o, 1)
    });
    check("concat_rows", vec![b.clone(), c.clone()], &|t, v| {
        let o = t.concat_rows(&[v[0], v[1]]).unwrap();
        probe(t, o, 2)
    });
    check("slice_cols", vec![b.clone()], &|t, v| {
        let o = t.slice_cols(v[0], 1, 2).unwrap();
        probe(t, o, 3)
    });
    check("slice_rows", vec![b.clone()], &|t, v| {
        let o = t.slice_rows(v[0], 1, 2).unwrap();
        probe(t, o, 4)
    });
    check("gather_rows", vec![b.clone()], &|t, v| {
        let o = t.gather_rows(v[0], &[2, 0, 2, 1]).unwrap();
        probe(t, o, 5)
    });
    check("sum_rows", vec![b.clone()], &|t, v| {
        let o = t.sum_rows(v[0]);
        probe(t, o, 6)
    });
    check("mean_rows", vec![b.clone()], &|t, v| {
        let o = t.mean_rows(v[0]);
        probe(t, o, 7)
    });
    check("sum_cols", vec![b.clone()], &|t, v| {
        let o = t.sum_cols(v[0]);
        probe(t, o, 8)
    });
    check("reshape", vec![b.clone()], &|t, v| {
        let o = t.reshape(v[0], &[4, 3]).unwrap();
        probe(t, o, 9)
    });
    let agg = Arc::new(Aggregation {
        rows: vec![vec![(0, 1.0), (2, 1.0)], vec![], vec![(1, 0.5), (2, 0.5), (1, 2.0)]],
    });
    check("aggregate", vec![b.clone()], &|t, v| {
        let o = t.aggregate(v[0], &agg).unwrap();
        probe(t, o, 10)
    });
    check("mean_all", vec![b], &|t, v| t.mean_all(v[0]));
}

#[test]
fn max_gradients_with_separated_entries() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    // Distinct entries spaced well beyond the finite-difference step.
    let mut vals: Vec<f64> = (0..12).map(|i| -2.0 + 0.3 * i as f64).collect();
    for i in (1..vals.len()).rev() {
        let j = rng.random_range(0..=i);
        vals.swap(i, j);
    }
    let x = Tensor::new(vec![4, 3], vals).unwrap();
    check("max_rows", vec![x.clone()], &|t, v| {
        let o = t.max_rows(v[0]);
        probe(t, o, 1)
    });
    check("segment_max", vec![x], &|t, v| {
        let o = t
            .segment_max(v[0], &[vec![0, 1], vec![1, 2, 3], vec![], vec![3]])
            .unwrap();
        probe(t, o, 2)
    });
}

#[test]
fn composite_gru_like_expression() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = random(&[1, 3], &mut rng);
    let h = random(&[1, 4], &mut rng);
    let w = random(&[3, 8], &mut rng);
    let u = random(&[4, 8], &mut rng);
    check("gate", vec![x, h, w, u], &|t, v| {
        let xw = t.matmul(v[0], v[2]).unwrap();
        let hu = t.matmul(v[1], v[3]).unwrap();
        let s = t.add(xw, hu).unwrap();
        let z = t.slice_cols(s, 0, 4).unwrap();
        let z = t.sigmoid(z);
        let n = t.slice_cols(s, 4, 4).unwrap();
        let n = t.tanh(n);
        let one_minus = t.affine(z, -1.0, 1.0);
        let a = t.mul(one_minus, n).unwrap();
        let b = t.mul(z, v[1]).unwrap();
        let out = t.add(a, b).unwrap();
        probe(t, out, 3)
    });
}

#[test]
fn backward_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let a = random(&[5, 5], &mut rng);
    let b = random(&[5, 3], &mut rng);
    let run = || {
        let mut tape = Tape::new();
        let va = tape.leaf(a.clone());
        let vb = tape.leaf(b.clone());
        let m = tape.matmul(va, vb).unwrap();
        let s = tape.softmax_rows(m);
        let l = tape.cross_entropy(s, 1).unwrap();
        let g = tape.backward(l).unwrap();
        (g.get(va).unwrap().clone(), g.get(vb).unwrap().clone())
    };
    let (a1, b1) = run();
    let (a2, b2) = run();
    let bits = |t: &Tensor| t.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a1), bits(&a2));
    assert_eq!(bits(&b1), bits(&b2));
}
