mod common;

use common::*;
use graphref::metrics::{cosine_similarity, levenshtein, spearman, topographic_similarity, PairBudget};
use graphref::rng::stream;
use proptest::prelude::*;

fn seq() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0usize..4, 0..6)
}

proptest! {
    #[test]
    fn levenshtein_matches_recursive_definition(a in seq(), b in seq()) {
        prop_assert_eq!(levenshtein(&a, &b), levenshtein_oracle(&a, &b));
    }

    #[test]
    fn levenshtein_is_a_metric(a in seq(), b in seq(), c in seq()) {
        prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
        prop_assert_eq!(levenshtein(&a, &b) == 0, a == b);
        prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
    }

    #[test]
    fn cosine_matches_oracle(u in prop::collection::vec(-3.0f64..3.0, 1..6), k in 0usize..6) {
        let v: Vec<f64> = u.iter().enumerate().map(|(i, x)| x * (i + k) as f64 - 1.0).collect();
        let got = cosine_similarity(&u, &v).unwrap();
        prop_assert!((got - cosine_oracle(&u, &v)).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&got));
    }

    #[test]
    fn spearman_is_rank_invariant(
        xs in prop::collection::vec(-5i32..5, 3..12),
        ys in prop::collection::vec(-5i32..5, 3..12),
    ) {
        let n = xs.len().min(ys.len());
        let xs: Vec<f64> = xs[..n].iter().map(|&x| x as f64).collect();
        let ys: Vec<f64> = ys[..n].iter().map(|&y| y as f64).collect();
        let f: Vec<f64> = xs.iter().map(|x| x.powi(3) + 2.0 * x).collect();
        match (spearman(&xs, &ys), spearman(&f, &ys)) {
            (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-12),
            (Err(_), Err(_)) => {}
            other => prop_assert!(false, "{other:?}"),
        }
    }

    #[test]
    fn toposim_ignores_symbol_relabeling(seed in 0u64..1000) {
        let mut rng = stream(seed, "prop", 0);
        use rand::Rng;
        let inputs: Vec<Vec<f64>> = (0..8).map(|_| (0..4).map(|_| rng.random_range(0..3) as f64).collect()).collect();
        let messages: Vec<Vec<usize>> = (0..8).map(|_| (0..3).map(|_| rng.random_range(0..4)).collect()).collect();
        let relabel = [2usize, 3, 0, 1];
        let renamed: Vec<Vec<usize>> = messages.iter().map(|m| m.iter().map(|&s| relabel[s]).collect()).collect();
        let a = topographic_similarity(&inputs, &messages, PairBudget::Full, &mut rng);
        let b = topographic_similarity(&inputs, &renamed, PairBudget::Full, &mut rng);
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a.toposim, b.toposim),
            (Err(_), Err(_)) => {}
            other => prop_assert!(false, "{other:?}"),
        }
    }
}

#[test]
fn spearman_with_ties_matches_oracle() {
    let xs = [1.0, 2.0, 2.0, 4.0];
    let ys = [1.0, 3.0, 2.0, 4.0];
    let got = spearman(&xs, &ys).unwrap();
    assert!((got - spearman_oracle(&xs, &ys).unwrap()).abs() < 1e-12);
}

#[test]
fn strictly_increasing_distance_gives_toposim_one() {
    // Golomb ruler marks: all pairwise gaps differ. Inputs sit on a circle at
    // angle 0.1 * mark and messages have length mark, so cosine similarity
    // falls exactly as edit distance grows.
    let marks = [0usize, 1, 3, 7, 12];
    let inputs: Vec<Vec<f64>> = marks
        .iter()
        .map(|&m| {
            let t = 0.1 * m as f64;
            vec![t.cos(), t.sin()]
        })
        .collect();
    let messages: Vec<Vec<usize>> = marks.iter().map(|&m| vec![0; m]).collect();
    let r = topographic_similarity(&inputs, &messages, PairBudget::Full, &mut stream(0, "t", 0)).unwrap();
    assert_eq!(r.num_pairs, 10);
    assert!((r.toposim - 1.0).abs() < 1e-12, "{}", r.toposim);
    let oracle = toposim_oracle(&inputs, &messages).unwrap();
    assert!((r.toposim - oracle).abs() < 1e-12);
}
