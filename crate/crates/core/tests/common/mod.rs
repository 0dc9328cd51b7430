//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

/// Edit distance by the recursive definition, without memoization.
pub fn levenshtein_oracle(a: &[usize], b: &[usize]) -> usize {
    match (a.split_first(), b.split_first()) {
        (None, _) => b.len(),
        (_, None) => a.len(),
        (Some((x, ra)), Some((y, rb))) => {
            let sub = levenshtein_oracle(ra, rb) + usize::from(x != y);
            let del = levenshtein_oracle(ra, b) + 1;
            let ins = levenshtein_oracle(a, rb) + 1;
            sub.min(del).min(ins)
        }
    }
}

pub fn cosine_oracle(u: &[f64], v: &[f64]) -> f64 {
    let norm = |w: &[f64]| w.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        0.0
    } else {
        u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / nu / nv
    }
}

/// Rank of each value as (count below) + (count equal + 1) / 2.
pub fn ranks_oracle(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let below = xs.iter().filter(|&&y| y < x).count() as f64;
            let equal = xs.iter().filter(|&&y| y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Pearson by the raw-moment formula.
pub fn pearson_oracle(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let syy: f64 = ys.iter().map(|y| y * y).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let vx = n * sxx - sx * sx;
    let vy = n * syy - sy * sy;
    if vx <= 1e-12 || vy <= 1e-12 {
        return None;
    }
    Some((n * sxy - sx * sy) / (vx.sqrt() * vy.sqrt()))
}

pub fn spearman_oracle(xs: &[f64], ys: &[f64]) -> Option<f64> {
    pearson_oracle(&ranks_oracle(xs), &ranks_oracle(ys))
}

/// Topographic similarity over every pair.
pub fn toposim_oracle(inputs: &[Vec<f64>], messages: &[Vec<usize>]) -> Option<f64> {
    let mut sims = Vec::new();
    let mut dists = Vec::new();
    for i in 0..inputs.len() {
        for j in i + 1..inputs.len() {
            // Similarities within 1e-12 are the same similarity.
            let c = cosine_oracle(&inputs[i], &inputs[j]);
            sims.push(format!("{c:.12}").parse::<f64>().unwrap());
            dists.push(levenshtein_oracle(&messages[i], &messages[j]) as f64);
        }
    }
    spearman_oracle(&sims, &dists).map(|r| -r)
}
