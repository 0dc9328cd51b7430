//! Train/valid/test partitions and out-of-domain holdouts.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Retry budget for drawing a holdout whose features are all seen in-domain.
pub const MAX_OOD_ATTEMPTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
    Ood,
}

impl Split {
    pub const ALL: [Split; 4] = [Split::Train, Split::Valid, Split::Test, Split::Ood];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
            Split::Ood => "ood",
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            "ood" => Ok(Split::Ood),
            other => Err(Error::config(format!("unknown split {other:?}"))),
        }
    }
}

/// Item counts for `fractions` of `n`, rounded by largest remainder so the
/// counts sum to `n` exactly.
pub fn split_counts(n: usize, fractions: &[f64]) -> Result<Vec<usize>> {
    if fractions.is_empty() || fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(Error::config("split fractions must lie in [0, 1]"));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!("split fractions sum to {total}, not 1")));
    }
    let exact: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| (x + 1e-9).floor() as usize).collect();
    let mut left = n.saturating_sub(counts.iter().sum());
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - counts[a] as f64;
        let rb = exact[b] - counts[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if fractions[i] > 0.0 {
            counts[i] += 1;
            left -= 1;
        }
    }
    Ok(counts)
}

/// Random disjoint partition by fractions.
pub fn make_splits<T, R: Rng + ?Sized>(items: Vec<T>, fractions: &[f64], rng: &mut R) -> Result<Vec<Vec<T>>> {
    let counts = split_counts(items.len(), fractions)?;
    make_splits_exact(items, &counts, rng)
}

/// Random disjoint partition with exact part sizes; items beyond the
/// requested total are dropped.
pub fn make_splits_exact<T, R: Rng + ?Sized>(
    mut items: Vec<T>,
    counts: &[usize],
    rng: &mut R,
) -> Result<Vec<Vec<T>>> {
    let need: usize = counts.iter().sum();
    if need > items.len() {
        return Err(Error::SplitTooSmall(format!(
            "requested {need} distinct items but only {} exist",
            items.len()
        )));
    }
    items.shuffle(rng);
    let mut rest = items.into_iter();
    Ok(counts
        .iter()
        .map(|&c| rest.by_ref().take(c).collect())
        .collect())
}

/// Features present in `ood` but absent from every in-domain item.
pub fn unseen_features<T, K: Ord>(in_domain: &[T], ood: &[T], features: impl Fn(&T) -> Vec<K>) -> Vec<K> {
    let seen: BTreeSet<K> = in_domain.iter().flat_map(&features).collect();
    let mut missing: BTreeSet<K> = BTreeSet::new();
    for item in ood {
        for f in features(item) {
            if !seen.contains(&f) {
                missing.insert(f);
            }
        }
    }
    missing.into_iter().collect()
}

/// Holds out a random `fraction` of `items` (at least one) such that every
/// feature of a held-out item also occurs in some remaining item. Resamples
/// up to [`MAX_OOD_ATTEMPTS`] times.
pub fn make_ood_split<T, K, R>(
    items: Vec<T>,
    fraction: f64,
    rng: &mut R,
    features: impl Fn(&T) -> Vec<K>,
) -> Result<(Vec<T>, Vec<T>)>
where
    T: Clone,
    K: Ord + std::fmt::Debug,
    R: Rng + ?Sized,
{
    if !(0.0..1.0).contains(&fraction) || fraction == 0.0 {
        return Err(Error::config(format!("OOD fraction {fraction} outside (0, 1)")));
    }
    let n_hold = ((items.len() as f64 * fraction).round() as usize).max(1);
    if n_hold >= items.len() {
        return Err(Error::SplitTooSmall(format!(
            "cannot hold out {n_hold} of {} items",
            items.len()
        )));
    }
    let mut last = String::new();
    for _ in 0..MAX_OOD_ATTEMPTS {
        let mut shuffled = items.clone();
        shuffled.shuffle(rng);
        let in_domain = shuffled.split_off(n_hold);
        let ood = shuffled;
        let missing = unseen_features(&in_domain, &ood, &features);
        if missing.is_empty() {
            return Ok((in_domain, ood));
        }
        last = format!("held-out features never seen in-domain: {missing:?}");
    }
    Err(Error::Coverage {
        attempts: MAX_OOD_ATTEMPTS,
        reason: last,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn counts_for_480_items() {
        assert_eq!(split_counts(480, &[0.6, 0.2, 0.2]).unwrap(), vec![288, 96, 96]);
        assert_eq!(split_counts(10, &[1.0, 0.0, 0.0]).unwrap(), vec![10, 0, 0]);
        assert_eq!(split_counts(7, &[0.5, 0.5]).unwrap().iter().sum::<usize>(), 7);
        assert!(split_counts(10, &[0.5, 0.4]).is_err());
    }

    #[test]
    fn partition_is_disjoint_and_complete() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let parts = make_splits((0..480).collect(), &[0.6, 0.2, 0.2], &mut rng).unwrap();
        let sizes: Vec<_> = parts.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![288, 96, 96]);
        let all: BTreeSet<_> = parts.iter().flatten().copied().collect();
        assert_eq!(all.len(), 480);
    }

    #[test]
    fn same_seed_same_partition() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            make_splits((0..100).collect::<Vec<_>>(), &[0.6, 0.2, 0.2], &mut rng).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn oversized_request_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(matches!(
            make_splits_exact((0..5).collect::<Vec<_>>(), &[4, 2], &mut rng),
            Err(Error::SplitTooSmall(_))
        ));
    }

    fn pairs(v: &(usize, usize)) -> Vec<(usize, usize)> {
        vec![(0, v.0), (1, v.1)]
    }

    #[test]
    fn explicit_holdout_keeps_coverage() {
        // Brute force over the 3x3 grid minus {(0,0), (1,1)}.
        let all: Vec<(usize, usize)> = (0..3).flat_map(|a| (0..3).map(move |b| (a, b))).collect();
        let held = [(0, 0), (1, 1)];
        let rest: Vec<_> = all.iter().copied().filter(|x| !held.contains(x)).collect();
        assert_eq!(rest.len(), 7);
        for prop in 0..2 {
            for v in 0..3 {
                assert!(rest.iter().any(|x| pairs(x).contains(&(prop, v))));
            }
        }
        assert!(unseen_features(&rest, &held, pairs).is_empty());
    }

    #[test]
    fn impossible_holdout_reports_coverage_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let items = vec![0usize, 1];
        let err = make_ood_split(items, 0.3, &mut rng, |&v| vec![v]).unwrap_err();
        assert!(matches!(err, Error::Coverage { .. }));
    }

    #[test]
    fn random_holdout_is_covered_and_disjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let all: Vec<(usize, usize)> = (0..5).flat_map(|a| (0..5).map(move |b| (a, b))).collect();
        let (ind, ood) = make_ood_split(all, 0.2, &mut rng, pairs).unwrap();
        assert_eq!(ood.len(), 5);
        assert!(ood.iter().all(|x| !ind.contains(x)));
        assert!(unseen_features(&ind, &ood, pairs).is_empty());
    }
}
