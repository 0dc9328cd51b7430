use std::collections::HashMap;

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::rng::Rng;
use crate::worldgen::{Dataset, Input, ReprKind, Split};
use crate::{Error, Result};

/// Distinct items of one split, with inputs derived for one representation.
#[derive(Debug, Clone)]
pub struct Pool {
    pub split: Split,
    pub repr: ReprKind,
    pub ids: Vec<usize>,
    pub inputs: Vec<Input>,
}

impl Pool {
    pub fn new(dataset: &Dataset, split: Split, repr: ReprKind) -> Result<Self> {
        let items = dataset.distinct(split);
        let mut ids = Vec::with_capacity(items.len());
        let mut inputs = Vec::with_capacity(items.len());
        for it in items {
            ids.push(it.id);
            inputs.push(it.sample.represent(&dataset.spec, repr)?);
        }
        Ok(Self {
            split,
            repr,
            ids,
            inputs,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self) -> HashMap<usize, usize> {
        self.ids.iter().enumerate().map(|(i, &id)| (id, i)).collect()
    }
}

/// A target plus `K` distractors, as pool indices in presentation order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Episode {
    pub candidates: Vec<usize>,
    pub target_index: usize,
}

impl Episode {
    pub fn target(&self) -> usize {
        self.candidates[self.target_index]
    }

    pub fn num_distractors(&self) -> usize {
        self.candidates.len() - 1
    }
}

/// Draws `K + 1` distinct pool items uniformly, shuffles them, and marks the
/// first drawn as the target.
pub fn assemble_episode(pool_len: usize, distractors: usize, rng: &mut Rng) -> Result<Episode> {
    if pool_len <= distractors {
        return Err(Error::SplitTooSmall(format!(
            "{pool_len} distinct items cannot supply a target and {distractors} distractors"
        )));
    }
    let drawn = index::sample(rng, pool_len, distractors + 1).into_vec();
    let target = drawn[0];
    let mut candidates = drawn;
    candidates.shuffle(rng);
    let target_index = candidates
        .iter()
        .position(|&c| c == target)
        .expect("target among candidates");
    Ok(Episode {
        candidates,
        target_index,
    })
}
