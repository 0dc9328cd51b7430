//! Game-1 objects: one type per property, represented as a star-shaped tree,
//! a token sequence, or a bag of words.

use diffcore::Tensor;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::GraphSample;
use crate::{Error, Result};

/// Number of types per property, `[p1, ..., pn]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct PerceptualSpec {
    dims: Vec<usize>,
}

impl TryFrom<Vec<usize>> for PerceptualSpec {
    type Error = Error;

    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Self::new(dims)
    }
}

impl From<PerceptualSpec> for Vec<usize> {
    fn from(spec: PerceptualSpec) -> Self {
        spec.dims
    }
}

impl PerceptualSpec {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::config("perceptual dimensions must be non-empty"));
        }
        if let Some(&p) = dims.iter().find(|&&p| p < 2) {
            return Err(Error::config(format!(
                "every property needs at least 2 types, got {p}"
            )));
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_properties(&self) -> usize {
        self.dims.len()
    }

    /// Number of distinct objects, `∏ pᵢ`. Saturates on overflow.
    pub fn universe_size(&self) -> usize {
        self.dims
            .iter()
            .try_fold(1usize, |acc, &p| acc.checked_mul(p))
            .unwrap_or(usize::MAX)
    }

    /// Number of distinct property-value tokens, `Σ pᵢ`.
    pub fn token_count(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn max_types(&self) -> usize {
        self.dims.iter().copied().max().unwrap_or(0)
    }

    /// Width of a tree node feature row: property one-hot (`n + 1`, the last
    /// slot marks the central node) followed by a type one-hot (`max pᵢ`).
    pub fn node_feature_width(&self) -> usize {
        self.num_properties() + 1 + self.max_types()
    }

    pub fn offset(&self, property: usize) -> usize {
        self.dims[..property].iter().sum()
    }

    /// Every object in lexicographic order.
    pub fn enumerate(&self) -> Vec<PerceptualObject> {
        let mut out = Vec::with_capacity(self.universe_size());
        let mut cur = vec![0; self.dims.len()];
        loop {
            out.push(PerceptualObject {
                values: cur.clone(),
            });
            let mut i = self.dims.len();
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                cur[i] += 1;
                if cur[i] < self.dims[i] {
                    break;
                }
                cur[i] = 0;
            }
        }
    }
}

/// A chosen type for each property.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PerceptualObject {
    values: Vec<usize>,
}

impl PerceptualObject {
    pub fn new(values: Vec<usize>, spec: &PerceptualSpec) -> Result<Self> {
        let obj = Self { values };
        obj.check(spec)?;
        Ok(obj)
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    fn check(&self, spec: &PerceptualSpec) -> Result<()> {
        if self.values.len() != spec.num_properties() {
            return Err(Error::data(format!(
                "object has {} properties, spec has {}",
                self.values.len(),
                spec.num_properties()
            )));
        }
        for (i, (&v, &p)) in self.values.iter().zip(spec.dims()).enumerate() {
            if v >= p {
                return Err(Error::data(format!(
                    "property {i} value {v} outside [0, {p})"
                )));
            }
        }
        Ok(())
    }
}

/// Draws each property's type uniformly and independently.
pub fn generate_game1_object<R: Rng + ?Sized>(spec: &PerceptualSpec, rng: &mut R) -> PerceptualObject {
    PerceptualObject {
        values: spec.dims().iter().map(|&p| rng.random_range(0..p)).collect(),
    }
}

/// Star graph: property nodes `0..n` each joined to central node `n`.
pub fn object_to_tree(obj: &PerceptualObject, spec: &PerceptualSpec) -> Result<GraphSample> {
    obj.check(spec)?;
    let n = spec.num_properties();
    let width = spec.node_feature_width();
    let mut feats = vec![0.0; (n + 1) * width];
    for (i, &v) in obj.values().iter().enumerate() {
        let row = &mut feats[i * width..(i + 1) * width];
        row[i] = 1.0;
        row[n + 1 + v] = 1.0;
    }
    // Central node: role slot only, empty type part.
    feats[n * width + n] = 1.0;
    GraphSample::new(
        n + 1,
        (0..n).map(|i| (i, n)),
        Tensor::new(vec![n + 1, width], feats)?,
    )
}

/// One token per property: `offset(i) + value`.
pub fn object_to_sequence(obj: &PerceptualObject, spec: &PerceptualSpec) -> Result<Vec<usize>> {
    obj.check(spec)?;
    Ok(obj
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| spec.offset(i) + v)
        .collect())
}

/// Multi-hot vector over the `Σ pᵢ` tokens.
pub fn object_to_bow(obj: &PerceptualObject, spec: &PerceptualSpec) -> Result<Vec<f64>> {
    let mut out = vec![0.0; spec.token_count()];
    for t in object_to_sequence(obj, spec)? {
        out[t] = 1.0;
    }
    Ok(out)
}
