use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{DiffError, Result, Tensor};

const MAGIC: &[u8; 8] = b"DIFFCKP1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// One manifest line of a checkpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

/// Named trainable tensors in registration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(DiffError::DuplicateParam(name));
        }
        let id = ParamId(self.tensors.len());
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.tensors.push(value);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.names
            .iter()
            .zip(&self.tensors)
            .enumerate()
            .map(|(i, (n, t))| (ParamId(i), n.as_str(), t))
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn manifest(&self) -> Vec<ManifestEntry> {
        self.iter()
            .map(|(_, name, t)| ManifestEntry {
                name: name.to_string(),
                shape: t.shape().to_vec(),
            })
            .collect()
    }

    /// Serializes to the checkpoint layout: magic, manifest length (u64 LE),
    /// manifest JSON, then every value as an f64 LE in manifest order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let manifest = serde_json::to_vec(&self.manifest()).expect("manifest serializes");
        let mut out = Vec::with_capacity(16 + manifest.len() + self.numel() * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
        out.extend_from_slice(&manifest);
        for t in &self.tensors {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| DiffError::Checkpoint(msg.to_string());
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("missing magic header"));
        }
        let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = bytes.get(16..16 + len).ok_or_else(|| bad("truncated manifest"))?;
        let manifest: Vec<ManifestEntry> =
            serde_json::from_slice(body).map_err(|e| DiffError::Checkpoint(e.to_string()))?;
        let mut values = bytes[16 + len..].chunks_exact(8);
        if values.remainder().len() != 0 {
            return Err(bad("trailing bytes"));
        }
        let mut store = ParamStore::new();
        for entry in manifest {
            let n: usize = entry.shape.iter().product();
            let data: Vec<f64> = values
                .by_ref()
                .take(n)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            if data.len() != n {
                return Err(bad("truncated values"));
            }
            store.add(entry.name, Tensor::new(entry.shape, data)?)?;
        }
        if values.next().is_some() {
            return Err(bad("more values than the manifest declares"));
        }
        Ok(store)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    /// Copies values from `other`, which must have an identical manifest.
    pub fn copy_from(&mut self, other: &ParamStore) -> Result<()> {
        if self.manifest() != other.manifest() {
            return Err(DiffError::Checkpoint(
                "manifest does not match the model layout".into(),
            ));
        }
        self.tensors.clone_from(&other.tensors);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ParamStore {
        let mut s = ParamStore::new();
        s.add("a.w", Tensor::new(vec![2, 2], vec![1.0, -2.0, 3.5, 0.0]).unwrap())
            .unwrap();
        s.add("b", Tensor::row(vec![f64::MIN_POSITIVE, 7.25])).unwrap();
        s
    }

    #[test]
    fn bytes_round_trip() {
        let s = sample();
        let back = ParamStore::from_bytes(&s.to_bytes()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn values_follow_manifest_as_le_f64() {
        let bytes = sample().to_bytes();
        let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let first = f64::from_le_bytes(bytes[16 + len..24 + len].try_into().unwrap());
        assert_eq!(first, 1.0);
        assert_eq!(bytes.len(), 16 + len + 6 * 8);
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut s = sample();
        assert!(matches!(
            s.add("b", Tensor::scalar(0.0)),
            Err(DiffError::DuplicateParam(_))
        ));
    }

    #[test]
    fn truncated_checkpoint_rejected() {
        let bytes = sample().to_bytes();
        assert!(ParamStore::from_bytes(&bytes[..bytes.len() - 8]).is_err());
        assert!(ParamStore::from_bytes(b"garbage").is_err());
    }

    #[test]
    fn save_and_load_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.bin");
        sample().save(&path).unwrap();
        assert_eq!(ParamStore::load(&path).unwrap(), sample());
    }
}
