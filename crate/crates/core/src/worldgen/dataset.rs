//! Datasets, their generation, and the JSON-lines file format.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::GraphSample;
use super::perceptual::{
    generate_game1_object, object_to_bow, object_to_sequence, object_to_tree, PerceptualObject,
    PerceptualSpec,
};
use super::relational::{graph_to_bow, graph_to_sequence, relational_graph, RelationalSpec};
use super::repr::{Input, InputDims, ReprKind};
use super::splits::{make_ood_split, make_splits, make_splits_exact, Split};
use crate::rng::stream;
use crate::{Error, Result};

/// Draw budget per requested Game-2 graph before giving up on uniqueness.
const MAX_DRAWS_PER_GRAPH: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "game", rename_all = "lowercase")]
pub enum GameSpec {
    G1 { dims: PerceptualSpec },
    G2(RelationalSpec),
}

impl GameSpec {
    pub fn name(&self) -> &'static str {
        match self {
            GameSpec::G1 { .. } => "g1",
            GameSpec::G2(_) => "g2",
        }
    }

    pub fn input_dims(&self) -> InputDims {
        match self {
            GameSpec::G1 { dims } => InputDims {
                bow_width: dims.token_count(),
                seq_vocab: dims.token_count(),
                node_features: dims.node_feature_width(),
            },
            GameSpec::G2(spec) => InputDims {
                bow_width: spec.num_nodes,
                seq_vocab: spec.num_nodes,
                node_features: spec.num_nodes,
            },
        }
    }

    fn features_kind(&self) -> &'static str {
        match self {
            GameSpec::G1 { .. } => "g1-concat",
            GameSpec::G2(_) => "degree-onehot",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sample {
    G1(PerceptualObject),
    G2(GraphSample),
}

/// Identity of a sample: object values for Game-1, canonical edge list for
/// Game-2.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SampleKey {
    Object(Vec<usize>),
    Edges(Vec<(usize, usize)>),
}

impl Sample {
    pub fn key(&self) -> SampleKey {
        match self {
            Sample::G1(o) => SampleKey::Object(o.values().to_vec()),
            Sample::G2(g) => SampleKey::Edges(g.edges().to_vec()),
        }
    }

    /// Derives the representation `kind` of this sample.
    pub fn represent(&self, spec: &GameSpec, kind: ReprKind) -> Result<Input> {
        let dims = spec.input_dims();
        match (self, spec) {
            (Sample::G1(o), GameSpec::G1 { dims: p }) => Ok(match kind {
                ReprKind::Bow => Input::Bow(object_to_bow(o, p)?),
                ReprKind::Seq => Input::Seq {
                    tokens: object_to_sequence(o, p)?,
                    vocab: dims.seq_vocab,
                },
                ReprKind::Graph => Input::Graph(object_to_tree(o, p)?),
            }),
            (Sample::G2(g), GameSpec::G2(_)) => Ok(match kind {
                ReprKind::Bow => Input::Bow(graph_to_bow(g)),
                ReprKind::Seq => Input::Seq {
                    tokens: graph_to_sequence(g),
                    vocab: dims.seq_vocab,
                },
                ReprKind::Graph => Input::Graph(g.clone()),
            }),
            _ => Err(Error::data("sample does not belong to this game")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub id: usize,
    pub split: Split,
    pub sample: Sample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: GameSpec,
    pub items: Vec<Item>,
}

/// Lines per split in a generated dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

impl SplitSizes {
    pub fn total(&self) -> usize {
        self.train + self.valid + self.test
    }

    fn as_array(&self) -> [usize; 3] {
        [self.train, self.valid, self.test]
    }
}

impl Default for SplitSizes {
    fn default() -> Self {
        Self {
            train: 40_000,
            valid: 5_000,
            test: 5_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateOptions {
    pub spec: GameSpec,
    pub sizes: SplitSizes,
    /// Fraction of distinct samples held out as the OOD pool; 0 disables it.
    pub ood_fraction: f64,
    pub seed: u64,
}

/// Sidecar describing how a dataset file was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub options: GenerateOptions,
    pub lines: usize,
    pub distinct: [usize; 4],
}

impl Dataset {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &Item> {
        self.items.iter().filter(move |it| it.split == split)
    }

    pub fn count(&self, split: Split) -> usize {
        self.split(split).count()
    }

    /// Distinct samples per split, in first-occurrence order.
    pub fn distinct(&self, split: Split) -> Vec<&Item> {
        let mut seen = HashSet::new();
        self.split(split)
            .filter(|it| seen.insert(it.sample.key()))
            .collect()
    }

    pub fn manifest(&self, options: &GenerateOptions) -> DatasetManifest {
        DatasetManifest {
            options: options.clone(),
            lines: self.items.len(),
            distinct: Split::ALL.map(|s| self.distinct(s).len()),
        }
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(std::fs::File::create(path)?);
        for item in &self.items {
            serde_json::to_writer(&mut out, &Line::from_item(item, &self.spec))?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a JSON-lines file; features are rebuilt from the spec.
    pub fn read_jsonl(path: impl AsRef<Path>, spec: GameSpec) -> Result<Self> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut items = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line = serde_json::from_str(&line)
                .map_err(|e| Error::data(format!("line {}: {e}", n + 1)))?;
            items.push(parsed.into_item(&spec).map_err(|e| Error::data(format!("line {}: {e}", n + 1)))?);
        }
        Ok(Self { spec, items })
    }

    /// Writes `dataset.jsonl` and `manifest.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>, options: &GenerateOptions) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        self.write_jsonl(dir.join(DATASET_FILE))?;
        let manifest = serde_json::to_string_pretty(&self.manifest(options))?;
        std::fs::write(dir.join(MANIFEST_FILE), manifest + "\n")?;
        Ok(())
    }

    /// Loads a dataset directory written by [`Dataset::save`].
    pub fn load(dir: impl AsRef<Path>) -> Result<(Self, DatasetManifest)> {
        let dir = dir.as_ref();
        let manifest: DatasetManifest =
            serde_json::from_str(&std::fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
        let ds = Self::read_jsonl(dir.join(DATASET_FILE), manifest.options.spec.clone())?;
        Ok((ds, manifest))
    }
}

pub const DATASET_FILE: &str = "dataset.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize, Deserialize)]
struct Line {
    id: usize,
    game: String,
    split: Split,
    object: Option<Vec<usize>>,
    num_nodes: usize,
    edges: Vec<[usize; 2]>,
    features_kind: String,
}

impl Line {
    fn from_item(item: &Item, spec: &GameSpec) -> Self {
        let (object, graph) = match &item.sample {
            Sample::G1(o) => {
                let GameSpec::G1 { dims } = spec else {
                    unreachable!("Game-1 sample under Game-2 spec")
                };
                let tree = object_to_tree(o, dims).expect("stored objects conform");
                (Some(o.values().to_vec()), tree)
            }
            Sample::G2(g) => (None, g.clone()),
        };
        Self {
            id: item.id,
            game: spec.name().to_string(),
            split: item.split,
            object,
            num_nodes: graph.num_nodes(),
            edges: graph.edges().iter().map(|&(a, b)| [a, b]).collect(),
            features_kind: spec.features_kind().to_string(),
        }
    }

    fn into_item(self, spec: &GameSpec) -> Result<Item> {
        if self.game != spec.name() || self.features_kind != spec.features_kind() {
            return Err(Error::data(format!(
                "{}/{} does not match {}/{}",
                self.game,
                self.features_kind,
                spec.name(),
                spec.features_kind()
            )));
        }
        let edges: Vec<(usize, usize)> = self.edges.iter().map(|&[a, b]| (a.min(b), a.max(b))).collect();
        let sample = match spec {
            GameSpec::G1 { dims } => {
                let values = self.object.ok_or_else(|| Error::data("Game-1 line without object"))?;
                let obj = PerceptualObject::new(values, dims)?;
                let tree = object_to_tree(&obj, dims)?;
                if tree.num_nodes() != self.num_nodes || tree.edges() != edges.as_slice() {
                    return Err(Error::data("stored tree does not match its object"));
                }
                Sample::G1(obj)
            }
            GameSpec::G2(rel) => {
                if self.num_nodes != rel.num_nodes {
                    return Err(Error::data("node count differs from the dataset spec"));
                }
                let g = relational_graph(self.num_nodes, &edges)?;
                if g.edges() != edges.as_slice() {
                    return Err(Error::data("Game-2 graph is missing self-loops"));
                }
                Sample::G2(g)
            }
        };
        Ok(Item {
            id: self.id,
            split: self.split,
            sample,
        })
    }
}

fn game1_features(o: &PerceptualObject) -> Vec<(usize, usize)> {
    o.values().iter().copied().enumerate().collect()
}

fn game2_features(g: &GraphSample) -> Vec<usize> {
    g.degrees()
}

/// Number of distinct samples to draw so that, after holding out
/// `ood_fraction`, `total` remain in-domain.
fn candidate_target(total: usize, ood_fraction: f64) -> usize {
    if ood_fraction > 0.0 {
        (total as f64 / (1.0 - ood_fraction)).ceil() as usize
    } else {
        total
    }
}

/// Generates a labeled dataset.
///
/// Distinct samples are drawn (or, for small Game-1 universes, enumerated),
/// an OOD pool is held out with feature coverage enforced, and the remainder
/// is partitioned into train/valid/test. When a Game-1 universe has fewer
/// distinct objects than requested lines, each split is filled by repeating
/// its own objects; no object ever appears in two splits.
pub fn generate_dataset(opts: &GenerateOptions) -> Result<Dataset> {
    if !(0.0..1.0).contains(&opts.ood_fraction) {
        return Err(Error::config("ood_fraction must lie in [0, 1)"));
    }
    let total = opts.sizes.total();
    if total == 0 {
        return Err(Error::config("dataset must contain at least one sample"));
    }
    let target = candidate_target(total, opts.ood_fraction);
    let mut draw_rng = stream(opts.seed, "worldgen.draw", 0);
    let mut ood_rng = stream(opts.seed, "worldgen.ood", 0);

    let (in_domain, ood): (Vec<Sample>, Vec<Sample>) = match &opts.spec {
        GameSpec::G1 { dims } => {
            let universe = dims.universe_size();
            let objects = if universe <= target.saturating_mul(2) {
                let mut all = dims.enumerate();
                if universe > target {
                    all.shuffle(&mut draw_rng);
                    all.truncate(target);
                }
                all
            } else {
                let mut seen = HashSet::new();
                let mut out = Vec::with_capacity(target);
                while out.len() < target {
                    let o = generate_game1_object(dims, &mut draw_rng);
                    if seen.insert(o.clone()) {
                        out.push(o);
                    }
                }
                out
            };
            let (a, b) = if opts.ood_fraction > 0.0 {
                make_ood_split(objects, opts.ood_fraction, &mut ood_rng, game1_features)?
            } else {
                (objects, Vec::new())
            };
            (
                a.into_iter().map(Sample::G1).collect(),
                b.into_iter().map(Sample::G1).collect(),
            )
        }
        GameSpec::G2(rel) => {
            rel.validate()?;
            let mut seen = HashSet::new();
            let mut graphs = Vec::with_capacity(target);
            let mut draws = 0;
            while graphs.len() < target {
                if draws >= target * MAX_DRAWS_PER_GRAPH {
                    return Err(Error::SplitTooSmall(format!(
                        "only {} distinct graphs after {draws} draws",
                        graphs.len()
                    )));
                }
                draws += 1;
                let g = rel.sample(&mut draw_rng)?;
                if seen.insert(g.edges().to_vec()) {
                    graphs.push(g);
                }
            }
            let (a, b) = if opts.ood_fraction > 0.0 {
                make_ood_split(graphs, opts.ood_fraction, &mut ood_rng, game2_features)?
            } else {
                (graphs, Vec::new())
            };
            (
                a.into_iter().map(Sample::G2).collect(),
                b.into_iter().map(Sample::G2).collect(),
            )
        }
    };

    let sizes = opts.sizes.as_array();
    let mut split_rng = stream(opts.seed, "worldgen.splits", 0);
    let parts = if in_domain.len() >= total {
        make_splits_exact(in_domain, &sizes, &mut split_rng)?
    } else {
        let fractions: Vec<f64> = sizes.iter().map(|&s| s as f64 / total as f64).collect();
        make_splits(in_domain, &fractions, &mut split_rng)?
    };

    let mut fill_rng = stream(opts.seed, "worldgen.fill", 0);
    let mut items = Vec::with_capacity(total + ood.len());
    for ((split, part), &want) in [Split::Train, Split::Valid, Split::Test]
        .into_iter()
        .zip(parts)
        .zip(&sizes)
    {
        if want > 0 && part.is_empty() {
            return Err(Error::SplitTooSmall(format!(
                "{split} split requested {want} samples but received no distinct objects"
            )));
        }
        for k in 0..want {
            let sample = if k < part.len() {
                part[k].clone()
            } else {
                part[fill_rng.random_range(0..part.len())].clone()
            };
            items.push(Item {
                id: items.len(),
                split,
                sample,
            });
        }
    }
    for sample in ood {
        items.push(Item {
            id: items.len(),
            split: Split::Ood,
            sample,
        });
    }
    Ok(Dataset {
        spec: opts.spec.clone(),
        items,
    })
}
