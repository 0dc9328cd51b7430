//! Game-1 and Game-2 worlds, their representations, and dataset splits.

mod dataset;
mod graph;
mod perceptual;
mod relational;
mod repr;
mod splits;

pub use dataset::{
    generate_dataset, Dataset, DatasetManifest, GameSpec, GenerateOptions, Item, Sample, SampleKey,
    SplitSizes, DATASET_FILE, MANIFEST_FILE,
};
pub use graph::GraphSample;
pub use perceptual::{
    generate_game1_object, object_to_bow, object_to_sequence, object_to_tree, PerceptualObject,
    PerceptualSpec,
};
pub use relational::{
    degree_features, generate_game2_graph, graph_to_bow, graph_to_sequence, relational_graph,
    RelationalSpec,
};
pub use repr::{Input, InputDims, ReprKind};
pub use splits::{
    make_ood_split, make_splits, make_splits_exact, split_counts, unseen_features, Split,
    MAX_OOD_ATTEMPTS,
};
