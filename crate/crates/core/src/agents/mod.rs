//! Speaker and listener agents built from interchangeable encoders, graph
//! layers and pooling strategies.

mod blocks;
mod builder;
mod config;
mod encoders;
mod graph;
mod listener;
mod speaker;

use diffcore::ParamStore;

pub use blocks::{GruCell, Linear};
pub use builder::ParamBuilder;
pub use config::AgentConfig;
pub use encoders::{
    builtin_encoders, BowEncoder, Encoder, EncoderFactory, EncoderSpec, GraphEncoder, SeqEncoder,
};
pub use graph::{
    builtin_layers, builtin_pooling, GcnLayer, GraphBatch, GraphLayer, LayerFactory, MaxPooling,
    MeanPooling, Pooling, PoolingFactory, SageAggregator, SageLayer, SumPooling,
};
pub use listener::Listener;
pub use speaker::{Speaker, Utterance};

use crate::registry::Registry;
use crate::rng::stream;
use crate::worldgen::InputDims;
use crate::{Error, Result};

/// The strategy tables agents are assembled from.
#[derive(Debug, Clone)]
pub struct AgentRegistry {
    pub encoders: Registry<EncoderFactory>,
    pub layers: Registry<LayerFactory>,
    pub pooling: Registry<PoolingFactory>,
}

impl Default for AgentRegistry {
    fn default() -> Self {
        Self {
            encoders: builtin_encoders(),
            layers: builtin_layers(),
            pooling: builtin_pooling(),
        }
    }
}

impl AgentRegistry {
    /// Checks every name `config` refers to.
    pub fn check(&self, config: &AgentConfig) -> Result<()> {
        config.validate()?;
        self.encoders.get(config.repr.as_str())?;
        if !matches!(config.graph_layer.as_str(), "gcn" | "sage") {
            return Err(Error::config(format!(
                "graph_layer must be gcn or sage, got {:?}",
                config.graph_layer
            )));
        }
        self.layers.get(&config.layer_key())?;
        self.pooling.get(&config.pooling)?;
        Ok(())
    }
}

/// A speaker/listener pair; parameters live in a separate [`ParamStore`].
#[derive(Debug)]
pub struct Agents {
    pub config: AgentConfig,
    pub dims: InputDims,
    pub speaker: Speaker,
    pub listener: Listener,
}

impl Agents {
    /// Builds agents with freshly initialized parameters drawn from `seed`.
    pub fn build(config: &AgentConfig, dims: InputDims, seed: u64) -> Result<(Self, ParamStore)> {
        Self::build_with(&AgentRegistry::default(), config, dims, seed)
    }

    pub fn build_with(
        registry: &AgentRegistry,
        config: &AgentConfig,
        dims: InputDims,
        seed: u64,
    ) -> Result<(Self, ParamStore)> {
        registry.check(config)?;
        let mut store = ParamStore::new();
        let mut rng = stream(seed, "init", 0);
        let spec = EncoderSpec {
            config,
            dims,
            layers: &registry.layers,
            pooling: &registry.pooling,
        };
        let make = registry.encoders.get(config.repr.as_str())?;
        let mut pb = ParamBuilder::new(&mut store, &mut rng);
        let speaker = {
            let mut s = pb.scope("speaker");
            let enc = make(&mut s.scope("encoder"), &spec)?;
            Speaker::build(&mut s, &spec, enc)?
        };
        let listener = {
            let mut s = pb.scope("listener");
            let enc = make(&mut s.scope("encoder"), &spec)?;
            Listener::build(&mut s, &spec, enc)?
        };
        Ok((
            Self {
                config: config.clone(),
                dims,
                speaker,
                listener,
            },
            store,
        ))
    }

    /// Rebuilds the architecture and adopts the parameter values of
    /// `loaded`, which must have an identical manifest.
    pub fn restore(config: &AgentConfig, dims: InputDims, loaded: &ParamStore) -> Result<(Self, ParamStore)> {
        let (agents, mut store) = Self::build(config, dims, 0)?;
        if store.manifest() != loaded.manifest() {
            return Err(Error::config("checkpoint does not match the configured architecture"));
        }
        store.copy_from(loaded)?;
        Ok((agents, store))
    }
}
