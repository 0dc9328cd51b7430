//! Emergent communication in graph referential games: world generation,
//! speaker/listener agents, a discrete channel, training, and metrics.

pub mod agents;
pub mod channel;
pub mod engine;
pub mod metrics;
mod error;
pub mod registry;
pub mod rng;
pub mod worldgen;

pub use error::{Error, Result};
