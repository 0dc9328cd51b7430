use serde::{Deserialize, Serialize};

use crate::worldgen::ReprKind;
use crate::{Error, Result};

/// Architecture of a speaker/listener pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub repr: ReprKind,
    /// `gcn` or `sage`.
    pub graph_layer: String,
    /// `mean`, `pool` or `gcn`; used when `graph_layer` is `sage`.
    pub sage_aggregator: String,
    /// `sum`, `mean` or `max`.
    pub pooling: String,
    pub num_layers: usize,
    pub hidden_size: usize,
    pub embedding_size: usize,
    pub vocab_size: usize,
    pub message_len: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            repr: ReprKind::Graph,
            graph_layer: "gcn".into(),
            sage_aggregator: "mean".into(),
            pooling: "sum".into(),
            num_layers: 2,
            hidden_size: 200,
            embedding_size: 50,
            vocab_size: 10,
            message_len: 3,
        }
    }
}

impl AgentConfig {
    /// Graph layer registry key.
    pub fn layer_key(&self) -> String {
        match self.graph_layer.as_str() {
            "sage" => format!("sage-{}", self.sage_aggregator),
            other => other.to_string(),
        }
    }

    /// Structural checks; registry names are checked when agents are built.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("num_layers", self.num_layers),
            ("hidden_size", self.hidden_size),
            ("embedding_size", self.embedding_size),
            ("message_len", self.message_len),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        if self.vocab_size < 2 {
            return Err(Error::config("vocab_size must be at least 2"));
        }
        Ok(())
    }
}
