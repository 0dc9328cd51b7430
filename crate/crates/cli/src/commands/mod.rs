pub mod eval;
pub mod generate;
pub mod report;
pub mod train;

use std::fmt;
use std::path::PathBuf;

use clap::Args;

/// Bad invocation detected after argument parsing; exits with status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Flat TOML experiment file; flags take precedence over its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Root under which default output paths are placed.
    #[arg(long, env = "GRAPHREF_OUT", default_value = "runs")]
    pub out_root: PathBuf,
}
