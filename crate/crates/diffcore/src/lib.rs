//! Minimal reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! Operations are recorded on a [`Tape`] during the forward pass and replayed
//! in reverse by [`Tape::backward`]. Trainable tensors live in a
//! [`ParamStore`], which the tape borrows read-only, so many tapes can share
//! one parameter snapshot.

mod error;
pub mod init;
mod optim;
mod params;
mod tape;
mod tensor;

pub use error::{DiffError, Result};
pub use optim::Adam;
pub use params::{ManifestEntry, ParamId, ParamStore};
pub use tape::{Aggregation, Gradients, Tape, Var, LOG_EPS};
pub use tensor::Tensor;
