//! Episodes, the speaker→channel→listener pass, training and evaluation.

mod episode;
mod eval;
mod play;
mod train;

pub use episode::{assemble_episode, Episode, Pool};
pub use eval::{evaluate, evaluate_episodes, EvalRecord, EvalReport};
pub use play::{episode_loss, forward_batch, listen, play_episode, speak, BatchForward, PlayOutcome};
pub use train::{read_log, train, write_log, LogRow, TrainConfig, TrainOutcome};
