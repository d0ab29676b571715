//! Minimal tensor engine, temporal convolutional encoder and the four-branch
//! window scorer.

pub mod checkpoint;
pub mod model;
pub mod tape;
pub mod tcn;
pub mod tensor;
pub mod train;

pub use checkpoint::Checkpoint;
pub use model::{model_score, Branch, BranchSet, ModelConfig, ModelParams, PreparedPair, ScoreBreakdown};
pub use tape::{Grads, Tape, Var};
pub use tcn::{tcn_forward, TcnConfig, TcnParams};
pub use tensor::Tensor;
pub use train::{mean_loss, train, Adam, TrainConfig, TrainOutcome};
