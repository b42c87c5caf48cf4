//! Feed-forward networks, Adam and the offline LP training loop.

pub mod adam;
pub mod mlp;
pub mod model;
mod persist;
pub mod train;

pub use adam::{adam_step, AdamState};
pub use mlp::{Mlp, Tape};
pub use model::{lp_forward, AffineMap, Architecture, BasisEvaluator, InputNormalization, LpModel, NetPair};
pub use train::{
    backprop, evaluate_loss, train_block_incremental, train_offline, Gradients, PairGradient, Sample,
    TrainConfig, TrainReport, TrainingSet,
};
