//! Rank-constrained transition models and the MLE / value-equivalence
//! training objectives.

mod adam;
mod checkpoint;
mod factorized;
pub mod gradcheck;
mod loss;
mod train;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
pub use factorized::{fit_reward, init_model, row_softmax, FactorizedModel, ModelGrads};
pub use loss::{mle_loss_and_grad, ve_loss_and_grad, Objective, VeTargets};
pub use train::{train, TrainConfig, TrainReport};
