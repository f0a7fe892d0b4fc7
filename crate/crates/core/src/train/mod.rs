//! Losses, the discriminator gate, and the staged training schedule.

mod config;
mod log;
mod losses;
mod trainer;


pub use config::{Stage, StageConfig, TrainConfig, LOG_CLAMP};
pub use log::{TrainLog, TrainRecord, COMPONENTS};
pub use losses::{
    disc_accuracy_gate, generator_objective, loss_edgan, loss_gan, loss_hybrid, loss_l1, loss_recon,
    mean_log_complement,
};
pub use trainer::{EpochHook, StageSummary, Trainer};

use thiserror::Error;

use crate::nets::NetError;
use crate::tensor::TensorError;
use crate::voxel::VoxelError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("{0}")]
    Contract(String),
    #[error("stage {stage}, step {step}: non-finite {what}")]
    NonFinite { stage: Stage, step: u64, what: String },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Voxel(#[from] VoxelError),
}
