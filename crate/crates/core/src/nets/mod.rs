//! Encoder-decoder GAN, LRCN upsampler, parameter store and checkpoints.

mod checkpoint;
mod config;
mod edgan;
mod hybrid;
mod lrcn;
mod params;

#[cfg(test)]
mod tests;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use config::{halve, EdGanConfig, LrcnConfig, Scale, ENCODER_DEPTH, KERNEL, PAD, STRIDE};
pub use edgan::{discriminator, discriminator_layout, edgan_decoder, edgan_encoder, generator_layout};
pub use hybrid::{
    complete_low, decode_latents, hybrid_forward, hybrid_forward_batch, images_to_volumes, plane_tensor, slab_tensor,
    upsample_lrcn, volume_tensor, HybridModel, HybridOutput, DISCRIMINATOR_FILE, GENERATOR_FILE, LRCN_FILE,
    THRESHOLD,
};
pub use lrcn::{lrcn_decoder, lrcn_encoder, lrcn_layout, lrcn_sequence, lstm_step, LstmState};
pub use params::{grad_check_params, Binder, Init, Layout, ModelParams, Param, ParamGrads, INIT_STD};

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::tensor::TensorError;
use crate::voxel::VoxelError;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("{0}")]
    Contract(String),
    #[error("unknown parameter {0}")]
    MissingParam(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Voxel(#[from] VoxelError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl NetError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        NetError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
