//! Dense tensors with a reverse-mode tape, covering the layer set used by the
//! inpainting networks: strided 2D/3D convolution and its transpose, batch
//! normalization, pointwise activations, affine layers, and the losses.

mod adam;
pub(crate) mod conv;
mod gradcheck;
mod norm;
mod tape;
mod value;

#[cfg(test)]
mod tests;

pub use adam::Adam;
pub use gradcheck::{grad_check, GradCheck, GradCheckReport};
pub use norm::{BatchNormState, BnMode, BN_EPS, BN_MOMENTUM};
pub use tape::{sigmoid, Activation, Gradients, Tape, Var};
pub use value::{Real, Tensor};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("contract violation in {op}: {detail}")]
    Contract { op: &'static str, detail: String },
    #[error("backward needs a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
    #[error("batch norm evaluated before any running statistics were recorded")]
    UninitializedStatistics,
}

impl TensorError {
    pub fn contract(op: &'static str, detail: impl Into<String>) -> Self {
        TensorError::Contract {
            op,
            detail: detail.into(),
        }
    }
}
