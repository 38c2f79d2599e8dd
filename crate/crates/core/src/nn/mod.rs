//! Voxel-to-SMILES captioning model: tape autodiff, model, training and
//! sampling.

mod gradcheck;
mod model;
mod sample;
mod tape;
mod tensor;
mod train;

pub use gradcheck::{gradient_check, loss_and_gradient, perturbed_loss, GradCheckReport, MAX_CHECK_PARAMETERS};
pub use model::{CaptionerConfig, CaptionerModel, CheckpointHeader, DecoderState, VCPT_VERSION};
pub use sample::{draw, entropy, sample, sample_ids, sampling_distribution, SamplerConfig};
pub use tape::{ConvGeom, Tape, Var};
pub use tensor::Tensor;
pub use train::{evaluate, prepare_examples, train, EpochStats, TrainConfig, TrainExample, TrainHistory};

use thiserror::Error;

use crate::chem::TokenId;
use crate::voxel::{GridSpec, VoxelError};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("grid spec {found:?} does not match the model's {expected:?}")]
    SpecMismatch { expected: GridSpec, found: GridSpec },
    #[error("token id {0} outside the vocabulary")]
    InvalidToken(TokenId),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss {value} at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize, value: f64 },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Voxel(#[from] VoxelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
