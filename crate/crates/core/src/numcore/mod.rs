//! Dense numeric substrate: tensors, a reverse-mode tape, the recurrent and
//! attention layers the classifiers are built from, Adam, and a
//! finite-difference oracle used to verify all of the above.

mod adam;
mod checkpoint;
mod gradcheck;
mod layers;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint, NamedTensor, CHECKPOINT_MAGIC};
pub use gradcheck::{finite_diff_grad, relative_error};
pub use layers::{
    attend, bilstm_encode, bilstm_on_tape, cross_entropy, dot_attention, lstm_on_tape,
    softmax, BiLstmParams, BiLstmStates, LstmParams, LstmVars,
};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("every entry is masked")]
    AllMasked,
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
