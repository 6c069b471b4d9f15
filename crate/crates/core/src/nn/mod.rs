//! GRU sequence-to-sequence network with hand-written reverse-mode gradients.

mod adam;
mod gru;
mod loss;
mod model;

pub use adam::{global_norm, OptimizerState, StepStats};
pub use gru::{gru_step, gru_step_backward, GruCache, GruLayer};
pub use loss::mse_loss;
pub use model::{ForwardCache, ModelConfig, Sample, Seq2SeqModel};

use alloc::string::String;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    ShapeMismatch { what: &'static str, expected: usize, got: usize },
    #[error("teacher forcing requested without teacher values")]
    MissingTeacher,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("non-finite gradient in parameter {0}")]
    NonFiniteGradient(String),
    #[error("invalid model configuration: {0}")]
    InvalidConfig(&'static str),
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), NnError> {
    if expected == got {
        Ok(())
    } else {
        Err(NnError::ShapeMismatch { what, expected, got })
    }
}
