//! Errors shared by the simulation kernels and estimators.

use crate::model::{EvalError, PropensityError};
use crate::rng::SampleError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Propensity(#[from] PropensityError),
    #[error("observable evaluation failed: {0}")]
    Observable(#[from] EvalError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error("propensity derivative of reaction {reaction} failed to evaluate: {source}")]
    Derivative { reaction: usize, source: EvalError },
    #[error("sample accumulated a non-finite value")]
    NonFiniteSample,
}
