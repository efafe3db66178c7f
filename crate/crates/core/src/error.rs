use alloc::string::String;

use crate::code::AlistError;

/// Errors raised by the decoding, channel and training routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Alist(#[from] AlistError),

    #[error("{what}: expected length {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("input is not a codeword: check {check} has odd parity")]
    NotACodeword { check: usize },

    #[error("value {value} lies outside the penalty domain [0, 1]")]
    OutOfDomain { value: f64 },

    #[error("u-subproblem is not convex: curvature h = {h} must exceed alpha = {alpha}")]
    NonConvex { alpha: f64, h: f64 },

    #[error("invalid decoder parameters: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value produced at stage {stage}")]
    NumericalFailure { stage: usize },

    #[error(
        "parity-check matrix has rank {rank} < {checks}; random-message encoding is \
         unavailable, use all-zero codewords instead"
    )]
    RankDeficient { rank: usize, checks: usize },

    #[error("gradient with respect to {param} is not finite")]
    NonFiniteGradient { param: String },

    #[error("training diverged at epoch {epoch}: validation loss is not finite")]
    Divergence { epoch: usize },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
