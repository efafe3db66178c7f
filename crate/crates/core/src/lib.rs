//! ADMM-penalized LP decoding of binary linear codes and its deep-unfolded,
//! learnable variants.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure
//! computation over caller-owned data:
//!
//! * [`code`]: parity-check matrices and the alist exchange format.
//! * [`cascade`]: the cascaded three-variable inequality system `A u <= b`
//!   and the structure-exploiting products `A u`, `A^T w`.
//! * [`penalty`]: L2 and learnable piecewise-linear penalties with their
//!   per-coordinate subproblem solvers.
//! * [`admm`]: the decoder itself (fixed L2, LADN, LADN-I, LADN-P).
//! * [`gf2`] and [`channel`]: systematic encoding, BPSK over AWGN, LLRs.
//! * [`unfold`]: the unrolled network, its loss, gradients and the trainer.
//! * [`exec`]: the small executor abstraction used for data parallelism.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod admm;
pub mod cascade;
pub mod channel;
pub mod code;
pub mod exec;
pub mod gf2;
pub mod penalty;
pub mod rng;
pub mod unfold;

mod error;

pub use admm::{decode, hard_decision, DecodeOutput, DecodeTrace, Decoder, DecoderParams, MuSchedule, Variant};
pub use cascade::{CascadedSystem, EquationTriple};
pub use code::{AlistError, ParityCheckMatrix};
pub use error::{Error, Result};
pub use penalty::{L2Penalty, Penalty, PiecewiseLinearPenalty};
