//! Large-system analysis of MAP detection for BPSK over Gaussian MIMO
//! channels: analytic BER bounds, the replica prediction, the auxiliary
//! optimization behind the bounds, and Monte Carlo detectors to compare
//! them against.

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod error;
pub mod gordon_ao;
pub mod mc_sim;
pub mod model;
pub(crate) mod roots;
pub mod scalar_math;
pub mod tanaka;

pub use error::{Error, Result};
pub use model::ModelParams;
