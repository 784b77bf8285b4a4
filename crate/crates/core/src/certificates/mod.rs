//! Safety and stability certificates turned into affine constraints on the control.
//!
//! Every certificate reduces, at a fixed state, to a [`HalfspaceRow`]
//! `a·u + b ≥ 0` (or `≤ 0`, optionally relaxed by a slack). The Taylor-Lagrange
//! rows use the zero-order-hold assumption: the control and the state inside
//! the Lagrange remainder are frozen at the current sample.

mod chain;
mod fdcheck;
mod roots;
mod rows;
mod taylor;

pub use chain::{ChainFn, ChainValues, LieDerivativeChain};
pub use fdcheck::finite_diff_chain_check;
pub use roots::{complex_roots, psi1_trace, psi1_with_gain, ComplexRootPair};
pub use rows::{
    class_k_polynomial, clf_row, hocbf_row, hocbf_row_from_roots, normalized_taylor_sum,
    taylor_coefficients, zoh_tlc_row, zoh_tls_row, ClassKSpec, HalfspaceRow, RowSense,
};
pub use taylor::{verify_taylor_identity, TaylorReport, XiEstimate};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertificateError {
    #[error("relative degree must be >= 1, got {0}")]
    InvalidDegree(usize),
    #[error("time step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("chain `{chain}` returned {got} {what} entries, expected {expected}")]
    Shape {
        chain: String,
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("chain `{chain}` is not finite at state {state:?}")]
    NonFinite { chain: String, state: Vec<f64> },
    #[error("class-K gains must be positive, got {0:?}")]
    NonPositiveGain(Vec<f64>),
    #[error("expected {expected} class-K gains for relative degree {expected}, got {got}")]
    GainCount { expected: usize, got: usize },
    #[error("operation requires relative degree {expected}, chain has {got}")]
    DegreeMismatch { expected: usize, got: usize },
    #[error("class-K polynomial has non-real coefficients (imaginary part {0:e})")]
    ComplexCoefficients(f64),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("samples are not on a uniform grid")]
    NonUniformGrid,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
