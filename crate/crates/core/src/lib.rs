//! Taylor-Lagrange control toolkit.
//!
//! Safety (ZOH-TLC, HOCBF) and stability (ZOH-TLS, CLF) certificates are
//! turned into affine rows, filtered through a small QP at every control step,
//! and simulated in closed loop under a zero-order hold.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::result_large_err)]

pub mod analysis;
pub mod certificates;
pub mod controller;
pub mod dynamics;
pub mod event_trigger;
pub mod qp;
pub mod scenarios;
