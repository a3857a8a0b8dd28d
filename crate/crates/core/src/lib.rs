//! Rare-event statistics for open dynamical systems.
//!
//! Interval maps with holes are discretized into finite-rank transfer
//! operators whose leading eigenvalue gives the escape rate. On top of that
//! the crate computes the return-time series `q_k`, extremal indices,
//! hitting-time distributions with their exponential error bounds, extreme
//! value laws, and entropy drops of subshifts of finite type under block
//! deletion. Piecewise affine Markov configurations are handled in exact
//! rational arithmetic so that every floating-point route has an exact
//! oracle next to it.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod error;
pub mod evl;
pub mod hitting;
pub mod interval;
pub mod maps;
pub mod mc;
pub mod rare_events;
pub mod real;
pub mod sft;
pub mod system;
pub mod transfer;

pub use error::{Error, Result};
