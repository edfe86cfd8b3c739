//! Beam management for outdoor mm-wave links.
//!
//! The crate is `no_std` (with `alloc`) and contains every model needed to
//! exercise the TERRA protocol: codebook synthesis and array gains, a
//! line-of-sight plus ground-bounce channel, user and pedestrian mobility, a
//! slot-level sweep engine, the protocol state machine itself, reference
//! search strategies, Poisson deployment density analysis, and trace
//! analysis. File formats and the command-line driver live in `terra-sim`.
#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod math;
mod rng;

pub mod analysis;
pub mod array;
pub mod baselines;
pub mod channel;
pub mod deployment;
pub mod error;
pub mod mobility;
pub mod sweep;
pub mod terra;

pub use error::{Error, Result};

/// Index of a beam inside its codebook.
pub type BeamId = usize;

/// Index of a base station inside a scenario.
pub type StationId = usize;
