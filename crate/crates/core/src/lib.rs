//! Link-level simulator for symbol-class broadcast power allocation (BBMA)
//! in a multiuser downlink with null-steering beamforming.
//!
//! Instead of giving every terminal its own power share, the access point
//! groups terminals by the symbol they receive in the current symbol-time
//! and powers one beam per symbol, sized for the worst channel in the group.
//! Null-steering weights keep the groups spatially orthogonal.
//!
//! Module map:
//! - [`channel`]: cell geometry, terminal drops, path loss, shadowing, noise,
//!   planar-array steering vectors.
//! - [`null_steering`]: steering matrices, per-class null-steering weights
//!   (two solver paths) and conditioning diagnostics.
//! - [`scheduler`]: static and move-minimizing dynamic class assignment.
//! - [`power`]: SINR evaluation, per-terminal and per-class allocation,
//!   feasibility and ergodic capacity.
//! - [`p2p`]: point-to-point bit-parallel configuration and the M-PSK
//!   reference curve.
//! - [`experiments`]: deterministic Monte Carlo sweeps with CSV output.
//! - [`config`] and [`cli`]: TOML configuration and the `bbma` command line.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod null_steering;
pub mod p2p;
pub mod power;
pub mod scheduler;
pub mod seeding;

pub use error::{Error, Result};
