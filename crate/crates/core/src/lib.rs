//! Stochastic multi-armed bandits over one-parameter exponential families.
//!
//! Two learning tasks are covered:
//!
//! - **regret minimization**: UCB1, kl-UCB, kl-UCB+, Thompson Sampling and
//!   Bayes-UCB, run through [`engine::run_policy`];
//! - **fixed-confidence best arm identification**: Track-and-Stop, i.e. the
//!   Tracking sampling rule with forced exploration coupled to the Chernoff
//!   (GLRT) stopping rule, in [`track_and_stop`].
//!
//! The [`complexity`] module computes the instance-dependent quantities both
//! tasks are measured against: the Lai-Robbins regret constant, the
//! characteristic time `T*` and the optimal sampling proportions `w*`.
//!
//! Arms are indexed from 0 in the Rust API. Everything that crosses the I/O
//! boundary (CLI flags, CSV files, JSON summaries, error messages naming an
//! arm) uses 1-based arm numbers.

pub mod complexity;
pub mod engine;
mod error;
pub mod exp_family;
pub mod harness;
pub mod policies;
mod roots;
pub mod stream;
pub mod track_and_stop;

pub use error::{Error, Result};
pub use exp_family::ArmFamily;
pub use stream::Stream;

/// Library version embedded in every experiment summary.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
