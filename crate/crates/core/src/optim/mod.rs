//! Estimation algorithms for the tracked parameter vector.
//!
//! - [`ngd`]: batch normalized gradient descent on the exponentially
//!   weighted extended negative log-likelihood.
//! - [`rmle`]: recursive maximum likelihood with a rank-one covariance update.
//! - [`ongd`]: online normalized gradient descent on minibatch costs.

pub mod ngd;
pub mod ongd;
pub mod rmle;

pub use ngd::{ngd_fit, normalized_step, NgdConfig, NgdOutcome};
pub use ongd::{OngdState, OngdStep};
pub use rmle::{covariance_update, rmle_init, RmleState, RmleStep, WarmStart, INITIAL_COVARIANCE};

/// Any parameter entry above this magnitude (or a non-finite loss) marks a run as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;
