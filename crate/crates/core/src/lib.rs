//! Online tracking of the parameters of bounded time series, including a
//! time-varying upper bound, under a generalized logit-normal (GLN)
//! autoregressive model.
//!
//! The crate is organised bottom-up:
//!
//! - [`gln`]: the GLN distribution on `(0, b)` and the AR conditional mean.
//! - [`likelihood`]: extended negative log-likelihood (sigmoid term for
//!   out-of-support points), support partition and analytic gradients.
//! - [`optim`]: batch normalized gradient descent, recursive maximum
//!   likelihood (covariance form) and online normalized gradient descent.
//! - [`synthetic`]: ground-truth series with a moving bound.
//! - [`forecast`]: projection of tracked parameters and the benchmarks.
//! - [`evaluation`]: CRPS, PIT and marginal calibration.
//! - [`pipeline`]: configuration, CSV formats and the command drivers.

pub mod error;
pub mod evaluation;
pub mod forecast;
pub mod gln;
pub mod likelihood;
pub mod normal;
pub mod optim;
pub mod pipeline;
pub mod quadrature;
pub mod synthetic;

pub use error::{Error, Result};
pub use forecast::{ForecastKind, ForecastRecord, ProjectedParams};
pub use gln::{GlnParams, LagVector};
pub use likelihood::{ParamVector, SeriesWindow, SupportPartition, WindowWeights};
pub use optim::{NgdConfig, OngdState, RmleState};

/// Default coarsening margin for observations and projected bounds.
pub const DEFAULT_DELTA: f64 = 0.001;
