//! One-step-ahead predictive distributions.
//!
//! Tracked estimates may put `b̂` below recent observations, which would
//! leave the next conditional mean undefined. Before forecasting, `b̂` is
//! projected onto `(max(x_t, ..., x_{t-p+1}), ∞)` with margin `δ`.

use crate::error::{Error, Result};
use crate::gln::{conditional_mean_mu, GlnParams, LagVector};
use crate::likelihood::ParamVector;

/// A fully specified predictive GLN distribution.
pub type GlnForecast = GlnParams;

/// Climatology ensembles are thinned to at most this many members.
pub const CLIMATOLOGY_CAP: usize = 5000;

/// Default number of persistence errors used for dressing.
pub const DEFAULT_PERSISTENCE_ERRORS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedParams {
    pub theta: ParamVector,
    pub delta: f64,
}

impl ProjectedParams {
    pub fn b_tilde(&self) -> f64 {
        self.theta.b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ForecastKind {
    Gln(GlnForecast),
    /// Sorted ensemble members.
    Ensemble(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRecord {
    pub issue_time: usize,
    pub kind: ForecastKind,
}

impl ForecastRecord {
    pub fn target_time(&self) -> usize {
        self.issue_time + 1
    }

    /// Predictive cdf at `y`.
    pub fn cdf(&self, y: f64) -> f64 {
        match &self.kind {
            ForecastKind::Gln(g) => g.cdf(y),
            ForecastKind::Ensemble(m) => {
                let below = m.partition_point(|&v| v <= y);
                below as f64 / m.len() as f64
            }
        }
    }
}

/// Replaces `b̂` by `max(recent) + δ` whenever `max(recent) >= b̂`.
///
/// The tie goes to the projection branch: the feasible set is open, so
/// `b̂ = max(recent)` is not in it.
pub fn project_theta(theta_hat: &ParamVector, recent: &[f64], delta: f64) -> Result<ProjectedParams> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    if recent.is_empty() {
        return Err(Error::InvalidArgument("projection needs at least one observation".into()));
    }
    let max = recent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut theta = theta_hat.clone();
    if max >= theta.b {
        theta.b = max + delta;
    }
    Ok(ProjectedParams { theta, delta })
}

/// GLN forecast of `x_{t+1}` from `recent = (x_t, ..., x_{t-p+1})`, most recent first.
pub fn predictive_distribution(projected: &ProjectedParams, recent: &[f64]) -> Result<GlnForecast> {
    let theta = &projected.theta;
    let lags = LagVector::new(recent.to_vec())?;
    let mu = conditional_mean_mu(&lags, &theta.lambdas, theta.nu(), theta.b)?;
    theta.gln(mu)
}

/// Evenly spaced order statistics of a sorted sample, at most `cap` of them.
pub fn thin_sorted(sorted: &[f64], cap: usize) -> Vec<f64> {
    let n = sorted.len();
    if n <= cap {
        return sorted.to_vec();
    }
    (0..cap)
        .map(|k| sorted[(((k as f64 + 0.5) * n as f64) / cap as f64) as usize])
        .collect()
}

/// Empirical distribution of all past values, thinned to `cap` members.
pub fn climatology_forecast(history: &[f64], cap: usize) -> Result<Vec<f64>> {
    if history.is_empty() {
        return Err(Error::Input("climatology needs a non-empty history".into()));
    }
    let mut sorted = history.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(thin_sorted(&sorted, cap.max(1)))
}

/// Running climatology that keeps the history sorted as it grows.
#[derive(Debug, Clone, Default)]
pub struct Climatology {
    sorted: Vec<f64>,
}

impl Climatology {
    pub fn push(&mut self, x: f64) {
        let at = self.sorted.partition_point(|&v| v <= x);
        self.sorted.insert(at, x);
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn ensemble(&self, cap: usize) -> Result<Vec<f64>> {
        if self.sorted.is_empty() {
            return Err(Error::Input("climatology needs a non-empty history".into()));
        }
        Ok(thin_sorted(&self.sorted, cap.max(1)))
    }
}

/// Closed range ensemble members are clipped into.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clip {
    pub lower: f64,
    pub upper: f64,
}

impl Clip {
    pub fn none() -> Self {
        Clip {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }

    /// `[δ, capacity - δ]`.
    pub fn coarsened(capacity: f64, delta: f64) -> Self {
        Clip {
            lower: delta,
            upper: capacity - delta,
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        x.clamp(self.lower, self.upper)
    }
}

/// Last value dressed with the `n_err` most recent one-step persistence errors.
pub fn persistence_forecast(history: &[f64], n_err: usize, clip: Clip) -> Result<Vec<f64>> {
    if n_err == 0 {
        return Err(Error::InvalidArgument("persistence needs n_err >= 1".into()));
    }
    if history.len() < n_err + 1 {
        return Err(Error::Input(format!(
            "persistence with {n_err} errors needs {} observations, got {}",
            n_err + 1,
            history.len()
        )));
    }
    let n = history.len();
    let last = history[n - 1];
    let mut members: Vec<f64> = history[n - 1 - n_err..]
        .windows(2)
        .map(|w| clip.apply(last + (w[1] - w[0])))
        .collect();
    members.sort_by(f64::total_cmp);
    Ok(members)
}
