//! Recursive maximum likelihood in covariance form.
//!
//! With `h_t` the gradient of the log-likelihood term at `θ_{t-1}`:
//!
//! ```text
//! P_t = (1/α) [I - P_{t-1} h hᵀ / (α/(1-α) + hᵀ P_{t-1} h)] P_{t-1}
//! θ_t = θ_{t-1} + (1-α) P_t h
//! ```
//!
//! which is the inverse of the information recursion
//! `R_t = α R_{t-1} + (1-α) h hᵀ`.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::ngd::{ngd_fit, NgdConfig};
use crate::error::{Error, Result};
use crate::likelihood::{loglik_gradient, ParamVector, SeriesWindow};

/// Diagonal of the starting covariance matrix.
pub const INITIAL_COVARIANCE: f64 = 1e6;

#[derive(Debug, Clone)]
pub struct RmleState {
    pub theta: ParamVector,
    pub covariance: DMatrix<f64>,
    pub alpha: f64,
    /// When set, `b` is held at this value and the covariance has dimension `p + 2`.
    pub fixed_bound: Option<f64>,
    /// Steps refused because the updated covariance lost positive definiteness.
    pub rejected_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmleStep {
    /// Loss `f_t` at the pre-update parameter.
    pub loss: f64,
    pub rejected: bool,
}

/// How the warm-up estimate is obtained.
#[derive(Debug, Clone)]
pub enum WarmStart {
    /// Run batch NGD from this starting point over the warm-up data.
    Ngd { theta0: ParamVector, config: NgdConfig },
    Given(ParamVector),
}

/// Rank-one update of the covariance matrix; the result is symmetrized.
pub fn covariance_update(p: &DMatrix<f64>, h: &DVector<f64>, alpha: f64) -> DMatrix<f64> {
    let ph = p * h;
    let denom = alpha / (1.0 - alpha) + h.dot(&ph);
    let mut next = (p - &ph * ph.transpose() / denom) / alpha;
    symmetrize(&mut next);
    next
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

impl RmleState {
    pub fn new(theta: ParamVector, alpha: f64, fixed_bound: Option<f64>) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Config(format!(
                "rMLE forgetting factor must lie in (0, 1), got {alpha}"
            )));
        }
        let mut theta = theta;
        if let Some(b) = fixed_bound {
            theta.b = b;
        }
        let dim = theta.dim() - usize::from(fixed_bound.is_some());
        Ok(RmleState {
            theta,
            covariance: DMatrix::identity(dim, dim) * INITIAL_COVARIANCE,
            alpha,
            fixed_bound,
            rejected_steps: 0,
        })
    }

    /// Dimension of the estimated vector (`p + 3`, or `p + 2` with a fixed bound).
    pub fn dim(&self) -> usize {
        self.covariance.nrows()
    }

    /// Runs the covariance recursion over `data` with `θ` held fixed, so that
    /// the first tracking steps are not taken with the uninformative `10⁶·I`.
    /// Returns the number of rejected updates.
    pub fn condition(&mut self, data: &[f64]) -> usize {
        let p = self.theta.order();
        let before = self.rejected_steps;
        for i in p..data.len() {
            self.absorb(&data[i - p..=i]);
        }
        self.rejected_steps - before
    }

    /// Updates the covariance with one observation while holding `θ` fixed.
    pub fn absorb(&mut self, context: &[f64]) -> bool {
        let (_, grad) = loglik_gradient(context, &self.theta);
        let h = DVector::from_column_slice(&grad[..self.dim()]);
        let next = covariance_update(&self.covariance, &h, self.alpha);
        if Cholesky::new(next.clone()).is_none() {
            self.rejected_steps += 1;
            return false;
        }
        self.covariance = next;
        true
    }

    /// Processes one observation given its context `x_{t-p}, ..., x_t`.
    pub fn step(&mut self, context: &[f64]) -> RmleStep {
        let (loss, grad) = loglik_gradient(context, &self.theta);
        let dim = self.dim();
        let h = DVector::from_column_slice(&grad[..dim]);
        let next = covariance_update(&self.covariance, &h, self.alpha);
        if Cholesky::new(next.clone()).is_none() {
            self.rejected_steps += 1;
            return RmleStep {
                loss,
                rejected: true,
            };
        }
        let delta = &next * &h * (1.0 - self.alpha);
        let mut full = delta.as_slice().to_vec();
        if self.fixed_bound.is_some() {
            full.push(0.0);
        }
        self.theta.axpy(1.0, &full);
        self.covariance = next;
        RmleStep {
            loss,
            rejected: false,
        }
    }
}

/// Builds the starting state from a warm-up segment.
pub fn rmle_init(
    warmup: &[f64],
    order: usize,
    alpha: f64,
    fixed_bound: Option<f64>,
    start: WarmStart,
) -> Result<RmleState> {
    if warmup.len() < order + 1 {
        return Err(Error::Input(format!(
            "rMLE warm-up needs at least {} observations, got {}",
            order + 1,
            warmup.len()
        )));
    }
    let theta = match start {
        WarmStart::Given(theta) => theta,
        WarmStart::Ngd { theta0, config } => {
            let mut theta0 = theta0;
            let mut config = config;
            if let Some(b) = fixed_bound {
                theta0.b = b;
                config.freeze_bound = true;
            }
            let window = SeriesWindow::full(warmup, order)?;
            ngd_fit(&window, &theta0, &config)?.theta
        }
    };
    if theta.order() != order {
        return Err(Error::InvalidArgument(format!(
            "warm start has order {}, expected {order}",
            theta.order()
        )));
    }
    RmleState::new(theta, alpha, fixed_bound)
}
