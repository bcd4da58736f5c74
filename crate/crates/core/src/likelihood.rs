//! Extended time-dependent negative log-likelihood.
//!
//! Observations whose value or lags leave `(0, b)` contribute
//! `-log s_j(b)` with `s_j(b) = 1 / (1 + exp(x_j - b))` instead of an
//! infinite penalty. Parameters are handled in unconstrained coordinates
//! `(λ_1..λ_p, ω = log σ², τ = log ν, b)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::gln::{sigmoid, softplus, GlnParams};

/// Tracked parameter vector in unconstrained coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub lambdas: Vec<f64>,
    pub omega: f64,
    pub tau: f64,
    pub b: f64,
}

impl ParamVector {
    pub fn new(lambdas: Vec<f64>, omega: f64, tau: f64, b: f64) -> Self {
        ParamVector {
            lambdas,
            omega,
            tau,
            b,
        }
    }

    /// Builds from natural units `(λ, σ², ν, b)`.
    pub fn from_natural(lambdas: Vec<f64>, sigma2: f64, nu: f64, b: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && nu > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sigma2 and nu must be positive, got {sigma2}, {nu}"
            )));
        }
        Ok(ParamVector::new(lambdas, sigma2.ln(), nu.ln(), b))
    }

    /// The usual starting point `λ = 0, σ² = 1, ν = 1, b = 1`.
    pub fn initial(order: usize) -> Self {
        ParamVector::new(vec![0.0; order], 0.0, 0.0, 1.0)
    }

    pub fn order(&self) -> usize {
        self.lambdas.len()
    }

    pub fn dim(&self) -> usize {
        self.lambdas.len() + 3
    }

    pub fn sigma2(&self) -> f64 {
        self.omega.exp()
    }

    pub fn nu(&self) -> f64 {
        self.tau.exp()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.lambdas.clone();
        v.extend([self.omega, self.tau, self.b]);
        v
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        if values.len() < 4 {
            return Err(Error::InvalidArgument(format!(
                "parameter vector needs at least 4 entries, got {}",
                values.len()
            )));
        }
        let p = values.len() - 3;
        Ok(ParamVector::new(
            values[..p].to_vec(),
            values[p],
            values[p + 1],
            values[p + 2],
        ))
    }

    /// Adds `scale * delta` in place; `delta` uses the [`to_vec`](Self::to_vec) layout.
    pub fn axpy(&mut self, scale: f64, delta: &[f64]) {
        let p = self.order();
        for (l, d) in self.lambdas.iter_mut().zip(delta) {
            *l += scale * d;
        }
        self.omega += scale * delta[p];
        self.tau += scale * delta[p + 1];
        self.b += scale * delta[p + 2];
    }

    pub fn is_finite(&self) -> bool {
        self.lambdas.iter().all(|v| v.is_finite())
            && self.omega.is_finite()
            && self.tau.is_finite()
            && self.b.is_finite()
    }

    pub fn max_abs(&self) -> f64 {
        self.to_vec().iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// GLN distribution for the next value given `mu`.
    pub fn gln(&self, mu: f64) -> Result<GlnParams> {
        GlnParams::new(mu, self.sigma2(), self.nu(), self.b)
    }
}

/// Terms `j = start..=end` of a series, each with `order` lags before it.
#[derive(Debug, Clone, Copy)]
pub struct SeriesWindow<'a> {
    data: &'a [f64],
    start: usize,
    end: usize,
    order: usize,
}

impl<'a> SeriesWindow<'a> {
    pub fn new(data: &'a [f64], start: usize, end: usize, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("model order must be >= 1".into()));
        }
        if start < order || start > end || end >= data.len() {
            return Err(Error::InvalidArgument(format!(
                "window [{start}, {end}] with order {order} does not fit {} observations",
                data.len()
            )));
        }
        Ok(SeriesWindow {
            data,
            start,
            end,
            order,
        })
    }

    /// Every term that has a full set of lags.
    pub fn full(data: &'a [f64], order: usize) -> Result<Self> {
        if data.len() <= order {
            return Err(Error::InvalidArgument(format!(
                "{} observations cannot support order {order}",
                data.len()
            )));
        }
        Self::new(data, order, data.len() - 1, order)
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.end
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn data(&self) -> &'a [f64] {
        self.data
    }

    /// `x_{j-p}, ..., x_j`, oldest first.
    pub fn context(&self, j: usize) -> &'a [f64] {
        &self.data[j - self.order..=j]
    }

    pub fn indices(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }

    fn check(&self, j: usize) -> Result<()> {
        if j < self.start || j > self.end {
            return Err(Error::InvalidArgument(format!(
                "index {j} outside window [{}, {}]",
                self.start, self.end
            )));
        }
        Ok(())
    }
}

/// Split of window indices by support membership at some `b`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SupportPartition {
    pub in_support: Vec<usize>,
    pub out_support: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindowKind {
    Rectangular,
    Exponential { alpha: f64 },
}

/// Weighting of likelihood terms by age.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowWeights {
    pub kind: WindowKind,
}

impl WindowWeights {
    pub fn rectangular() -> Self {
        WindowWeights {
            kind: WindowKind::Rectangular,
        }
    }

    pub fn exponential(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "forgetting factor must lie in (0, 1), got {alpha}"
            )));
        }
        Ok(WindowWeights {
            kind: WindowKind::Exponential { alpha },
        })
    }

    /// `t - j0 + 1` for rectangular windows, `1 / (1 - α)` for exponential ones.
    pub fn normalizer(&self, len: usize) -> f64 {
        match self.kind {
            WindowKind::Rectangular => len as f64,
            WindowKind::Exponential { alpha } => 1.0 / (1.0 - alpha),
        }
    }

    /// Unnormalized weight of a term `age = t - j` steps old.
    pub fn weight(&self, age: usize) -> f64 {
        match self.kind {
            WindowKind::Rectangular => 1.0,
            WindowKind::Exponential { alpha } => alpha.powi(age as i32),
        }
    }

    fn decay(&self) -> f64 {
        match self.kind {
            WindowKind::Rectangular => 1.0,
            WindowKind::Exponential { alpha } => alpha,
        }
    }
}

/// `s_j(b) = 1 / (1 + exp(-b + x_j))`.
pub fn sigmoid_extension(b: f64, x_j: f64) -> f64 {
    sigmoid(b - x_j)
}

/// True when the observation and all its lags lie strictly inside `(0, b)`.
#[inline]
pub fn context_in_support(context: &[f64], b: f64) -> bool {
    context.iter().all(|&x| x > 0.0 && x < b)
}

pub fn classify_support(window: &SeriesWindow<'_>, theta: &ParamVector) -> SupportPartition {
    let mut part = SupportPartition::default();
    for j in window.indices() {
        if context_in_support(window.context(j), theta.b) {
            part.in_support.push(j);
        } else {
            part.out_support.push(j);
        }
    }
    part
}

/// Loss `f_j(θ)` of one observation given its context (oldest first), and
/// optionally its gradient in `(λ, ω, τ, b)` coordinates.
///
/// Observations sitting exactly on `b` count as out of support.
pub fn context_loss(context: &[f64], theta: &ParamVector, grad: Option<&mut [f64]>) -> f64 {
    let p = context.len() - 1;
    debug_assert_eq!(p, theta.order());
    let b = theta.b;
    let x_j = context[p];
    if !context_in_support(context, b) {
        let loss = softplus(x_j - b);
        if let Some(g) = grad {
            g.iter_mut().for_each(|v| *v = 0.0);
            g[p + 2] = -sigmoid(x_j - b);
        }
        return loss;
    }

    let nu = theta.nu();
    let sigma = (0.5 * theta.omega).exp();

    // Current observation.
    let u0 = x_j / b;
    let ln_u0 = u0.ln();
    let lu0 = nu * ln_u0;
    let um0 = lu0.exp();
    let om0 = -lu0.exp_m1();
    let ln_om0 = om0.ln();
    let gamma0 = lu0 - ln_om0;

    let mut mu = 0.0;
    let mut dmu_dnu = 0.0;
    let mut dmu_db = 0.0;
    let want = grad.is_some();
    for k in 1..=p {
        let x = context[p - k];
        let lambda = theta.lambdas[k - 1];
        let u = x / b;
        let ln_u = u.ln();
        let lu = nu * ln_u;
        let om = -lu.exp_m1();
        let gamma = lu - om.ln();
        mu += lambda * gamma;
        if want {
            dmu_dnu += lambda * ln_u / om;
            dmu_db -= lambda * nu / (b * om);
        }
    }

    let z = (gamma0 - mu) / sigma;
    let loss = 0.5 * (2.0 * PI).ln() + 0.5 * theta.omega - theta.tau + x_j.ln() + ln_om0 + 0.5 * z * z;

    if let Some(g) = grad {
        for k in 1..=p {
            let x = context[p - k];
            let gamma = crate::gln::logit_unchecked(x / b, nu);
            g[k - 1] = -z * gamma / sigma;
        }
        g[p] = 0.5 - 0.5 * z * z;
        let dgamma0_dnu = ln_u0 / om0;
        let dz_dtau = nu * (dgamma0_dnu - dmu_dnu) / sigma;
        let dlnom_dtau = -nu * um0 * ln_u0 / om0;
        g[p + 1] = -1.0 + dlnom_dtau + z * dz_dtau;
        let dgamma0_db = -nu / (b * om0);
        let dz_db = (dgamma0_db - dmu_db) / sigma;
        let dlnom_db = nu * um0 / (b * om0);
        g[p + 2] = dlnom_db + z * dz_db;
    }
    loss
}

/// `f_j(θ)`: `-log p_j(θ)` in support, `-log s_j(b)` otherwise.
pub fn per_obs_loss(j: usize, window: &SeriesWindow<'_>, theta: &ParamVector) -> f64 {
    context_loss(window.context(j), theta, None)
}

/// Gradient of [`per_obs_loss`] in `(λ_1..λ_p, ω, τ, b)` coordinates.
///
/// Fails with [`Error::Boundary`] when the observation or one of its lags
/// equals `b` exactly, where the loss is not differentiable.
pub fn grad_per_obs(j: usize, window: &SeriesWindow<'_>, theta: &ParamVector) -> Result<Vec<f64>> {
    window.check(j)?;
    let ctx = window.context(j);
    if ctx.iter().any(|&x| x == theta.b) {
        return Err(Error::Boundary { index: j });
    }
    let mut g = vec![0.0; theta.dim()];
    context_loss(ctx, theta, Some(&mut g));
    Ok(g)
}

/// Weighted, normalized sum of per-observation losses over the window.
pub fn neg_loglik(window: &SeriesWindow<'_>, theta: &ParamVector, weights: &WindowWeights) -> f64 {
    accumulate(window, theta, weights, None)
}

/// Gradient of [`neg_loglik`].
pub fn grad_window(
    window: &SeriesWindow<'_>,
    theta: &ParamVector,
    weights: &WindowWeights,
) -> Result<Vec<f64>> {
    for j in window.indices() {
        if window.context(j).iter().any(|&x| x == theta.b) {
            return Err(Error::Boundary { index: j });
        }
    }
    let mut g = vec![0.0; theta.dim()];
    accumulate(window, theta, weights, Some(&mut g));
    Ok(g)
}

/// Objective and gradient in one pass; ties with `b` are treated as out of support.
pub fn loss_and_grad(
    window: &SeriesWindow<'_>,
    theta: &ParamVector,
    weights: &WindowWeights,
    grad: &mut [f64],
) -> f64 {
    accumulate(window, theta, weights, Some(grad))
}

fn accumulate(
    window: &SeriesWindow<'_>,
    theta: &ParamVector,
    weights: &WindowWeights,
    mut grad: Option<&mut [f64]>,
) -> f64 {
    let dim = theta.dim();
    let mut scratch = vec![0.0; dim];
    if let Some(g) = grad.as_deref_mut() {
        g.iter_mut().for_each(|v| *v = 0.0);
    }
    let decay = weights.decay();
    let mut w = 1.0;
    let mut total = 0.0;
    // newest first so the exponential weight is a running product
    for j in window.indices().rev() {
        let ctx = window.context(j);
        match grad.as_deref_mut() {
            Some(g) => {
                total += w * context_loss(ctx, theta, Some(&mut scratch));
                for (gi, si) in g.iter_mut().zip(&scratch) {
                    *gi += w * si;
                }
            }
            None => total += w * context_loss(ctx, theta, None),
        }
        w *= decay;
    }
    let norm = weights.normalizer(window.len());
    if let Some(g) = grad {
        g.iter_mut().for_each(|v| *v /= norm);
    }
    total / norm
}

/// Gradient of the log-likelihood term (`log p_j` or `log s_j`), the `h` vector
/// of the recursive scheme.
pub fn loglik_gradient(context: &[f64], theta: &ParamVector) -> (f64, Vec<f64>) {
    let mut g = vec![0.0; theta.dim()];
    let loss = context_loss(context, theta, Some(&mut g));
    g.iter_mut().for_each(|v| *v = -*v);
    (loss, g)
}
