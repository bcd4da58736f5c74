//! The generalized logit-normal distribution on `(0, b)`.
//!
//! A variable `X` is GLN(μ, σ², ν, b) when `γ(X/b; ν) ~ N(μ, σ²)` with the
//! generalized logit `γ(u; ν) = log(u^ν / (1 - u^ν))`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::normal;
use crate::quadrature::adaptive_simpson_panels;

/// Location, scale, shape and upper bound of a GLN distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlnParams {
    pub mu: f64,
    pub sigma2: f64,
    pub nu: f64,
    pub b: f64,
}

impl GlnParams {
    pub fn new(mu: f64, sigma2: f64, nu: f64, b: f64) -> Result<Self> {
        let p = GlnParams { mu, sigma2, nu, b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.mu, self.sigma2, self.nu, self.b]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.sigma2 <= 0.0 || self.nu <= 0.0 || self.b <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "GLN parameters require finite values with sigma2, nu, b > 0; got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        gln_pdf(x, self)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        gln_cdf(x, self)
    }

    pub fn quantile(&self, prob: f64) -> Result<f64> {
        gln_quantile(prob, self)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        gln_sample(self, rng)
    }

    pub fn median(&self) -> f64 {
        self.b * inverse_transform(self.mu, self.nu)
    }

    /// Mean by quadrature; the distribution has no closed-form moments.
    pub fn mean(&self) -> f64 {
        let f = |x: f64| x * self.pdf(x);
        adaptive_simpson_panels(&f, 0.0, self.b, 1e-12 * self.b, 64)
    }
}

/// Ordered lags `x_{t-1}, ..., x_{t-p}`, most recent first.
#[derive(Debug, Clone, PartialEq)]
pub struct LagVector(Vec<f64>);

impl LagVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("lag vector needs p >= 1".into()));
        }
        Ok(LagVector(values))
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Generalized logit `log(u^ν) - log(1 - u^ν)`.
pub fn logit_transform(u: f64, nu: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) || !(nu > 0.0) {
        return Err(Error::Domain(format!(
            "logit transform needs 0 < u < 1 and nu > 0, got u = {u}, nu = {nu}"
        )));
    }
    Ok(logit_unchecked(u, nu))
}

/// Unchecked generalized logit; `u` must lie in `(0, 1)`.
#[inline]
pub(crate) fn logit_unchecked(u: f64, nu: f64) -> f64 {
    let lu = nu * u.ln();
    lu - (-lu.exp_m1()).ln()
}

/// Inverse of [`logit_transform`]: `sigmoid(y)^(1/ν)`.
pub fn inverse_transform(y: f64, nu: f64) -> f64 {
    // log sigmoid(y) = -softplus(-y)
    (-softplus(-y) / nu).exp()
}

/// `log(1 + e^x)` without overflow.
#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// GLN density; exactly zero outside `(0, b)`.
pub fn gln_pdf(x: f64, params: &GlnParams) -> f64 {
    if !(x > 0.0 && x < params.b) {
        return 0.0;
    }
    let u = x / params.b;
    let lu = params.nu * u.ln();
    let log_one_minus = (-lu.exp_m1()).ln();
    let gamma = lu - log_one_minus;
    let z = (gamma - params.mu) / params.sigma();
    let log_pdf = -0.5 * (2.0 * std::f64::consts::PI * params.sigma2).ln() + params.nu.ln()
        - x.ln()
        - log_one_minus
        - 0.5 * z * z;
    log_pdf.exp()
}

/// GLN cdf `Φ((γ(x/b; ν) - μ)/σ)`, saturated at 0 and 1 off-support.
pub fn gln_cdf(x: f64, params: &GlnParams) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= params.b {
        return 1.0;
    }
    let gamma = logit_unchecked(x / params.b, params.nu);
    normal::cdf((gamma - params.mu) / params.sigma())
}

pub fn gln_quantile(prob: f64, params: &GlnParams) -> Result<f64> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::Domain(format!(
            "quantile level must lie in (0, 1), got {prob}"
        )));
    }
    let y = params.mu + params.sigma() * normal::quantile(prob);
    Ok(params.b * inverse_transform(y, params.nu))
}

/// Draws one value, kept strictly inside `(0, b)`.
pub fn gln_sample<R: Rng + ?Sized>(params: &GlnParams, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    let y = params.mu + params.sigma() * z;
    let x = params.b * inverse_transform(y, params.nu);
    clamp_open(x, params.b)
}

/// Pushes `x` into the open interval `(0, b)` by the smallest representable amount.
pub(crate) fn clamp_open(x: f64, b: f64) -> f64 {
    let hi = b * (1.0 - f64::EPSILON);
    x.clamp(f64::MIN_POSITIVE, hi)
}

/// AR conditional mean `Σ_k λ_k γ(x_{t-k}/b; ν)`.
pub fn conditional_mean_mu(lags: &LagVector, lambdas: &[f64], nu: f64, b: f64) -> Result<f64> {
    if lambdas.len() != lags.order() {
        return Err(Error::InvalidArgument(format!(
            "{} coefficients for {} lags",
            lambdas.len(),
            lags.order()
        )));
    }
    let mut mu = 0.0;
    for (&lambda, &x) in lambdas.iter().zip(lags.values()) {
        if !(x > 0.0 && x < b) {
            return Err(Error::Domain(format!(
                "lag {x} outside the support (0, {b})"
            )));
        }
        mu += lambda * logit_unchecked(x / b, nu);
    }
    Ok(mu)
}
