//! Synthetic GLN autoregressive series with a time-varying upper bound.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::gln::{clamp_open, inverse_transform, logit_unchecked, GlnParams};
use crate::DEFAULT_DELTA;

/// Shape of the true bound over time (0-based index).
#[derive(Debug, Clone, PartialEq)]
pub enum BoundCurve {
    Constant(f64),
    /// `base + amplitude * sin(2π t / period)`.
    Sinusoid { base: f64, amplitude: f64, period: f64 },
    /// Linear interpolation between `(t, value)` knots, flat outside them.
    Piecewise(Vec<(f64, f64)>),
}

impl Default for BoundCurve {
    fn default() -> Self {
        BoundCurve::Sinusoid {
            base: 1.0,
            amplitude: 0.25,
            period: 6000.0,
        }
    }
}

impl BoundCurve {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            BoundCurve::Constant(b) => *b > 0.0,
            BoundCurve::Sinusoid {
                base,
                amplitude,
                period,
            } => *base > 0.0 && amplitude.abs() < *base && *period > 0.0,
            BoundCurve::Piecewise(knots) => {
                !knots.is_empty()
                    && knots.iter().all(|&(_, v)| v > 0.0)
                    && knots.windows(2).all(|w| w[0].0 < w[1].0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("bound curve must stay positive: {self:?}")))
        }
    }

    /// True when the bound is increasing at `t` (used to split tracking errors by phase).
    pub fn rising_at(&self, t: usize) -> bool {
        bound_at(t + 1, self) > bound_at(t, self)
    }
}

pub fn bound_at(t: usize, curve: &BoundCurve) -> f64 {
    match curve {
        BoundCurve::Constant(b) => *b,
        BoundCurve::Sinusoid {
            base,
            amplitude,
            period,
        } => base + amplitude * (2.0 * std::f64::consts::PI * t as f64 / period).sin(),
        BoundCurve::Piecewise(knots) => {
            let t = t as f64;
            let first = knots[0];
            let last = knots[knots.len() - 1];
            if t <= first.0 {
                return first.1;
            }
            if t >= last.0 {
                return last.1;
            }
            let i = knots.partition_point(|k| k.0 <= t);
            let (t0, v0) = knots[i - 1];
            let (t1, v1) = knots[i];
            v0 + (v1 - v0) * (t - t0) / (t1 - t0)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub length: usize,
    /// AR coefficients; the model order is their count.
    pub lambdas: Vec<f64>,
    pub sigma2: f64,
    pub nu: f64,
    pub bound: BoundCurve,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            length: 12_000,
            lambdas: vec![0.9],
            sigma2: 1.0,
            nu: 1.5,
            bound: BoundCurve::default(),
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn order(&self) -> usize {
        self.lambdas.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambdas.is_empty() {
            return Err(Error::Config("synthetic model needs p >= 1".into()));
        }
        if self.length <= self.order() {
            return Err(Error::Config("series length must exceed the model order".into()));
        }
        if !(self.sigma2 > 0.0 && self.nu > 0.0) {
            return Err(Error::Config("sigma2 and nu must be positive".into()));
        }
        self.bound.validate()
    }

    /// Seed of replica `index` under the `seed + index` splitting scheme.
    pub fn replica(&self, index: u64) -> Self {
        SyntheticConfig {
            seed: self.seed.wrapping_add(index),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTruth {
    pub series: Vec<f64>,
    pub bounds: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub sigma2: f64,
    pub nu: f64,
}

impl SyntheticTruth {
    pub fn order(&self) -> usize {
        self.lambdas.len()
    }

    /// The true conditional distribution of `x_t` given the past, `t >= p`.
    pub fn conditional(&self, t: usize) -> GlnParams {
        true_conditional(&self.series, self.bounds[t], t, &self.lambdas, self.sigma2, self.nu)
    }
}

/// Lags that a falling bound has overtaken are coarsened to `b - δ`.
fn coarsen_lag(x: f64, b: f64) -> f64 {
    if x < b {
        x
    } else {
        (b - DEFAULT_DELTA).max(0.5 * b)
    }
}

/// GLN law of `x_t` given `x_{t-1}, ..., x_{t-p}` with bound `b_t`.
pub fn true_conditional(
    series: &[f64],
    bound: f64,
    t: usize,
    lambdas: &[f64],
    sigma2: f64,
    nu: f64,
) -> GlnParams {
    let mu: f64 = lambdas
        .iter()
        .enumerate()
        .map(|(k, &lambda)| lambda * logit_unchecked(coarsen_lag(series[t - 1 - k], bound) / bound, nu))
        .sum();
    GlnParams {
        mu,
        sigma2,
        nu,
        b: bound,
    }
}

pub fn generate(config: &SyntheticConfig) -> Result<SyntheticTruth> {
    config.validate()?;
    let p = config.order();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, config.sigma2.sqrt())
        .map_err(|e| Error::Config(format!("normal distribution: {e}")))?;
    let bounds: Vec<f64> = (0..config.length).map(|t| bound_at(t, &config.bound)).collect();
    let mut series = Vec::with_capacity(config.length);
    for (t, &b) in bounds.iter().enumerate() {
        let mu = if t < p {
            0.0
        } else {
            true_conditional(&series, b, t, &config.lambdas, config.sigma2, config.nu).mu
        };
        let y = mu + normal.sample(&mut rng);
        series.push(clamp_open(b * inverse_transform(y, config.nu), b));
    }
    Ok(SyntheticTruth {
        series,
        bounds,
        lambdas: config.lambdas.clone(),
        sigma2: config.sigma2,
        nu: config.nu,
    })
}
