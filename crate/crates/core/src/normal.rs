//! Standard normal cdf and quantile.

use libm::erfc;
use statrs::function::erf::erfc_inv;
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

/// Standard normal density.
pub fn pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Standard normal cdf, `0.5 * erfc(-z / sqrt 2)`; accurate in both tails.
pub fn cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal quantile for `p` in `(0, 1)`.
///
/// Starts from the inverse complementary error function and applies one
/// Newton correction against [`cdf`], so that `cdf(quantile(p))` agrees with
/// `p` to round-off.
pub fn quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let mut z = -SQRT_2 * erfc_inv(2.0 * p);
    let d = pdf(z);
    if d > 1e-300 {
        z -= (cdf(z) - p) / d;
    }
    z
}
