//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use boundtrack::likelihood::{per_obs_loss, ParamVector, SeriesWindow};
use rand::Rng;

/// Central finite differences of `per_obs_loss` at `j`.
pub fn fd_gradient(j: usize, window: &SeriesWindow<'_>, theta: &ParamVector, h: f64) -> Vec<f64> {
    let base = theta.to_vec();
    (0..base.len())
        .map(|i| {
            let mut plus = base.clone();
            let mut minus = base.clone();
            plus[i] += h;
            minus[i] -= h;
            let fp = per_obs_loss(j, window, &ParamVector::from_slice(&plus).unwrap());
            let fm = per_obs_loss(j, window, &ParamVector::from_slice(&minus).unwrap());
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Relative error with a small floor so that near-zero partials are compared absolutely.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

/// Random parameter vector and window whose every value is at least `margin` from `b`.
pub fn random_case<R: Rng>(rng: &mut R, order: usize, len: usize, margin: f64) -> (Vec<f64>, ParamVector) {
    let lambdas: Vec<f64> = (0..order).map(|_| rng.random_range(-0.9..0.9)).collect();
    let omega = rng.random_range(-1.0..1.0);
    let tau = rng.random_range(-0.7..0.7);
    let b: f64 = rng.random_range(0.6..1.4);
    let data: Vec<f64> = (0..len + order)
        .map(|_| loop {
            let x: f64 = rng.random_range(0.02..1.6);
            if (x - b).abs() > margin {
                break x;
            }
        })
        .collect();
    (data, ParamVector::new(lambdas, omega, tau, b))
}

/// Composite Gauss-Legendre (5 nodes) over `n` equal panels.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    const X: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let h = (b - a) / n as f64;
    let mut total = 0.0;
    for i in 0..n {
        let mid = a + h * (i as f64 + 0.5);
        for k in 0..5 {
            total += W[k] * f(mid + 0.5 * h * X[k]);
        }
    }
    0.5 * h * total
}

/// Two-sided Kolmogorov-Smirnov distance of a sample against a cdf.
pub fn ks_distance<F: Fn(f64) -> f64>(sample: &mut [f64], cdf: F) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Quadratic-cost ensemble CRPS.
pub fn crps_brute_force(members: &[f64], obs: f64) -> f64 {
    let n = members.len() as f64;
    let a: f64 = members.iter().map(|x| (x - obs).abs()).sum::<f64>() / n;
    let mut pair = 0.0;
    for x in members {
        for y in members {
            pair += (x - y).abs();
        }
    }
    a - 0.5 * pair / (n * n)
}
