//! Forecast verification: CRPS, PIT histograms and marginal calibration.

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::forecast::{ForecastKind, ForecastRecord, GlnForecast};
use crate::quadrature::adaptive_simpson_panels;

/// Absolute tolerance of the CRPS integral.
pub const CRPS_TOLERANCE: f64 = 1e-7;

/// Number of PIT histogram bins.
pub const PIT_BINS: usize = 20;

const PANELS: usize = 4;

/// CRPS of a GLN forecast, `∫ (F(y) - 1{y >= obs})² dy`.
///
/// Only `(0, b)` needs integrating; an observation outside the support adds
/// its distance to the nearest endpoint.
pub fn crps_gln(forecast: &GlnForecast, obs: f64) -> f64 {
    let b = forecast.b;
    let f_sq = |y: f64| {
        let f = forecast.cdf(y);
        f * f
    };
    let one_minus_sq = |y: f64| {
        let f = 1.0 - forecast.cdf(y);
        f * f
    };
    let median = forecast.median();
    if obs <= 0.0 {
        return integrate_split(&one_minus_sq, 0.0, b, median, CRPS_TOLERANCE) - obs;
    }
    if obs >= b {
        return integrate_split(&f_sq, 0.0, b, median, CRPS_TOLERANCE) + (obs - b);
    }
    let tol = 0.5 * CRPS_TOLERANCE;
    integrate_split(&f_sq, 0.0, obs, median, tol) + integrate_split(&one_minus_sq, obs, b, median, tol)
}

/// Integrates over `[a, b]`, splitting at `mid` when it lies inside, where the
/// cdf changes fastest for concentrated forecasts.
fn integrate_split<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, mid: f64, tol: f64) -> f64 {
    if mid > a && mid < b {
        adaptive_simpson_panels(f, a, mid, 0.5 * tol, PANELS)
            + adaptive_simpson_panels(f, mid, b, 0.5 * tol, PANELS)
    } else {
        adaptive_simpson_panels(f, a, b, tol, PANELS)
    }
}

/// Ensemble CRPS `E|X - obs| - ½ E|X - X'|` in `O(N log N)`.
pub fn crps_ensemble(members: &[f64], obs: f64) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::InvalidArgument("CRPS of an empty ensemble".into()));
    }
    if members.windows(2).all(|w| w[0] <= w[1]) {
        Ok(crps_sorted(members, obs))
    } else {
        let mut sorted = members.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(crps_sorted(&sorted, obs))
    }
}

fn crps_sorted(sorted: &[f64], obs: f64) -> f64 {
    let n = sorted.len() as f64;
    let mut abs_dev = 0.0;
    let mut spread = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        abs_dev += (x - obs).abs();
        // Σ_{i,j} |x_i - x_j| = 2 Σ_i (2i - N - 1) x_(i), 1-based ranks
        spread += (2.0 * (i as f64 + 1.0) - n - 1.0) * x;
    }
    abs_dev / n - spread / (n * n)
}

/// CRPS for either kind of forecast record.
pub fn crps_record(record: &ForecastRecord, obs: f64) -> Result<f64> {
    match &record.kind {
        ForecastKind::Gln(g) => Ok(crps_gln(g, obs)),
        ForecastKind::Ensemble(m) => crps_ensemble(m, obs),
    }
}

/// Probability integral transform; randomized for ensembles.
pub fn pit_value<R: Rng + ?Sized>(record: &ForecastRecord, obs: f64, rng: &mut R) -> f64 {
    match &record.kind {
        ForecastKind::Gln(g) => g.cdf(obs),
        ForecastKind::Ensemble(m) => {
            let below = m.partition_point(|&v| v < obs);
            let at_or_below = m.partition_point(|&v| v <= obs);
            let ties = at_or_below - below;
            let u: f64 = if ties > 0 { rng.random() } else { 0.0 };
            (below as f64 + u * ties as f64) / m.len() as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PitHistogram {
    pub counts: Vec<u64>,
}

impl PitHistogram {
    pub fn new(bins: usize) -> Self {
        PitHistogram {
            counts: vec![0; bins.max(1)],
        }
    }

    pub fn from_values(values: &[f64], bins: usize) -> Self {
        let mut h = PitHistogram::new(bins);
        values.iter().for_each(|&v| h.add(v));
        h
    }

    pub fn add(&mut self, pit: f64) {
        let bins = self.counts.len();
        let i = ((pit * bins as f64).floor() as isize).clamp(0, bins as isize - 1) as usize;
        self.counts[i] += 1;
    }

    pub fn merge(&mut self, other: &PitHistogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Pearson chi-square statistic against the uniform histogram.
    pub fn chi_square(&self) -> f64 {
        let expected = self.total() as f64 / self.counts.len() as f64;
        self.counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum()
    }

    /// Upper-tail p-value of the uniformity test.
    pub fn uniformity_p_value(&self) -> f64 {
        let dof = (self.counts.len() - 1) as f64;
        match ChiSquared::new(dof) {
            Ok(chi) => 1.0 - chi.cdf(self.chi_square()),
            Err(_) => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalPoint {
    pub y: f64,
    /// Time-averaged predictive cdf at `y`.
    pub predictive: f64,
    /// Fraction of observations `<= y`.
    pub empirical: f64,
}

pub fn marginal_curve(
    forecasts: &[ForecastRecord],
    observations: &[f64],
    grid: &[f64],
) -> Result<Vec<MarginalPoint>> {
    if forecasts.len() != observations.len() {
        return Err(Error::InvalidArgument(format!(
            "{} forecasts for {} observations",
            forecasts.len(),
            observations.len()
        )));
    }
    if forecasts.is_empty() {
        return Err(Error::InvalidArgument("marginal curve of an empty sample".into()));
    }
    let n = forecasts.len() as f64;
    let mut sorted_obs = observations.to_vec();
    sorted_obs.sort_by(f64::total_cmp);
    Ok(grid
        .iter()
        .map(|&y| MarginalPoint {
            y,
            predictive: forecasts.iter().map(|f| f.cdf(y)).sum::<f64>() / n,
            empirical: sorted_obs.partition_point(|&o| o <= y) as f64 / n,
        })
        .collect())
}

/// Largest vertical distance between the two marginal curves.
pub fn max_marginal_gap(curve: &[MarginalPoint]) -> f64 {
    curve
        .iter()
        .map(|p| (p.predictive - p.empirical).abs())
        .fold(0.0, f64::max)
}

/// Relative improvement `1 - score / reference`.
pub fn improvement(score: f64, reference: f64) -> f64 {
    1.0 - score / reference
}

/// Aggregated scores for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub method: String,
    pub n: usize,
    /// Mean CRPS in percent of capacity.
    pub mean_crps: f64,
    /// Standard deviation of the per-forecast CRPS, percent of capacity.
    pub crps_sd: f64,
    pub pit: PitHistogram,
    pub marginal: Vec<MarginalPoint>,
    /// `(reference method, improvement in percent)`.
    pub improvements: Vec<(String, f64)>,
    /// Per-forecast `(target time, CRPS in capacity units)`.
    pub per_time: Vec<(usize, f64)>,
}

/// Uniform grid of `points` values over `[0, upper]`.
pub fn default_grid(upper: f64, points: usize) -> Vec<f64> {
    let points = points.max(2);
    (0..points)
        .map(|i| upper * i as f64 / (points - 1) as f64)
        .collect()
}

/// Streaming scorer, so that large ensembles never need to be held at once.
#[derive(Debug, Clone)]
pub struct ScoreAccumulator {
    method: String,
    capacity: f64,
    grid: Vec<f64>,
    per_time: Vec<(usize, f64)>,
    pit: PitHistogram,
    predictive_sum: Vec<f64>,
    observations: Vec<f64>,
}

impl ScoreAccumulator {
    pub fn new(method: &str, capacity: f64, grid: Vec<f64>) -> Self {
        ScoreAccumulator {
            method: method.to_string(),
            capacity,
            predictive_sum: vec![0.0; grid.len()],
            grid,
            per_time: Vec::new(),
            pit: PitHistogram::new(PIT_BINS),
            observations: Vec::new(),
        }
    }

    /// Scores one forecast and returns its CRPS in capacity units.
    pub fn add<R: Rng + ?Sized>(&mut self, record: &ForecastRecord, obs: f64, rng: &mut R) -> Result<f64> {
        let crps = crps_record(record, obs)?;
        self.per_time.push((record.target_time(), crps));
        self.pit.add(pit_value(record, obs, rng));
        for (acc, &y) in self.predictive_sum.iter_mut().zip(&self.grid) {
            *acc += record.cdf(y);
        }
        self.observations.push(obs);
        Ok(crps)
    }

    pub fn len(&self) -> usize {
        self.per_time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_time.is_empty()
    }

    /// Mean CRPS so far, percent of capacity.
    pub fn mean_crps(&self) -> f64 {
        let n = self.per_time.len().max(1) as f64;
        100.0 * self.per_time.iter().map(|p| p.1).sum::<f64>() / n / self.capacity
    }

    pub fn finish(self) -> Result<EvalReport> {
        if self.per_time.is_empty() {
            return Err(Error::Input("nothing to evaluate".into()));
        }
        let n = self.per_time.len() as f64;
        let mean = self.per_time.iter().map(|p| p.1).sum::<f64>() / n;
        let var = self.per_time.iter().map(|p| (p.1 - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let mut sorted = self.observations;
        sorted.sort_by(f64::total_cmp);
        let marginal = self
            .grid
            .iter()
            .zip(&self.predictive_sum)
            .map(|(&y, &s)| MarginalPoint {
                y,
                predictive: s / n,
                empirical: sorted.partition_point(|&o| o <= y) as f64 / n,
            })
            .collect();
        Ok(EvalReport {
            method: self.method,
            n: self.per_time.len(),
            mean_crps: 100.0 * mean / self.capacity,
            crps_sd: 100.0 * var.sqrt() / self.capacity,
            pit: self.pit,
            marginal,
            improvements: Vec::new(),
            per_time: self.per_time,
        })
    }
}

impl EvalReport {
    /// Records `1 - crps / reference` (percent) against each reference report.
    pub fn add_improvements<'a, I: IntoIterator<Item = &'a EvalReport>>(&mut self, references: I) {
        for r in references {
            if r.method != self.method {
                self.improvements
                    .push((r.method.clone(), 100.0 * improvement(self.mean_crps, r.mean_crps)));
            }
        }
    }
}

/// Scores aligned forecasts against observations.
pub fn evaluate<R: Rng + ?Sized>(
    method: &str,
    forecasts: &[ForecastRecord],
    observations: &[f64],
    capacity: f64,
    grid: &[f64],
    rng: &mut R,
) -> Result<EvalReport> {
    if forecasts.len() != observations.len() {
        return Err(Error::Input(format!(
            "{} forecasts for {} observations",
            forecasts.len(),
            observations.len()
        )));
    }
    let mut acc = ScoreAccumulator::new(method, capacity, grid.to_vec());
    for (f, &obs) in forecasts.iter().zip(observations) {
        acc.add(f, obs, rng)?;
    }
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gln::GlnParams;
    use crate::quadrature::adaptive_simpson;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn brute_force(members: &[f64], obs: f64) -> f64 {
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

    #[test]
    fn ensemble_examples() {
        assert_eq!(crps_ensemble(&[0.3], 0.7).unwrap(), (0.3f64 - 0.7).abs());
        assert!((crps_ensemble(&[0.0, 1.0], 0.5).unwrap() - 0.25).abs() < 1e-15);
        assert!(crps_ensemble(&[], 0.5).is_err());
        let m = [0.4, 0.1, 0.9, 0.3];
        assert!((crps_ensemble(&m, 0.35).unwrap() - brute_force(&m, 0.35)).abs() < 1e-14);
    }

    #[test]
    fn degenerate_gln_at_median() {
        let g = GlnParams::new(0.2, 1e-12, 1.2, 1.0).unwrap();
        assert!(crps_gln(&g, g.median()) < 1e-4);
    }

    #[test]
    fn above_support_adds_distance() {
        let g = GlnParams::new(0.0, 1.0, 1.0, 1.0).unwrap();
        let inner = adaptive_simpson(&|y: f64| g.cdf(y).powi(2), 0.0, 1.0, 1e-11);
        assert!((crps_gln(&g, 1.2) - (inner + 0.2)).abs() < 1e-6);
        let lower = adaptive_simpson(&|y: f64| (1.0 - g.cdf(y)).powi(2), 0.0, 1.0, 1e-11);
        assert!((crps_gln(&g, -0.1) - (lower + 0.1)).abs() < 1e-6);
    }

    #[test]
    fn continuous_at_upper_bound() {
        let g = GlnParams::new(0.5, 0.7, 1.4, 0.9).unwrap();
        let at = crps_gln(&g, 0.9);
        for k in 1..10 {
            let inside = crps_gln(&g, 0.9 - 10f64.powi(-k));
            if k >= 7 {
                assert!((inside - at).abs() < 1e-6, "k = {k} {inside} {at}");
            }
        }
    }

    #[test]
    fn pit_examples() {
        let g = GlnParams::new(0.3, 0.5, 1.0, 1.0).unwrap();
        let rec = ForecastRecord {
            issue_time: 0,
            kind: ForecastKind::Gln(g),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((pit_value(&rec, g.median(), &mut rng) - 0.5).abs() < 1e-14);
        assert_eq!(pit_value(&rec, 1.0, &mut rng), 1.0);
        assert_eq!(pit_value(&rec, 3.0, &mut rng), 1.0);

        let ens = ForecastRecord {
            issue_time: 0,
            kind: ForecastKind::Ensemble(vec![0.5; 4]),
        };
        let v: Vec<f64> = (0..1000).map(|_| pit_value(&ens, 0.5, &mut rng)).collect();
        assert!(v.iter().all(|&p| (0.0..=1.0).contains(&p)));
        let mean = v.iter().sum::<f64>() / 1000.0;
        assert!((mean - 0.5).abs() < 0.05);
    }

    #[test]
    fn histogram_bins() {
        let h = PitHistogram::from_values(&[0.0, 0.049, 0.05, 0.999, 1.0], 20);
        assert_eq!(h.counts[0], 2);
        assert_eq!(h.counts[1], 1);
        assert_eq!(h.counts[19], 2);
        assert_eq!(h.total(), 5);
        let flat = PitHistogram { counts: vec![50; 20] };
        assert_eq!(flat.chi_square(), 0.0);
        assert!((flat.uniformity_p_value() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn marginal_curve_matches_empirical() {
        let obs = vec![0.2, 0.4, 0.6, 0.8];
        let ens = ForecastRecord {
            issue_time: 0,
            kind: ForecastKind::Ensemble(obs.clone()),
        };
        let forecasts = vec![ens; 4];
        let grid = default_grid(1.0, 11);
        let curve = marginal_curve(&forecasts, &obs, &grid).unwrap();
        assert_eq!(max_marginal_gap(&curve), 0.0);
        assert_eq!(curve[0].predictive, 0.0);
        assert_eq!(curve[10].empirical, 1.0);
        assert!(marginal_curve(&forecasts, &obs[..3], &grid).is_err());
    }

    #[test]
    fn improvement_arithmetic() {
        assert!((100.0 * improvement(6.28, 15.26) - 58.85).abs() < 0.005);
    }
}
