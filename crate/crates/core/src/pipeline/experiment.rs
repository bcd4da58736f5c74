//! Monte Carlo harness on synthetic replicas.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::evaluation::EvalReport;
use crate::synthetic::{generate, BoundCurve};

use super::config::{Method, RunConfig};
use super::csvio::{Dataset, RawSeries};
use super::forecasting::score_method;
use super::track::{track_series, TrajectoryRecord};

/// Methods scored by default; batch NGD is left out because each replica costs
/// about 2e8 likelihood evaluations.
pub const DEFAULT_METHODS: [Method; 6] = [
    Method::Ideal,
    Method::Climatology,
    Method::Persistence,
    Method::Rmle1,
    Method::RmleB,
    Method::Ongd,
];

/// Where tracking quality is measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingWindows {
    pub lambda_band: (f64, f64),
    /// First index at which `λ̂` is checked against the band.
    pub lambda_from: usize,
    /// First index at which `b̂` errors are accumulated.
    pub bound_from: usize,
}

impl Default for TrackingWindows {
    fn default() -> Self {
        TrackingWindows {
            lambda_band: (0.85, 0.95),
            lambda_from: 4000,
            bound_from: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundError {
    pub all: f64,
    pub rising: f64,
    pub falling: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingSummary {
    pub method: Method,
    /// Share of steps with every `λ̂_k` inside the band.
    pub lambda_in_band: f64,
    pub bound_mae: BoundError,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaSummary {
    pub replica: usize,
    pub seed: u64,
    pub reports: Vec<EvalReport>,
    pub tracking: Vec<TrackingSummary>,
}

impl ReplicaSummary {
    pub fn report(&self, method: Method) -> Option<&EvalReport> {
        self.reports.iter().find(|r| r.method == method.name())
    }

    pub fn tracking(&self, method: Method) -> Option<&TrackingSummary> {
        self.tracking.iter().find(|t| t.method == method)
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

pub fn tracking_summary(
    method: Method,
    trajectory: &[TrajectoryRecord],
    bounds: &[f64],
    curve: &BoundCurve,
    windows: &TrackingWindows,
) -> TrackingSummary {
    let (lo, hi) = windows.lambda_band;
    let late: Vec<&TrajectoryRecord> = trajectory.iter().filter(|r| r.index >= windows.lambda_from).collect();
    let in_band = late
        .iter()
        .filter(|r| r.theta.lambdas.iter().all(|l| (lo..=hi).contains(l)))
        .count();
    let errors: Vec<(bool, f64)> = trajectory
        .iter()
        .filter(|r| r.index >= windows.bound_from)
        .map(|r| (curve.rising_at(r.index), (r.theta.b - bounds[r.index]).abs()))
        .collect();
    TrackingSummary {
        method,
        lambda_in_band: in_band as f64 / late.len().max(1) as f64,
        bound_mae: BoundError {
            all: mean(errors.iter().map(|e| e.1)),
            rising: mean(errors.iter().filter(|e| e.0).map(|e| e.1)),
            falling: mean(errors.iter().filter(|e| !e.0).map(|e| e.1)),
        },
    }
}

/// Simulates replica `replica` and scores `methods` on targets from `forecast_start` on.
pub fn run_replica(config: &RunConfig, replica: usize, methods: &[Method]) -> Result<ReplicaSummary> {
    let sim = config.replica_simulation(replica);
    let truth = generate(&sim)?;
    let n = truth.series.len();
    let raw = RawSeries {
        t: (1..=n as i64).collect(),
        x: truth.series,
        b_true: Some(truth.bounds),
    };
    let data = Dataset::from_raw(&raw, config);
    let bounds = data.b_true.as_deref().unwrap_or_default();
    let windows = TrackingWindows::default();
    let mut reports = Vec::with_capacity(methods.len());
    let mut tracking = Vec::new();
    for (k, &method) in methods.iter().enumerate() {
        let trajectory = if method.is_tracker() {
            Some(track_series(&data.x, &data.t, config, method)?)
        } else {
            None
        };
        let mut rng = ChaCha8Rng::seed_from_u64(sim.seed ^ ((k as u64 + 1) << 32));
        reports.push(score_method(
            method,
            config,
            &data,
            trajectory.as_deref(),
            config.forecast_start..n,
            &mut rng,
        )?);
        if let Some(traj) = &trajectory {
            tracking.push(tracking_summary(method, traj, bounds, &sim.bound, &windows));
        }
    }
    let snapshot = reports.clone();
    for r in &mut reports {
        r.add_improvements(&snapshot);
    }
    Ok(ReplicaSummary {
        replica,
        seed: sim.seed,
        reports,
        tracking,
    })
}

/// Runs `config.replicas` replicas, in parallel when cores are available.
pub fn run_experiment(config: &RunConfig, methods: &[Method]) -> Result<Vec<ReplicaSummary>> {
    (0..config.replicas)
        .into_par_iter()
        .map(|r| run_replica(config, r, methods))
        .collect()
}

/// Mean over replicas of each method's mean CRPS (percent of capacity).
pub fn average_crps(summaries: &[ReplicaSummary], method: Method) -> f64 {
    mean(summaries.iter().filter_map(|s| s.report(method)).map(|r| r.mean_crps))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_replica_runs_every_method() {
        let mut cfg = RunConfig::default();
        cfg.simulation.length = 1600;
        cfg.forecast_start = 1200;
        cfg.ngd.iterations = 100;
        let s = run_replica(&cfg, 0, &DEFAULT_METHODS).unwrap();
        assert_eq!(s.reports.len(), 6);
        assert!(s.reports.iter().all(|r| r.n == 400));
        assert_eq!(s.tracking.len(), 3);
        let ideal = s.report(Method::Ideal).unwrap().mean_crps;
        let clim = s.report(Method::Climatology).unwrap().mean_crps;
        assert!(ideal < clim);
    }

    #[test]
    fn tracking_summary_splits_phases() {
        use crate::likelihood::ParamVector;
        let curve = BoundCurve::default();
        let bounds: Vec<f64> = (0..6000).map(|t| crate::synthetic::bound_at(t, &curve)).collect();
        let traj: Vec<TrajectoryRecord> = (0..6000)
            .map(|i| TrajectoryRecord {
                index: i,
                t: i as i64,
                theta: ParamVector::from_natural(vec![0.9], 1.0, 1.5, 1.0).unwrap(),
                b_tilde: 1.0,
                loss: 0.0,
            })
            .collect();
        let w = TrackingWindows {
            bound_from: 0,
            ..Default::default()
        };
        let s = tracking_summary(Method::Ongd, &traj, &bounds, &curve, &w);
        assert_eq!(s.lambda_in_band, 1.0);
        assert!((s.bound_mae.rising - s.bound_mae.falling).abs() < 1e-3);
        assert!((s.bound_mae.all - 0.5 / std::f64::consts::PI).abs() < 1e-3);
    }
}
