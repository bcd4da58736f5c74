//! Command drivers behind the CLI subcommands.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evaluation::EvalReport;
use crate::synthetic::generate;

use super::config::{Method, RunConfig};
use super::csvio::{
    read_series, read_trajectory, write_key_values, write_reports, write_series, write_trajectory, Dataset,
    RawSeries,
};
use super::experiment::{run_experiment, ReplicaSummary};
use super::forecasting::{
    build_forecasts, issue_range, read_forecasts, score_method, score_rows, write_forecasts, ForecastRow,
};
use super::track::{track_series, Tracker, TrajectoryRecord};

pub fn series_path(out: &Path, replica: usize) -> PathBuf {
    out.join(format!("series_{replica:03}.csv"))
}

pub fn trajectory_path(out: &Path, method: Method) -> PathBuf {
    out.join(format!("trajectory_{method}.csv"))
}

pub fn forecast_path(out: &Path, method: Method) -> PathBuf {
    out.join(format!("forecasts_{method}.csv"))
}

pub fn load_data(path: &Path, config: &RunConfig) -> Result<Dataset> {
    Ok(Dataset::from_raw(&read_series(path)?, config))
}

/// Writes one `t, x, b_true` file per replica plus `truth.csv` with the generating parameters.
pub fn cmd_simulate(config: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::with_capacity(config.replicas);
    let mut truth_rows = Vec::new();
    for r in 0..config.replicas {
        let sim = config.replica_simulation(r);
        let truth = generate(&sim)?;
        let series = RawSeries {
            t: (1..=truth.series.len() as i64).collect(),
            x: truth.series,
            b_true: Some(truth.bounds),
        };
        let path = series_path(out, r);
        write_series(&path, &series)?;
        paths.push(path);
        truth_rows.push((format!("replica_{r:03}.seed"), sim.seed.to_string()));
    }
    let s = &config.simulation;
    let lambdas: Vec<String> = s.lambdas.iter().map(f64::to_string).collect();
    let mut rows = vec![
        ("length".to_string(), s.length.to_string()),
        ("lambda".to_string(), lambdas.join(";")),
        ("sigma2".to_string(), s.sigma2.to_string()),
        ("nu".to_string(), s.nu.to_string()),
        ("bound".to_string(), format!("{:?}", s.bound)),
    ];
    rows.extend(truth_rows);
    write_key_values(&out.join("truth.csv"), &rows)?;
    Ok(paths)
}

pub fn cmd_track(config: &RunConfig, data_path: &Path, out: &Path) -> Result<Vec<TrajectoryRecord>> {
    let data = load_data(data_path, config)?;
    let records = track_series(&data.x, &data.t, config, config.method)?;
    write_trajectory(&trajectory_path(out, config.method), &records)?;
    Ok(records)
}

/// Forecasts from `forecast_start` on. Tracked methods read their trajectory
/// from `trajectory`, or track afresh when none is given.
pub fn cmd_forecast(
    config: &RunConfig,
    data_path: &Path,
    trajectory: Option<&Path>,
    out: &Path,
) -> Result<Vec<ForecastRow>> {
    let data = load_data(data_path, config)?;
    let method = config.method;
    let traj = match (method.is_tracker(), trajectory) {
        (false, _) => None,
        (true, Some(p)) => Some(read_trajectory(p, &data)?),
        (true, None) => Some(track_series(&data.x, &data.t, config, method)?),
    };
    if data.len() <= config.forecast_start {
        return Err(Error::Input(format!(
            "forecasting from {} needs more than {} observations",
            config.forecast_start,
            data.len()
        )));
    }
    let rows = build_forecasts(
        method,
        config,
        &data,
        traj.as_deref(),
        issue_range(config.forecast_start, data.len()),
    )?;
    write_forecasts(&forecast_path(out, method), &rows, &data)?;
    Ok(rows)
}

/// Scores every forecast file and compares methods against each other.
pub fn cmd_evaluate(config: &RunConfig, data_path: &Path, forecasts: &[PathBuf], out: &Path) -> Result<Vec<EvalReport>> {
    if forecasts.is_empty() {
        return Err(Error::Input("no forecast files given".into()));
    }
    let data = load_data(data_path, config)?;
    let mut rows = Vec::new();
    for f in forecasts {
        rows.extend(read_forecasts(f, &data)?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut reports = score_rows(&rows, &data, config, &mut rng)?;
    let snapshot = reports.clone();
    for r in &mut reports {
        r.add_improvements(&snapshot);
    }
    write_reports(out, &reports, &data.t)?;
    Ok(reports)
}

/// One hyperparameter combination of the backtest grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub order: usize,
    pub alpha: Option<f64>,
    pub eta: Option<f64>,
    pub minibatch: Option<usize>,
    pub persistence_errors: Option<usize>,
}

impl GridCell {
    pub fn apply(&self, base: &RunConfig) -> RunConfig {
        let mut c = base.clone();
        c.order = self.order;
        match base.method {
            Method::Ongd => {
                c.ongd_eta = self.eta.unwrap_or(c.ongd_eta);
                c.ongd_minibatch = self.minibatch.unwrap_or(c.ongd_minibatch);
            }
            Method::RmleB | Method::Rmle1 => c.rmle_alpha = self.alpha.unwrap_or(c.rmle_alpha),
            Method::Ngd => {
                c.ngd.alpha = self.alpha.unwrap_or(c.ngd.alpha);
                c.ngd.learning_rate = self.eta.unwrap_or(c.ngd.learning_rate);
            }
            Method::Persistence => {
                c.persistence_errors = self.persistence_errors.unwrap_or(c.persistence_errors)
            }
            Method::Climatology | Method::Ideal => {}
        }
        c
    }

    pub fn describe(&self) -> Vec<(String, String)> {
        let mut v = vec![("order".to_string(), self.order.to_string())];
        let mut opt = |k: &str, s: Option<String>| {
            if let Some(s) = s {
                v.push((k.to_string(), s));
            }
        };
        opt("alpha", self.alpha.map(|a| a.to_string()));
        opt("eta", self.eta.map(|a| a.to_string()));
        opt("m", self.minibatch.map(|a| a.to_string()));
        opt("persistence_errors", self.persistence_errors.map(|a| a.to_string()));
        v
    }
}

/// Cartesian grid for the configured method.
pub fn backtest_grid(config: &RunConfig) -> Result<Vec<GridCell>> {
    let empty = GridCell {
        order: config.order,
        alpha: None,
        eta: None,
        minibatch: None,
        persistence_errors: None,
    };
    let orders: Vec<usize> = if config.method.is_tracker() {
        config.grid_order.clone()
    } else {
        vec![config.order]
    };
    let mut cells = Vec::new();
    for &order in &orders {
        let base = GridCell { order, ..empty };
        match config.method {
            Method::Ongd => {
                for &eta in &config.grid_eta {
                    for &m in &config.grid_minibatch {
                        cells.push(GridCell {
                            eta: Some(eta),
                            minibatch: Some(m),
                            ..base
                        });
                    }
                }
            }
            Method::RmleB | Method::Rmle1 => {
                cells.extend(config.grid_alpha.iter().map(|&a| GridCell { alpha: Some(a), ..base }));
            }
            Method::Ngd => {
                for &a in &config.grid_alpha {
                    for &eta in &config.grid_eta {
                        cells.push(GridCell {
                            alpha: Some(a),
                            eta: Some(eta),
                            ..base
                        });
                    }
                }
            }
            Method::Persistence => cells.extend(config.grid_persistence.iter().map(|&n| GridCell {
                persistence_errors: Some(n),
                ..base
            })),
            Method::Climatology => cells.push(base),
            Method::Ideal => return Err(Error::Config("the ideal forecaster has nothing to tune".into())),
        }
    }
    if cells.is_empty() {
        return Err(Error::Config("backtest grid is empty".into()));
    }
    Ok(cells)
}

/// Argmin of validation CRPS; ties go to smaller `m`, then smaller `η`.
pub fn select_winner(scored: &[(GridCell, f64)]) -> Option<(GridCell, f64)> {
    scored.iter().copied().min_by(|a, b| {
        a.1.total_cmp(&b.1)
            .then(a.0.minibatch.cmp(&b.0.minibatch))
            .then(a.0.eta.unwrap_or(0.0).total_cmp(&b.0.eta.unwrap_or(0.0)))
            .then(a.0.order.cmp(&b.0.order))
            .then(a.0.alpha.unwrap_or(0.0).total_cmp(&b.0.alpha.unwrap_or(0.0)))
            .then(a.0.persistence_errors.cmp(&b.0.persistence_errors))
    })
}

#[derive(Debug, Clone)]
pub struct BacktestOutcome {
    pub scored: Vec<(GridCell, f64)>,
    pub winner: GridCell,
    pub validation_crps: f64,
    pub test: EvalReport,
}

fn check_split(config: &RunConfig, n: usize) -> Result<()> {
    if !(config.validation_start >= 1 && config.validation_start < config.test_start && config.test_start < n) {
        return Err(Error::Config(format!(
            "need 1 <= validation_start < test_start < {n}, got {} and {}",
            config.validation_start, config.test_start
        )));
    }
    Ok(())
}

fn score_cell(config: &RunConfig, data: &Dataset, targets: std::ops::Range<usize>) -> Result<EvalReport> {
    let method = config.method;
    let trajectory = if method.is_tracker() {
        let first = Tracker::new(config, method)?.first_index();
        if first + 1 > targets.start {
            return Err(Error::Config(format!(
                "{method} produces its first estimate at index {first}, after the first forecast is due"
            )));
        }
        Some(track_series(&data.x, &data.t, config, method)?)
    } else {
        None
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    score_method(method, config, data, trajectory.as_deref(), targets, &mut rng)
}

/// Grid search on the validation slice, then a test run with the winner.
pub fn backtest(config: &RunConfig, data: &Dataset) -> Result<BacktestOutcome> {
    check_split(config, data.len())?;
    let cells = backtest_grid(config)?;
    let (vs, ts) = (config.validation_start, config.test_start);
    let validation = Dataset {
        t: data.t[..ts].to_vec(),
        x: data.x[..ts].to_vec(),
        b_true: data.b_true.as_ref().map(|b| b[..ts].to_vec()),
    };
    // a diverging cell loses the search instead of aborting it
    let scored = cells
        .par_iter()
        .map(|cell| match score_cell(&cell.apply(config), &validation, vs..ts) {
            Ok(r) => Ok((*cell, r.mean_crps)),
            Err(Error::Divergence(_)) => Ok((*cell, f64::INFINITY)),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    let (winner, validation_crps) = select_winner(&scored).expect("grid is non-empty");
    if !validation_crps.is_finite() {
        return Err(Error::Divergence("every grid cell diverged on the validation slice".into()));
    }
    let test = score_cell(&winner.apply(config), data, ts..data.len())?;
    Ok(BacktestOutcome {
        scored,
        winner,
        validation_crps,
        test,
    })
}

pub fn cmd_backtest(config: &RunConfig, data_path: &Path, out: &Path) -> Result<BacktestOutcome> {
    let data = load_data(data_path, config)?;
    let outcome = backtest(config, &data)?;
    let mut grid = csv::Writer::from_writer(
        std::fs::File::create(out.join("grid.csv")).map_err(|e| Error::io(out.join("grid.csv"), e))?,
    );
    grid.write_record(["order", "alpha", "eta", "m", "persistence_errors", "validation_crps_pct"])?;
    let show = |v: Option<String>| v.unwrap_or_default();
    for (c, crps) in &outcome.scored {
        grid.write_record([
            c.order.to_string(),
            show(c.alpha.map(|v| v.to_string())),
            show(c.eta.map(|v| v.to_string())),
            show(c.minibatch.map(|v| v.to_string())),
            show(c.persistence_errors.map(|v| v.to_string())),
            crps.to_string(),
        ])?;
    }
    grid.flush().map_err(|e| Error::io(out.join("grid.csv"), e))?;
    let mut chosen = vec![("method".to_string(), config.method.to_string())];
    chosen.extend(outcome.winner.describe());
    chosen.push(("validation_crps_pct".into(), outcome.validation_crps.to_string()));
    chosen.push(("test_crps_pct".into(), outcome.test.mean_crps.to_string()));
    write_key_values(&out.join("chosen.csv"), &chosen)?;
    write_reports(out, std::slice::from_ref(&outcome.test), &data.t)?;
    Ok(outcome)
}

/// Monte Carlo run on synthetic replicas; writes `experiment.csv` and `tracking.csv`.
pub fn cmd_experiment(config: &RunConfig, methods: &[Method], out: &Path) -> Result<Vec<ReplicaSummary>> {
    let summaries = run_experiment(config, methods)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let path = out.join("experiment.csv");
    let mut w = csv::Writer::from_writer(std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?);
    w.write_record(["replica", "seed", "method", "n", "mean_crps_pct", "pit_p_value"])?;
    for s in &summaries {
        for r in &s.reports {
            w.write_record([
                s.replica.to_string(),
                s.seed.to_string(),
                r.method.clone(),
                r.n.to_string(),
                r.mean_crps.to_string(),
                r.pit.uniformity_p_value().to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    let path = out.join("tracking.csv");
    let mut w = csv::Writer::from_writer(std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?);
    w.write_record(["replica", "method", "lambda_in_band", "b_mae", "b_mae_rising", "b_mae_falling"])?;
    for s in &summaries {
        for t in &s.tracking {
            w.write_record([
                s.replica.to_string(),
                t.method.to_string(),
                t.lambda_in_band.to_string(),
                t.bound_mae.all.to_string(),
                t.bound_mae.rising.to_string(),
                t.bound_mae.falling.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(summaries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(m: usize, eta: f64) -> GridCell {
        GridCell {
            order: 1,
            alpha: None,
            eta: Some(eta),
            minibatch: Some(m),
            persistence_errors: None,
        }
    }

    #[test]
    fn winner_breaks_ties_by_m_then_eta() {
        let scored = vec![(cell(50, 0.001), 6.0), (cell(20, 0.003), 6.0), (cell(20, 0.001), 6.0), (cell(5, 0.001), 6.1)];
        let (w, crps) = select_winner(&scored).unwrap();
        assert_eq!(w, cell(20, 0.001));
        assert_eq!(crps, 6.0);
        let scored = vec![(cell(150, 0.003), 5.9), (cell(1, 0.001), 6.0)];
        assert_eq!(select_winner(&scored).unwrap().0, cell(150, 0.003));
    }

    #[test]
    fn ongd_grid_covers_minibatch_sizes() {
        let cfg = RunConfig::default();
        let grid = backtest_grid(&cfg).unwrap();
        let mut ms: Vec<usize> = grid.iter().filter_map(|c| c.minibatch).collect();
        ms.sort();
        ms.dedup();
        assert_eq!(ms, vec![1, 5, 10, 20, 50, 100, 150]);
        let empty = RunConfig {
            grid_eta: vec![],
            ..Default::default()
        };
        assert!(matches!(backtest_grid(&empty), Err(Error::Config(_))));
    }

    #[test]
    fn bad_split_is_rejected() {
        let data = Dataset {
            t: (1..=100).collect(),
            x: vec![0.5; 100],
            b_true: None,
        };
        let cfg = RunConfig {
            validation_start: 50,
            test_start: 40,
            ..Default::default()
        };
        assert!(matches!(backtest(&cfg, &data), Err(Error::Config(_))));
    }
}
