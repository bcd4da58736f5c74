//! Forecast generation, the forecast CSV format and streaming scoring.
//!
//! A forecast issued at index `i` reads only `x_0..=x_i` and targets `x_{i+1}`.
//! Tracked methods forecast from the trajectory record at `i`; benchmarks are
//! built from the history. Ensembles are written to disk as a recipe
//! (`climatology:CAP`, `persistence:N`) or an explicit `;`-separated member
//! list, because a climatology ensemble per row would be far too large.

use std::fmt;
use std::io::Read;
use std::path::Path;

use csv::{ReaderBuilder, StringRecord};
use rand::Rng;

use crate::error::{Error, Result};
use crate::evaluation::{EvalReport, ScoreAccumulator};
use crate::forecast::{
    persistence_forecast, predictive_distribution, project_theta, Climatology, Clip, ForecastKind,
    ForecastRecord, GlnForecast,
};
use crate::gln::GlnParams;
use crate::synthetic::true_conditional;

use super::config::{Method, RunConfig};
use super::csvio::Dataset;
use super::track::TrajectoryRecord;

/// Central 75% and 95% interval endpoints written with each forecast.
pub const QUANTILE_LEVELS: [f64; 4] = [0.025, 0.125, 0.875, 0.975];

/// Number of grid points of the marginal calibration curve.
pub const MARGINAL_GRID_POINTS: usize = 101;

#[derive(Debug, Clone, PartialEq)]
pub enum EnsembleSource {
    Climatology { cap: usize },
    Persistence { n_err: usize },
    Members(Vec<f64>),
}

impl fmt::Display for EnsembleSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnsembleSource::Climatology { cap } => write!(f, "climatology:{cap}"),
            EnsembleSource::Persistence { n_err } => write!(f, "persistence:{n_err}"),
            EnsembleSource::Members(m) => {
                let parts: Vec<String> = m.iter().map(f64::to_string).collect();
                f.write_str(&parts.join(";"))
            }
        }
    }
}

impl std::str::FromStr for EnsembleSource {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        let count = |v: &str| v.parse::<usize>().map_err(|_| format!("bad ensemble size '{v}'"));
        if let Some(v) = s.strip_prefix("climatology:") {
            return Ok(EnsembleSource::Climatology { cap: count(v)? });
        }
        if let Some(v) = s.strip_prefix("persistence:") {
            return Ok(EnsembleSource::Persistence { n_err: count(v)? });
        }
        let members = s
            .split(';')
            .map(|m| m.trim().parse::<f64>().map_err(|_| format!("bad ensemble member '{m}'")))
            .collect::<std::result::Result<Vec<f64>, String>>()?;
        if members.is_empty() || members.iter().any(|m| !m.is_finite()) {
            return Err("ensemble members must be finite".into());
        }
        Ok(EnsembleSource::Members(members))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ForecastSpec {
    Gln(GlnForecast),
    Ensemble(EnsembleSource),
}

/// One row of the forecast CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRow {
    pub issue_index: usize,
    pub method: String,
    pub spec: ForecastSpec,
    pub quantiles: [f64; 4],
}

/// Turns ensemble recipes into members, keeping a running climatology.
#[derive(Debug, Clone)]
pub struct EnsembleBuilder {
    clim: Climatology,
    seen: usize,
    clip: Clip,
}

impl EnsembleBuilder {
    pub fn new(clip: Clip) -> Self {
        EnsembleBuilder {
            clim: Climatology::default(),
            seen: 0,
            clip,
        }
    }

    pub fn build(&mut self, source: &EnsembleSource, history: &[f64]) -> Result<Vec<f64>> {
        match source {
            EnsembleSource::Climatology { cap } => {
                if history.len() < self.seen {
                    self.clim = Climatology::default();
                    self.seen = 0;
                }
                for &x in &history[self.seen..] {
                    self.clim.push(x);
                }
                self.seen = history.len();
                self.clim.ensemble(*cap)
            }
            EnsembleSource::Persistence { n_err } => persistence_forecast(history, *n_err, self.clip),
            EnsembleSource::Members(m) => {
                let mut m = m.clone();
                m.sort_by(f64::total_cmp);
                Ok(m)
            }
        }
    }
}

/// Inverse of the ensemble step cdf.
pub fn ensemble_quantile(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    let k = ((prob * n as f64).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

fn quantiles(kind: &ForecastKind) -> Result<[f64; 4]> {
    let mut q = [0.0; 4];
    for (out, &p) in q.iter_mut().zip(&QUANTILE_LEVELS) {
        *out = match kind {
            ForecastKind::Gln(g) => g.quantile(p)?,
            ForecastKind::Ensemble(m) => ensemble_quantile(m, p),
        };
    }
    Ok(q)
}

/// Streaming source of forecasts for one method.
pub struct Forecaster<'a> {
    method: Method,
    order: usize,
    delta: f64,
    trajectory: &'a [TrajectoryRecord],
    ideal: Option<(&'a [f64], &'a [f64], f64, f64)>,
    source: Option<EnsembleSource>,
    builder: EnsembleBuilder,
}

impl<'a> Forecaster<'a> {
    /// `trajectory` is required for tracked methods and ignored otherwise.
    pub fn new(
        method: Method,
        config: &'a RunConfig,
        data: &'a Dataset,
        trajectory: Option<&'a [TrajectoryRecord]>,
    ) -> Result<Self> {
        let trajectory = match (method.is_tracker(), trajectory) {
            (true, Some(t)) => t,
            (true, None) => return Err(Error::Input(format!("{method} forecasts need a trajectory"))),
            (false, _) => &[],
        };
        if let Some(r) = trajectory.first() {
            if r.theta.order() != config.order {
                return Err(Error::Input(format!(
                    "trajectory has order {}, config has order {}",
                    r.theta.order(),
                    config.order
                )));
            }
        }
        let ideal = match method {
            Method::Ideal => {
                let b = data
                    .b_true
                    .as_deref()
                    .ok_or_else(|| Error::Input("the ideal forecaster needs a b_true column".into()))?;
                let s = &config.simulation;
                Some((b, s.lambdas.as_slice(), s.sigma2, s.nu))
            }
            _ => None,
        };
        let source = match method {
            Method::Climatology => Some(EnsembleSource::Climatology {
                cap: config.climatology_cap,
            }),
            Method::Persistence => Some(EnsembleSource::Persistence {
                n_err: config.persistence_errors,
            }),
            _ => None,
        };
        Ok(Forecaster {
            method,
            order: config.order,
            delta: config.delta,
            trajectory,
            ideal,
            source,
            builder: EnsembleBuilder::new(config.clip()),
        })
    }

    fn estimate_at(&self, i: usize) -> Result<&TrajectoryRecord> {
        self.trajectory
            .binary_search_by_key(&i, |r| r.index)
            .map(|k| &self.trajectory[k])
            .map_err(|_| Error::Input(format!("{} trajectory has no estimate at index {i}", self.method)))
    }

    /// Forecast of `x_{i+1}` from `history = x_0..=x_i`.
    pub fn forecast(&mut self, history: &[f64]) -> Result<(ForecastSpec, ForecastRecord)> {
        let i = history
            .len()
            .checked_sub(1)
            .ok_or_else(|| Error::Input("cannot forecast from an empty history".into()))?;
        if let Some((bounds, lambdas, sigma2, nu)) = self.ideal {
            let b = *bounds
                .get(i + 1)
                .ok_or_else(|| Error::Input(format!("no true bound for index {}", i + 1)))?;
            if i + 1 < lambdas.len() {
                return Err(Error::Input("history shorter than the true order".into()));
            }
            let g: GlnParams = true_conditional(history, b, i + 1, lambdas, sigma2, nu);
            return Ok(gln_pair(i, g));
        }
        if let Some(source) = &self.source {
            let members = self.builder.build(source, history)?;
            return Ok((
                ForecastSpec::Ensemble(source.clone()),
                ForecastRecord {
                    issue_time: i,
                    kind: ForecastKind::Ensemble(members),
                },
            ));
        }
        if i + 1 < self.order {
            return Err(Error::Input("history shorter than the model order".into()));
        }
        let theta = &self.estimate_at(i)?.theta;
        let recent: Vec<f64> = history[i + 1 - self.order..].iter().rev().copied().collect();
        let projected = project_theta(theta, &recent, self.delta)?;
        Ok(gln_pair(i, predictive_distribution(&projected, &recent)?))
    }
}

fn gln_pair(i: usize, g: GlnForecast) -> (ForecastSpec, ForecastRecord) {
    (
        ForecastSpec::Gln(g),
        ForecastRecord {
            issue_time: i,
            kind: ForecastKind::Gln(g),
        },
    )
}

/// Issue indices whose targets fall in `[first_target, end_target)`.
pub fn issue_range(first_target: usize, end_target: usize) -> std::ops::Range<usize> {
    first_target.max(1) - 1..end_target.max(1) - 1
}

/// Forecast rows for every issue index in `issues`.
pub fn build_forecasts(
    method: Method,
    config: &RunConfig,
    data: &Dataset,
    trajectory: Option<&[TrajectoryRecord]>,
    issues: std::ops::Range<usize>,
) -> Result<Vec<ForecastRow>> {
    let mut f = Forecaster::new(method, config, data, trajectory)?;
    let end = issues.end.min(data.len().saturating_sub(1));
    let mut rows = Vec::with_capacity(end.saturating_sub(issues.start));
    for i in issues.start..end {
        let (spec, record) = f.forecast(&data.x[..=i])?;
        rows.push(ForecastRow {
            issue_index: i,
            method: method.name().to_string(),
            quantiles: quantiles(&record.kind)?,
            spec,
        });
    }
    Ok(rows)
}

/// Forecasts and scores in one pass, never holding more than one ensemble.
pub fn score_method<R: Rng + ?Sized>(
    method: Method,
    config: &RunConfig,
    data: &Dataset,
    trajectory: Option<&[TrajectoryRecord]>,
    targets: std::ops::Range<usize>,
    rng: &mut R,
) -> Result<EvalReport> {
    let mut f = Forecaster::new(method, config, data, trajectory)?;
    let mut acc = ScoreAccumulator::new(method.name(), 1.0, marginal_grid(data));
    let end = targets.end.min(data.len());
    for target in targets.start.max(1)..end {
        let (_, record) = f.forecast(&data.x[..target])?;
        acc.add(&record, data.x[target], rng)?;
    }
    acc.finish()
}

/// Grid for the marginal calibration curve, wide enough for the largest value or bound.
pub fn marginal_grid(data: &Dataset) -> Vec<f64> {
    let top = data
        .x
        .iter()
        .chain(data.b_true.iter().flatten())
        .copied()
        .fold(1.0, f64::max);
    crate::evaluation::default_grid(top, MARGINAL_GRID_POINTS)
}

const HEADER: [&str; 13] = [
    "issue_t", "t", "method", "kind", "mu", "sigma2", "nu", "b_tilde", "q025", "q125", "q875", "q975", "members",
];

pub fn write_forecasts(path: &Path, rows: &[ForecastRow], data: &Dataset) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(HEADER)?;
    for r in rows {
        let issue_t = data.t[r.issue_index].to_string();
        let t = data
            .t
            .get(r.issue_index + 1)
            .ok_or_else(|| Error::Input("forecast target lies past the data".into()))?
            .to_string();
        let (kind, params, members) = match &r.spec {
            ForecastSpec::Gln(g) => (
                "gln",
                [g.mu, g.sigma2, g.nu, g.b].map(|v| v.to_string()),
                String::new(),
            ),
            ForecastSpec::Ensemble(src) => ("ensemble", Default::default(), src.to_string()),
        };
        let mut row = vec![issue_t, t, r.method.clone(), kind.to_string()];
        row.extend(params);
        row.extend(r.quantiles.iter().map(f64::to_string));
        row.push(members);
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn data_err(record: &StringRecord, message: String) -> Error {
    Error::Data {
        line: record.position().map_or(0, |p| p.line() as usize),
        message,
    }
}

fn get<'r>(record: &'r StringRecord, idx: usize) -> Result<&'r str> {
    record
        .get(idx)
        .ok_or_else(|| data_err(record, format!("missing column '{}'", HEADER[idx])))
}

fn num(record: &StringRecord, idx: usize) -> Result<f64> {
    let v = get(record, idx)?;
    v.parse()
        .map_err(|_| data_err(record, format!("'{v}' is not a valid value for '{}'", HEADER[idx])))
}

/// Reads forecasts and checks that each row's issue and target times are consecutive data times.
pub fn read_forecasts_from<R: Read>(input: R, data: &Dataset) -> Result<Vec<ForecastRow>> {
    let mut rdr = ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(HEADER.iter().copied()) {
        return Err(Error::Data {
            line: 1,
            message: format!("expected header {}", HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let issue_t: i64 = get(&record, 0)?
            .parse()
            .map_err(|_| data_err(&record, "bad issue_t".into()))?;
        let t: i64 = get(&record, 1)?
            .parse()
            .map_err(|_| data_err(&record, "bad t".into()))?;
        let issue_index = data
            .index_of(issue_t)
            .ok_or_else(|| data_err(&record, format!("issue time {issue_t} does not occur in the data")))?;
        if data.t.get(issue_index + 1) != Some(&t) {
            return Err(data_err(&record, format!("target {t} does not follow issue time {issue_t}")));
        }
        let spec = match get(&record, 3)? {
            "gln" => ForecastSpec::Gln(
                GlnParams::new(num(&record, 4)?, num(&record, 5)?, num(&record, 6)?, num(&record, 7)?)
                    .map_err(|e| data_err(&record, e.to_string()))?,
            ),
            "ensemble" => ForecastSpec::Ensemble(get(&record, 12)?.parse().map_err(|e| data_err(&record, e))?),
            other => return Err(data_err(&record, format!("unknown forecast kind '{other}'"))),
        };
        let mut quantiles = [0.0; 4];
        for (k, q) in quantiles.iter_mut().enumerate() {
            *q = num(&record, 8 + k)?;
        }
        rows.push(ForecastRow {
            issue_index,
            method: get(&record, 2)?.to_string(),
            spec,
            quantiles,
        });
    }
    Ok(rows)
}

pub fn read_forecasts(path: &Path, data: &Dataset) -> Result<Vec<ForecastRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_forecasts_from(file, data)
}

/// Scores stored forecast rows against the data, grouped by method in order of appearance.
pub fn score_rows<R: Rng + ?Sized>(
    rows: &[ForecastRow],
    data: &Dataset,
    config: &RunConfig,
    rng: &mut R,
) -> Result<Vec<EvalReport>> {
    let mut methods: Vec<&str> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let grid = marginal_grid(data);
    let mut reports = Vec::new();
    for m in methods {
        let mut acc = ScoreAccumulator::new(m, 1.0, grid.clone());
        let mut builder = EnsembleBuilder::new(config.clip());
        for r in rows.iter().filter(|r| r.method == m) {
            let history = &data.x[..=r.issue_index];
            let kind = match &r.spec {
                ForecastSpec::Gln(g) => ForecastKind::Gln(*g),
                ForecastSpec::Ensemble(src) => ForecastKind::Ensemble(builder.build(src, history)?),
            };
            let record = ForecastRecord {
                issue_time: r.issue_index,
                kind,
            };
            acc.add(&record, data.x[r.issue_index + 1], rng)?;
        }
        reports.push(acc.finish()?);
    }
    if reports.is_empty() {
        return Err(Error::Input("no forecasts overlap the data".into()));
    }
    Ok(reports)
}
