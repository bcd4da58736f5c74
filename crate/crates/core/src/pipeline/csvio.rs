//! CSV formats: input series, trajectories, forecasts and reports.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading
//! a file back reproduces the written values exactly.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, Writer};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evaluation::{max_marginal_gap, EvalReport};
use crate::likelihood::ParamVector;

use super::config::RunConfig;
use super::track::TrajectoryRecord;

/// A series as stored on disk, natural units.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawSeries {
    pub t: Vec<i64>,
    pub x: Vec<f64>,
    pub b_true: Option<Vec<f64>>,
}

/// A series rescaled by capacity and coarsened into the open support.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub t: Vec<i64>,
    pub x: Vec<f64>,
    pub b_true: Option<Vec<f64>>,
}

impl Dataset {
    pub fn from_raw(raw: &RawSeries, config: &RunConfig) -> Self {
        let clip = config.clip();
        let c = config.capacity;
        Dataset {
            t: raw.t.clone(),
            x: raw.x.iter().map(|&v| clip.apply(v / c)).collect(),
            b_true: raw.b_true.as_ref().map(|b| b.iter().map(|&v| v / c).collect()),
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Position of time label `t`.
    pub fn index_of(&self, t: i64) -> Option<usize> {
        self.t.binary_search(&t).ok()
    }
}

fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn writer(path: &Path) -> Result<Writer<File>> {
    Ok(Writer::from_writer(create(path)?))
}

fn finish<W: Write>(mut w: Writer<W>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn line_of(record: &StringRecord) -> usize {
    record.position().map_or(0, |p| p.line() as usize)
}

fn column(headers: &StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

fn required(headers: &StringRecord, name: &str) -> Result<usize> {
    column(headers, name).ok_or_else(|| Error::Data {
        line: 1,
        message: format!("missing column '{name}'"),
    })
}

fn field<'r>(record: &'r StringRecord, idx: usize, name: &str) -> Result<&'r str> {
    record.get(idx).map(str::trim).ok_or_else(|| Error::Data {
        line: line_of(record),
        message: format!("missing value for '{name}'"),
    })
}

fn number<T: std::str::FromStr>(record: &StringRecord, idx: usize, name: &str) -> Result<T> {
    let raw = field(record, idx, name)?;
    raw.parse().map_err(|_| Error::Data {
        line: line_of(record),
        message: format!("'{raw}' is not a valid value for '{name}'"),
    })
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(input)
}

/// Reads a headered `t, x [, b_true]` series.
pub fn read_series_from<R: Read>(input: R) -> Result<RawSeries> {
    let mut rdr = reader(input);
    let headers = rdr.headers()?.clone();
    let ti = required(&headers, "t")?;
    let xi = required(&headers, "x")?;
    let bi = column(&headers, "b_true");
    let mut out = RawSeries {
        b_true: bi.map(|_| Vec::new()),
        ..Default::default()
    };
    for record in rdr.records() {
        let record = record?;
        let t: i64 = number(&record, ti, "t")?;
        let x: f64 = number(&record, xi, "x")?;
        if !x.is_finite() {
            return Err(Error::Data {
                line: line_of(&record),
                message: format!("non-finite value {x}"),
            });
        }
        if out.t.last().is_some_and(|&prev| prev >= t) {
            return Err(Error::Data {
                line: line_of(&record),
                message: format!("time label {t} is not increasing"),
            });
        }
        if let (Some(bi), Some(b)) = (bi, out.b_true.as_mut()) {
            b.push(number(&record, bi, "b_true")?);
        }
        out.t.push(t);
        out.x.push(x);
    }
    if out.t.is_empty() {
        return Err(Error::Data {
            line: 1,
            message: "no data rows".into(),
        });
    }
    Ok(out)
}

pub fn read_series(path: &Path) -> Result<RawSeries> {
    read_series_from(open(path)?)
}

pub fn write_series(path: &Path, series: &RawSeries) -> Result<()> {
    let mut w = writer(path)?;
    match &series.b_true {
        Some(b) => {
            w.write_record(["t", "x", "b_true"])?;
            for ((t, x), b) in series.t.iter().zip(&series.x).zip(b) {
                w.write_record([t.to_string(), x.to_string(), b.to_string()])?;
            }
        }
        None => {
            w.write_record(["t", "x"])?;
            for (t, x) in series.t.iter().zip(&series.x) {
                w.write_record([t.to_string(), x.to_string()])?;
            }
        }
    }
    finish(w, path)
}

/// Columns `t, lambda_1..lambda_p, sigma2, nu, b_hat, b_tilde, loss`.
pub fn write_trajectory(path: &Path, records: &[TrajectoryRecord]) -> Result<()> {
    let p = records.first().map_or(1, |r| r.theta.order());
    let mut w = writer(path)?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=p).map(|k| format!("lambda_{k}")));
    header.extend(["sigma2", "nu", "b_hat", "b_tilde", "loss"].map(String::from));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.t.to_string()];
        row.extend(r.theta.lambdas.iter().map(f64::to_string));
        row.push(r.theta.sigma2().to_string());
        row.push(r.theta.nu().to_string());
        row.push(r.theta.b.to_string());
        row.push(r.b_tilde.to_string());
        row.push(r.loss.to_string());
        w.write_record(&row)?;
    }
    finish(w, path)
}

/// Reads a trajectory and places each record on the data's time axis.
pub fn read_trajectory_from<R: Read>(input: R, data: &Dataset) -> Result<Vec<TrajectoryRecord>> {
    let mut rdr = reader(input);
    let headers = rdr.headers()?.clone();
    let ti = required(&headers, "t")?;
    let lambda_cols: Vec<usize> = (1..)
        .map_while(|k| column(&headers, &format!("lambda_{k}")))
        .collect();
    if lambda_cols.is_empty() {
        return Err(Error::Data {
            line: 1,
            message: "missing column 'lambda_1'".into(),
        });
    }
    let si = required(&headers, "sigma2")?;
    let ni = required(&headers, "nu")?;
    let bi = required(&headers, "b_hat")?;
    let bti = required(&headers, "b_tilde")?;
    let li = required(&headers, "loss")?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let t: i64 = number(&record, ti, "t")?;
        let index = data.index_of(t).ok_or_else(|| Error::Data {
            line: line_of(&record),
            message: format!("time {t} does not occur in the data"),
        })?;
        let lambdas = lambda_cols
            .iter()
            .map(|&c| number(&record, c, "lambda"))
            .collect::<Result<Vec<f64>>>()?;
        let theta = ParamVector::from_natural(
            lambdas,
            number(&record, si, "sigma2")?,
            number(&record, ni, "nu")?,
            number(&record, bi, "b_hat")?,
        )
        .map_err(|e| Error::Data {
            line: line_of(&record),
            message: e.to_string(),
        })?;
        out.push(TrajectoryRecord {
            index,
            t,
            theta,
            b_tilde: number(&record, bti, "b_tilde")?,
            loss: number(&record, li, "loss")?,
        });
    }
    Ok(out)
}

pub fn read_trajectory(path: &Path, data: &Dataset) -> Result<Vec<TrajectoryRecord>> {
    read_trajectory_from(open(path)?, data)
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    method: &'a str,
    n: usize,
    mean_crps_pct: f64,
    crps_sd_pct: f64,
    pit_chi_square: f64,
    pit_p_value: f64,
    max_marginal_gap: f64,
}

#[derive(Serialize)]
struct PitRow {
    bin: usize,
    lower: f64,
    upper: f64,
    count: u64,
}

#[derive(Serialize)]
struct MarginalRow {
    y: f64,
    predictive: f64,
    empirical: f64,
}

#[derive(Serialize)]
struct CrpsRow {
    t: i64,
    crps: f64,
}

/// Writes `report.csv`, `improvements.csv` and per-method PIT, marginal and CRPS files.
pub fn write_reports(dir: &Path, reports: &[EvalReport], time_labels: &[i64]) -> Result<()> {
    let path = dir.join("report.csv");
    let mut w = writer(&path)?;
    for r in reports {
        w.serialize(SummaryRow {
            method: &r.method,
            n: r.n,
            mean_crps_pct: r.mean_crps,
            crps_sd_pct: r.crps_sd,
            pit_chi_square: r.pit.chi_square(),
            pit_p_value: r.pit.uniformity_p_value(),
            max_marginal_gap: max_marginal_gap(&r.marginal),
        })?;
    }
    finish(w, &path)?;

    let path = dir.join("improvements.csv");
    let mut w = writer(&path)?;
    w.write_record(["method", "reference", "improvement_pct"])?;
    for r in reports {
        for (reference, imp) in &r.improvements {
            w.write_record([r.method.as_str(), reference.as_str(), &imp.to_string()])?;
        }
    }
    finish(w, &path)?;

    for r in reports {
        let path = dir.join(format!("pit_{}.csv", r.method));
        let mut w = writer(&path)?;
        let bins = r.pit.counts.len();
        for (bin, &count) in r.pit.counts.iter().enumerate() {
            w.serialize(PitRow {
                bin,
                lower: bin as f64 / bins as f64,
                upper: (bin + 1) as f64 / bins as f64,
                count,
            })?;
        }
        finish(w, &path)?;

        let path = dir.join(format!("marginal_{}.csv", r.method));
        let mut w = writer(&path)?;
        for m in &r.marginal {
            w.serialize(MarginalRow {
                y: m.y,
                predictive: m.predictive,
                empirical: m.empirical,
            })?;
        }
        finish(w, &path)?;

        let path = dir.join(format!("crps_{}.csv", r.method));
        let mut w = writer(&path)?;
        for &(i, crps) in &r.per_time {
            let t = time_labels.get(i).copied().unwrap_or(i as i64);
            w.serialize(CrpsRow { t, crps })?;
        }
        finish(w, &path)?;
    }
    Ok(())
}

/// Writes `key,value` pairs.
pub fn write_key_values(path: &Path, rows: &[(String, String)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["key", "value"])?;
    for (k, v) in rows {
        w.write_record([k, v])?;
    }
    finish(w, path)
}
