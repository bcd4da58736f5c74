//! Plain-text `key = value` run configuration.
//!
//! One setting per line, `#` starts a comment. Unknown keys are rejected.
//! Hyperparameters are given in natural units (σ², ν) and converted to the
//! unconstrained coordinates when a run starts.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::forecast::{Clip, CLIMATOLOGY_CAP, DEFAULT_PERSISTENCE_ERRORS};
use crate::likelihood::ParamVector;
use crate::optim::NgdConfig;
use crate::synthetic::{BoundCurve, SyntheticConfig};
use crate::DEFAULT_DELTA;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Ngd,
    RmleB,
    Rmle1,
    Ongd,
    Climatology,
    Persistence,
    /// The true generating distribution; needs a `b_true` column.
    Ideal,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Ngd,
        Method::RmleB,
        Method::Rmle1,
        Method::Ongd,
        Method::Climatology,
        Method::Persistence,
        Method::Ideal,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Ngd => "ngd",
            Method::RmleB => "rmle_b",
            Method::Rmle1 => "rmle_1",
            Method::Ongd => "ongd",
            Method::Climatology => "climatology",
            Method::Persistence => "persistence",
            Method::Ideal => "ideal",
        }
    }

    /// Methods that track a parameter vector.
    pub fn is_tracker(&self) -> bool {
        matches!(self, Method::Ngd | Method::RmleB | Method::Rmle1 | Method::Ongd)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['.', '-'], "_");
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

/// Every setting a command may read.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    pub order: usize,
    pub seed: u64,
    pub replicas: usize,

    pub init_lambda: f64,
    pub init_sigma2: f64,
    pub init_nu: f64,
    pub init_b: f64,

    pub ngd: NgdConfig,
    pub rmle_alpha: f64,
    pub rmle_warmup: usize,
    pub rmle_fixed_bound: f64,
    /// Run the covariance recursion over the warm-up data before tracking starts.
    pub rmle_condition: bool,
    pub ongd_eta: f64,
    pub ongd_minibatch: usize,

    pub delta: f64,
    pub capacity: f64,
    /// Also clip at `1 - δ` (after rescaling by `capacity`), for series that
    /// physically cannot exceed their capacity.
    pub upper_clip: bool,
    /// Number of observations seen before the first forecast is issued.
    pub forecast_start: usize,
    pub persistence_errors: usize,
    pub climatology_cap: usize,

    pub simulation: SyntheticConfig,

    pub validation_start: usize,
    pub test_start: usize,
    pub grid_order: Vec<usize>,
    pub grid_alpha: Vec<f64>,
    pub grid_eta: Vec<f64>,
    pub grid_minibatch: Vec<usize>,
    pub grid_persistence: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            method: Method::Ongd,
            order: 1,
            seed: 0,
            replicas: 1,
            init_lambda: 0.0,
            init_sigma2: 1.0,
            init_nu: 1.0,
            init_b: 1.0,
            ngd: NgdConfig::default(),
            rmle_alpha: 0.975,
            rmle_warmup: 1000,
            rmle_fixed_bound: 1.0,
            rmle_condition: true,
            ongd_eta: 0.001,
            ongd_minibatch: 100,
            delta: DEFAULT_DELTA,
            capacity: 1.0,
            upper_clip: false,
            forecast_start: 2000,
            persistence_errors: DEFAULT_PERSISTENCE_ERRORS,
            climatology_cap: CLIMATOLOGY_CAP,
            simulation: SyntheticConfig::default(),
            validation_start: 2000,
            test_start: 8000,
            grid_order: vec![1],
            grid_alpha: vec![0.975, 0.99],
            grid_eta: vec![0.001, 0.003],
            grid_minibatch: vec![1, 5, 10, 20, 50, 100, 150],
            grid_persistence: vec![10, 20, 50, 100, 200],
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse '{value}' for key '{key}'")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let items: Result<Vec<T>> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect();
    items
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("'{value}' is not a boolean for key '{key}'"))),
    }
}

/// Splits `key = value` lines, dropping comments and blank lines.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", n + 1)))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", n + 1)));
        }
        if map.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key '{key}'", n + 1)));
        }
    }
    Ok(map)
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_str_config(&text)
    }

    pub fn from_str_config(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (key, value) in parse_key_values(text)? {
            cfg.set(&key, &value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value;
        match key {
            "method" => self.method = v.parse()?,
            "order" | "p" => self.order = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "replicas" => self.replicas = parse(key, v)?,
            "init_lambda" => self.init_lambda = parse(key, v)?,
            "init_sigma2" => self.init_sigma2 = parse(key, v)?,
            "init_nu" => self.init_nu = parse(key, v)?,
            "init_b" => self.init_b = parse(key, v)?,
            "ngd_alpha" => self.ngd.alpha = parse(key, v)?,
            "ngd_iterations" => self.ngd.iterations = parse(key, v)?,
            "ngd_eta" => self.ngd.learning_rate = parse(key, v)?,
            "ngd_batch" => self.ngd.batch_length = parse(key, v)?,
            "ngd_update_every" => self.ngd.update_every = parse(key, v)?,
            "rmle_alpha" => self.rmle_alpha = parse(key, v)?,
            "rmle_warmup" => self.rmle_warmup = parse(key, v)?,
            "rmle_fixed_bound" => self.rmle_fixed_bound = parse(key, v)?,
            "rmle_condition" => self.rmle_condition = parse_bool(key, v)?,
            "ongd_eta" => self.ongd_eta = parse(key, v)?,
            "ongd_m" | "ongd_minibatch" => self.ongd_minibatch = parse(key, v)?,
            "delta" => self.delta = parse(key, v)?,
            "capacity" => self.capacity = parse(key, v)?,
            "upper_clip" => self.upper_clip = parse_bool(key, v)?,
            "forecast_start" => self.forecast_start = parse(key, v)?,
            "persistence_errors" => self.persistence_errors = parse(key, v)?,
            "climatology_cap" => self.climatology_cap = parse(key, v)?,
            "sim_length" => self.simulation.length = parse(key, v)?,
            "sim_lambda" => self.simulation.lambdas = parse_list(key, v)?,
            "sim_sigma2" => self.simulation.sigma2 = parse(key, v)?,
            "sim_nu" => self.simulation.nu = parse(key, v)?,
            "sim_bound" => self.simulation.bound = parse_bound(v)?,
            "validation_start" => self.validation_start = parse(key, v)?,
            "test_start" => self.test_start = parse(key, v)?,
            "grid_order" => self.grid_order = parse_list(key, v)?,
            "grid_alpha" => self.grid_alpha = parse_list(key, v)?,
            "grid_eta" => self.grid_eta = parse_list(key, v)?,
            "grid_m" => self.grid_minibatch = parse_list(key, v)?,
            "grid_persistence" => self.grid_persistence = parse_list(key, v)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.order == 0 {
            return fail("order must be >= 1");
        }
        if !(self.rmle_alpha > 0.0 && self.rmle_alpha < 1.0) {
            return fail("rmle_alpha must lie in (0, 1)");
        }
        if !(self.ongd_eta > 0.0) {
            return fail("ongd_eta must be positive");
        }
        if self.ongd_minibatch == 0 {
            return fail("ongd_m must be >= 1");
        }
        if !(self.delta > 0.0 && self.delta < 0.5) || !(self.capacity > 0.0) {
            return fail("need 0 < delta < 0.5 and capacity > 0");
        }
        if !(self.init_sigma2 > 0.0 && self.init_nu > 0.0) {
            return fail("init_sigma2 and init_nu must be positive");
        }
        if self.forecast_start == 0 {
            return fail("forecast_start must be >= 1");
        }
        if self.persistence_errors == 0 || self.climatology_cap == 0 {
            return fail("persistence_errors and climatology_cap must be >= 1");
        }
        if self.replicas == 0 {
            return fail("replicas must be >= 1");
        }
        if self.grid_alpha.iter().any(|a| !(*a > 0.0 && *a < 1.0))
            || self.grid_eta.iter().any(|e| !(*e > 0.0))
            || self.grid_minibatch.contains(&0)
            || self.grid_order.contains(&0)
            || self.grid_persistence.contains(&0)
        {
            return fail("grid values out of range");
        }
        self.ngd.validate()?;
        self.simulation.validate()
    }

    /// Starting parameter vector in unconstrained coordinates.
    pub fn initial_theta(&self) -> ParamVector {
        ParamVector::new(
            vec![self.init_lambda; self.order],
            self.init_sigma2.ln(),
            self.init_nu.ln(),
            self.init_b,
        )
    }

    /// Generator settings of replica `index`, seeded with `seed + index`.
    pub fn replica_simulation(&self, index: usize) -> SyntheticConfig {
        SyntheticConfig {
            seed: self.seed,
            ..self.simulation.clone()
        }
        .replica(index as u64)
    }

    /// Range that rescaled observations and ensemble members are coarsened into.
    pub fn clip(&self) -> Clip {
        Clip {
            lower: self.delta,
            upper: if self.upper_clip { 1.0 - self.delta } else { f64::INFINITY },
        }
    }
}

/// `constant:B`, `sinusoid:BASE:AMPLITUDE:PERIOD` or `piecewise:T0:V0:T1:V1...`.
pub fn parse_bound(v: &str) -> Result<BoundCurve> {
    let parts: Vec<&str> = v.split(':').map(str::trim).collect();
    let nums = |s: &[&str]| -> Result<Vec<f64>> { s.iter().map(|x| parse("sim_bound", x)).collect() };
    let curve = match parts.first().copied() {
        Some("constant") if parts.len() == 2 => BoundCurve::Constant(nums(&parts[1..])?[0]),
        Some("sinusoid") if parts.len() == 4 => {
            let n = nums(&parts[1..])?;
            BoundCurve::Sinusoid {
                base: n[0],
                amplitude: n[1],
                period: n[2],
            }
        }
        Some("piecewise") if parts.len() >= 3 && parts.len() % 2 == 1 => {
            let n = nums(&parts[1..])?;
            BoundCurve::Piecewise(n.chunks(2).map(|c| (c[0], c[1])).collect())
        }
        _ => return Err(Error::Config(format!("cannot parse bound curve '{v}'"))),
    };
    curve.validate()?;
    Ok(curve)
}
