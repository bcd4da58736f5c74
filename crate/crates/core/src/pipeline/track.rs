//! Sequential parameter tracking over a series.
//!
//! Index `i` is 0-based. The estimate recorded at `i` has seen `x_0..=x_i`
//! and is the one used to forecast `x_{i+1}`.

use crate::error::{Error, Result};
use crate::forecast::project_theta;
use crate::likelihood::{context_loss, ParamVector, SeriesWindow};
use crate::optim::{ngd_fit, rmle_init, NgdConfig, OngdState, RmleState, WarmStart, DIVERGENCE_THRESHOLD};

use super::config::{Method, RunConfig};

/// Tracked estimate after one time step, in natural units when written out.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub index: usize,
    pub t: i64,
    pub theta: ParamVector,
    /// Projected bound for the next forecast.
    pub b_tilde: f64,
    /// Loss of the newest record at the pre-update parameter.
    pub loss: f64,
}

enum Engine {
    Ngd {
        config: NgdConfig,
        theta: ParamVector,
    },
    Rmle {
        warmup: usize,
        alpha: f64,
        fixed_bound: Option<f64>,
        ngd: NgdConfig,
        theta0: ParamVector,
        condition: bool,
        state: Option<RmleState>,
    },
    Ongd(OngdState),
}

/// One tracker fed a growing prefix of the series.
pub struct Tracker {
    order: usize,
    delta: f64,
    engine: Engine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub theta: ParamVector,
    pub b_tilde: f64,
    pub loss: f64,
}

impl Tracker {
    pub fn new(config: &RunConfig, method: Method) -> Result<Self> {
        let theta0 = config.initial_theta();
        let engine = match method {
            Method::Ngd => Engine::Ngd {
                config: config.ngd.clone(),
                theta: theta0,
            },
            Method::RmleB | Method::Rmle1 => {
                if config.rmle_warmup < config.order + 1 {
                    return Err(Error::Config(format!(
                        "rmle_warmup must be at least {}",
                        config.order + 1
                    )));
                }
                Engine::Rmle {
                    warmup: config.rmle_warmup,
                    alpha: config.rmle_alpha,
                    fixed_bound: (method == Method::Rmle1).then_some(config.rmle_fixed_bound),
                    ngd: config.ngd.clone(),
                    theta0,
                    condition: config.rmle_condition,
                    state: None,
                }
            }
            Method::Ongd => Engine::Ongd(OngdState::new(theta0, config.ongd_eta, config.ongd_minibatch)?),
            other => return Err(Error::Config(format!("method '{other}' does not track parameters"))),
        };
        Ok(Tracker {
            order: config.order,
            delta: config.delta,
            engine,
        })
    }

    /// Index of the first recorded estimate.
    pub fn first_index(&self) -> usize {
        match &self.engine {
            Engine::Ngd { config, .. } => config.batch_length.max(self.order + 1) - 1,
            Engine::Rmle { warmup, .. } => warmup - 1,
            Engine::Ongd(s) => s.minibatch + self.order - 1,
        }
    }

    /// Feeds `x_0..=x_i`, with `i = prefix.len() - 1`. Only `prefix[i]` is new.
    pub fn observe(&mut self, prefix: &[f64]) -> Result<Option<Estimate>> {
        let p = self.order;
        let i = prefix.len().checked_sub(1).ok_or_else(|| Error::Input("empty prefix".into()))?;
        let first = self.first_index();
        let context = if i >= p { Some(&prefix[i - p..=i]) } else { None };
        let (theta, loss) = match &mut self.engine {
            Engine::Ngd { config, theta } => {
                if i < first {
                    return Ok(None);
                }
                let ctx = context.expect("first index exceeds the order");
                let loss = context_loss(ctx, theta, None);
                if i == first || (i - first) % config.update_every == 0 {
                    let start = (i + 1).saturating_sub(config.batch_length).max(p);
                    let window = SeriesWindow::new(prefix, start, i, p)?;
                    *theta = ngd_fit(&window, theta, config)?.theta;
                }
                (theta.clone(), loss)
            }
            Engine::Rmle {
                warmup,
                alpha,
                fixed_bound,
                ngd,
                theta0,
                condition,
                state,
            } => {
                if i + 1 < *warmup {
                    return Ok(None);
                }
                match state {
                    None => {
                        let s = rmle_init(
                            &prefix[..*warmup],
                            p,
                            *alpha,
                            *fixed_bound,
                            WarmStart::Ngd {
                                theta0: theta0.clone(),
                                config: ngd.clone(),
                            },
                        )?;
                        let mut s = s;
                        if *condition {
                            s.condition(&prefix[..*warmup]);
                        }
                        let loss = context_loss(context.expect("warm-up exceeds the order"), &s.theta, None);
                        let theta = s.theta.clone();
                        *state = Some(s);
                        (theta, loss)
                    }
                    Some(s) => {
                        let step = s.step(context.expect("warm-up exceeds the order"));
                        (s.theta.clone(), step.loss)
                    }
                }
            }
            Engine::Ongd(s) => {
                let Some(ctx) = context else { return Ok(None) };
                match s.push(ctx) {
                    None => return Ok(None),
                    Some(step) => (s.theta.clone(), step.cost),
                }
            }
        };
        check_divergence(&theta, loss, i)?;
        let recent: Vec<f64> = prefix[i + 1 - p..=i].iter().rev().copied().collect();
        let b_tilde = project_theta(&theta, &recent, self.delta)?.b_tilde();
        Ok(Some(Estimate { theta, b_tilde, loss }))
    }
}

fn check_divergence(theta: &ParamVector, loss: f64, i: usize) -> Result<()> {
    if !theta.is_finite() || theta.max_abs() > DIVERGENCE_THRESHOLD || !loss.is_finite() {
        return Err(Error::Divergence(format!(
            "estimate left the admissible range at index {i}"
        )));
    }
    Ok(())
}

/// Runs `method` over the whole series. `t` carries the time labels written with each record.
pub fn track_series(x: &[f64], t: &[i64], config: &RunConfig, method: Method) -> Result<Vec<TrajectoryRecord>> {
    if x.len() != t.len() {
        return Err(Error::InvalidArgument("time labels and values differ in length".into()));
    }
    let mut tracker = Tracker::new(config, method)?;
    if x.len() <= tracker.first_index() {
        return Err(Error::Input(format!(
            "{method} needs more than {} observations, got {}",
            tracker.first_index(),
            x.len()
        )));
    }
    let mut out = Vec::with_capacity(x.len() - tracker.first_index());
    for i in 0..x.len() {
        if let Some(e) = tracker.observe(&x[..=i])? {
            out.push(TrajectoryRecord {
                index: i,
                t: t[i],
                theta: e.theta,
                b_tilde: e.b_tilde,
                loss: e.loss,
            });
        }
    }
    Ok(out)
}
