use crate::error::{Error, Result};
use crate::likelihood::{loss_and_grad, ParamVector, SeriesWindow, WindowWeights};

/// Batch normalized gradient descent settings and refit schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct NgdConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    /// Forgetting factor of the batch objective.
    pub alpha: f64,
    /// Number of trailing observations each fit uses.
    pub batch_length: usize,
    /// Refit cadence once the first batch is full.
    pub update_every: usize,
    /// Keep `b` fixed at its starting value.
    pub freeze_bound: bool,
}

impl Default for NgdConfig {
    fn default() -> Self {
        NgdConfig {
            iterations: 10_000,
            learning_rate: 0.003,
            alpha: 0.990,
            batch_length: 1000,
            update_every: 500,
            freeze_bound: false,
        }
    }
}

impl NgdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("NGD needs at least one iteration".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("NGD learning rate must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config("NGD alpha must lie in (0, 1)".into()));
        }
        if self.batch_length == 0 || self.update_every == 0 {
            return Err(Error::Config(
                "NGD batch length and update cadence must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct NgdOutcome {
    /// Iterate with the lowest objective seen.
    pub theta: ParamVector,
    pub objective: f64,
    pub initial_objective: f64,
    pub iterations_run: usize,
    /// A zero gradient ended the run before `iterations`.
    pub stopped_early: bool,
}

/// Moves `x` by `-eta * g / |g|`. Returns `false` (and leaves `x` alone) when `g = 0`.
pub fn normalized_step(x: &mut [f64], g: &[f64], eta: f64) -> bool {
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return false;
    }
    let scale = eta / norm;
    for (xi, gi) in x.iter_mut().zip(g) {
        *xi -= scale * gi;
    }
    true
}

/// Minimizes the exponential-window objective over `window` from `theta0`
/// and returns the best iterate.
pub fn ngd_fit(window: &SeriesWindow<'_>, theta0: &ParamVector, config: &NgdConfig) -> Result<NgdOutcome> {
    config.validate()?;
    if theta0.order() != window.order() {
        return Err(Error::InvalidArgument(format!(
            "theta has order {} but the window has order {}",
            theta0.order(),
            window.order()
        )));
    }
    let weights = WindowWeights::exponential(config.alpha)?;
    let dim = theta0.dim();
    let mut x = theta0.to_vec();
    let mut g = vec![0.0; dim];
    let mut theta = theta0.clone();
    let mut best = theta0.clone();
    let mut best_f = f64::INFINITY;
    let mut initial = f64::NAN;
    let mut run = 0;
    let mut stopped = false;

    for i in 0..config.iterations {
        let f = loss_and_grad(window, &theta, &weights, &mut g);
        if i == 0 {
            initial = f;
        }
        run = i + 1;
        if f < best_f {
            best_f = f;
            best.clone_from(&theta);
        }
        if config.freeze_bound {
            g[dim - 1] = 0.0;
        }
        if !normalized_step(&mut x, &g, config.learning_rate) {
            stopped = true;
            break;
        }
        theta = ParamVector::from_slice(&x)?;
    }

    Ok(NgdOutcome {
        theta: best,
        objective: best_f,
        initial_objective: initial,
        iterations_run: run,
        stopped_early: stopped,
    })
}
