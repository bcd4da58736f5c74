//! Online normalized gradient descent over a sliding minibatch.
//!
//! At time `t` the played parameter is scored on the average loss of the
//! `m` most recent observations and then moved by exactly `η` against the
//! normalized gradient. No projection is applied while tracking.

use std::collections::VecDeque;

use super::ngd::normalized_step;
use crate::error::{Error, Result};
use crate::likelihood::{context_loss, ParamVector};

#[derive(Debug, Clone)]
pub struct OngdState {
    pub theta: ParamVector,
    pub eta: f64,
    pub minibatch: usize,
    buffer: VecDeque<Box<[f64]>>,
    pub updates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OngdStep {
    /// Minibatch cost at the played parameter.
    pub cost: f64,
    /// False when the minibatch gradient vanished.
    pub moved: bool,
}

impl OngdState {
    pub fn new(theta: ParamVector, eta: f64, minibatch: usize) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::Config(format!("ONGD step size must be positive, got {eta}")));
        }
        if minibatch == 0 {
            return Err(Error::Config("ONGD minibatch size must be >= 1".into()));
        }
        Ok(OngdState {
            theta,
            eta,
            minibatch,
            buffer: VecDeque::with_capacity(minibatch),
            updates: 0,
        })
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    /// Adds the record `x_{t-p}, ..., x_t`. Once `m` records are held, plays
    /// the current parameter and updates it.
    pub fn push(&mut self, context: &[f64]) -> Option<OngdStep> {
        if self.buffer.len() == self.minibatch {
            self.buffer.pop_front();
        }
        self.buffer.push_back(context.into());
        if self.buffer.len() < self.minibatch {
            return None;
        }
        Some(self.update())
    }

    fn update(&mut self) -> OngdStep {
        let (cost, grad) = minibatch_cost(self.buffer.iter().map(|c| &c[..]), &self.theta);
        let mut x = self.theta.to_vec();
        let moved = normalized_step(&mut x, &grad, self.eta);
        if moved {
            // layout matches, so this cannot fail
            self.theta = ParamVector::from_slice(&x).expect("parameter layout");
            self.updates += 1;
        }
        OngdStep { cost, moved }
    }
}

/// Average loss and gradient over a set of contexts.
pub fn minibatch_cost<'a, I>(contexts: I, theta: &ParamVector) -> (f64, Vec<f64>)
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let dim = theta.dim();
    let mut grad = vec![0.0; dim];
    let mut scratch = vec![0.0; dim];
    let mut total = 0.0;
    let mut n = 0usize;
    for ctx in contexts {
        total += context_loss(ctx, theta, Some(&mut scratch));
        for (g, s) in grad.iter_mut().zip(&scratch) {
            *g += s;
        }
        n += 1;
    }
    let n = n.max(1) as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    (total / n, grad)
}
