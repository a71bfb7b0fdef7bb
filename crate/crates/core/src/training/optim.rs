use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const RMSPROP_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Optimizer {
    Sgd,
    Rmsprop,
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Optimizer::Sgd => "sgd",
            Optimizer::Rmsprop => "rmsprop",
        })
    }
}

impl FromStr for Optimizer {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Optimizer::Sgd),
            "rmsprop" => Ok(Optimizer::Rmsprop),
            other => Err(Error::InvalidArgument(format!("unknown optimizer '{other}'"))),
        }
    }
}

/// Running mean of squared gradients and the velocity, one entry per parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct RmsPropState {
    pub accum: Vec<f64>,
    pub velocity: Vec<f64>,
}

impl RmsPropState {
    pub fn new(len: usize) -> Self {
        RmsPropState {
            accum: vec![0.0; len],
            velocity: vec![0.0; len],
        }
    }
}

/// One RMSProp step with momentum on the velocity:
///
/// ```text
/// a <- (1 - avg) a + avg g^2
/// v <- momentum v - lr g / sqrt(a + eps)
/// theta <- theta + v
/// ```
///
/// Indices where `skip` is true are left untouched, state included.
pub fn rmsprop_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut RmsPropState,
    lr: f64,
    momentum: f64,
    avg: f64,
    skip: Option<&[bool]>,
) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.accum.len());
    for i in 0..params.len() {
        if skip.is_some_and(|s| s[i]) {
            continue;
        }
        let g = grads[i];
        let a = (1.0 - avg) * state.accum[i] + avg * g * g;
        let v = momentum * state.velocity[i] - lr * g / (a + RMSPROP_EPS).sqrt();
        state.accum[i] = a;
        state.velocity[i] = v;
        params[i] += v;
    }
}

pub fn sgd_step(params: &mut [f64], grads: &[f64], lr: f64, skip: Option<&[bool]>) {
    assert_eq!(params.len(), grads.len());
    for i in 0..params.len() {
        if !skip.is_some_and(|s| s[i]) {
            params[i] -= lr * grads[i];
        }
    }
}
