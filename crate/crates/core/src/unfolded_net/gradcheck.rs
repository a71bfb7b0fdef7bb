//! Central finite-difference verification of the analytic gradients.

use super::instances::{random_inputs, random_network, InstanceShape};
use super::model::{Network, Parameterization};
use super::rnn::ForwardTape;
use crate::error::Result;
use crate::linops::DenseVector;
use crate::rng::{self, streams};

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    pub shape: InstanceShape,
    pub kinds: Vec<Parameterization>,
    pub instances: usize,
    pub seed: u64,
    pub step: f64,
    pub tol: f64,
    /// Instances with any pre-activation within this distance of its
    /// threshold are resampled.
    pub kink_margin: f64,
    pub max_resamples: usize,
    /// Test hook: negate one analytic gradient block before comparing.
    pub inject_sign_flip: bool,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            shape: InstanceShape { n: 6, m: 3, t: 3, k: 2 },
            kinds: vec![
                Parameterization::Generic,
                Parameterization::UntiedSista,
                Parameterization::TiedSista,
            ],
            instances: 20,
            seed: 2017,
            step: 1e-6,
            tol: 1e-6,
            kink_margin: 1e-3,
            max_resamples: 1000,
            inject_sign_flip: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckCase {
    pub kind: Parameterization,
    pub index: usize,
    pub rel_error: f64,
    pub kink_margin: f64,
    pub resamples: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub cases: Vec<GradCheckCase>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        !self.cases.is_empty() && self.cases.iter().all(|c| c.passed)
    }

    pub fn worst(&self) -> f64 {
        self.cases.iter().fold(0.0, |m, c| m.max(c.rel_error))
    }
}

fn half_sq_error(y_hat: &[DenseVector], y: &[DenseVector]) -> f64 {
    y_hat.iter().zip(y).map(|(a, b)| 0.5 * a.sub(b).norm_sq()).sum()
}

/// Smallest `||a| - b|` over every pre-activation on the tape.
pub fn kink_distance(net: &Network, tape: &ForwardTape) -> f64 {
    let rnn = net.unfold();
    let mut margin = f64::INFINITY;
    for pre_t in tape.pre_activations() {
        for (k, a) in pre_t.iter().enumerate() {
            for (ai, bi) in a.iter().zip(rnn.b[k].iter()) {
                margin = margin.min((ai.abs() - bi).abs());
            }
        }
    }
    margin
}

/// Analytic and central-difference gradients of `1/2 sum ||y_hat - y||^2`,
/// flattened in block order.
pub fn gradients(net: &Network, x: &[DenseVector], y: &[DenseVector], step: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let (y_hat, tape) = net.forward(x)?;
    let grad_y: Vec<DenseVector> = y_hat.iter().zip(y).map(|(a, b)| a.sub(b)).collect();
    let analytic = net.backward(&tape, &grad_y)?.to_flat();
    let base = net.to_flat();
    let mut probe = net.clone();
    let mut numeric = Vec::with_capacity(base.len());
    let mut theta = base.clone();
    for i in 0..base.len() {
        theta[i] = base[i] + step;
        probe.set_flat(&theta);
        let plus = half_sq_error(&probe.forward(x)?.0, y);
        theta[i] = base[i] - step;
        probe.set_flat(&theta);
        let minus = half_sq_error(&probe.forward(x)?.0, y);
        theta[i] = base[i];
        numeric.push((plus - minus) / (2.0 * step));
    }
    Ok((analytic, numeric))
}

/// `||analytic - numeric||_2 / max(||analytic||_2, ||numeric||_2)`; 0 when both vanish.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, b)| a - b).collect();
    let scale = norm(analytic).max(norm(numeric));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

pub fn run_gradcheck(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut cases = Vec::new();
    for (kind_index, &kind) in cfg.kinds.iter().enumerate() {
        for index in 0..cfg.instances {
            let instance_seed = rng::derive_seed(cfg.seed ^ ((kind_index as u64 + 1) << 48), index as u64);
            let mut resamples = 0;
            let (net, x, margin) = loop {
                let mut r = rng::stream(rng::derive_seed(instance_seed, resamples as u64), streams::INSTANCE);
                let net = random_network(kind, cfg.shape, &mut r);
                let x = random_inputs(cfg.shape.m, cfg.shape.t, &mut r);
                let (_, tape) = net.forward(&x)?;
                let margin = kink_distance(&net, &tape);
                if margin > cfg.kink_margin || resamples >= cfg.max_resamples {
                    break (net, x, margin);
                }
                resamples += 1;
            };
            let mut r = rng::stream(instance_seed, streams::NOISE);
            let y = random_inputs(cfg.shape.n, cfg.shape.t, &mut r);
            let (mut analytic, numeric) = gradients(&net, &x, &y, cfg.step)?;
            if cfg.inject_sign_flip {
                flip_first_live_block(&net, &mut analytic);
            }
            let rel_error = relative_error(&analytic, &numeric);
            cases.push(GradCheckCase {
                kind,
                index,
                rel_error,
                kink_margin: margin,
                resamples,
                passed: margin > cfg.kink_margin && rel_error < cfg.tol,
            });
        }
    }
    Ok(GradCheckReport { cases })
}

fn flip_first_live_block(net: &Network, grad: &mut [f64]) {
    let mut offset = 0;
    for (_, block) in net.blocks() {
        let range = offset..offset + block.len();
        offset += block.len();
        if grad[range.clone()].iter().any(|g| *g != 0.0) {
            grad[range].iter_mut().for_each(|g| *g = -*g);
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> GradCheckConfig {
        GradCheckConfig {
            instances: 3,
            ..GradCheckConfig::default()
        }
    }

    #[test]
    fn default_suite_passes() {
        let report = run_gradcheck(&quick()).unwrap();
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.cases.len(), 9);
    }

    #[test]
    fn sign_flip_is_caught() {
        let cfg = GradCheckConfig {
            inject_sign_flip: true,
            ..quick()
        };
        let report = run_gradcheck(&cfg).unwrap();
        assert!(report.cases.iter().all(|c| !c.passed));
    }

    #[test]
    fn kink_adjacent_instances_are_resampled() {
        let report = run_gradcheck(&quick()).unwrap();
        assert!(report.cases.iter().all(|c| c.kink_margin > 1e-3));
    }
}
