//! Seeded random problem instances for the equivalence and gradient suites.

use rand::Rng as _;

use super::mapping::SistaLayer;
use super::model::{Network, TiedSistaNet, UntiedSistaParams};
use super::rnn::{Connectivity, StackedRnnParams};
use crate::linops::{DenseMatrix, DenseVector};
use crate::rng::{self, streams, Rng};
use crate::sparse_recovery::SistaParams;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InstanceShape {
    pub n: usize,
    pub m: usize,
    pub t: usize,
    pub k: usize,
}

fn matrix(r: &mut Rng, rows: usize, cols: usize, scale: f64) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| r.random_range(-scale..scale))
}

fn vector(r: &mut Rng, len: usize, scale: f64) -> DenseVector {
    DenseVector::from_fn(len, |_| r.random_range(-scale..scale))
}

/// Random SISTA parameters with `lambda1, lambda2 in [0.01, 1]` and
/// `alpha in [1, 4]`. `A` and `D` are dense and unstructured; `F` is a
/// perturbed identity.
pub fn random_sista_params(n: usize, m: usize, r: &mut Rng) -> SistaParams {
    let a = matrix(r, m, n, 1.0 / (m as f64).sqrt());
    let d = matrix(r, n, n, 1.0 / (n as f64).sqrt());
    let mut f = matrix(r, n, n, 0.1);
    f.add_diag(1.0);
    SistaParams {
        a,
        d,
        f,
        h0: vector(r, n, 0.5),
        alpha: r.random_range(1.0..4.0),
        lambda1: r.random_range(0.01..1.0),
        lambda2: r.random_range(0.01..1.0),
    }
}

pub fn random_inputs(len: usize, t: usize, r: &mut Rng) -> Vec<DenseVector> {
    (0..t).map(|_| vector(r, len, 1.0)).collect()
}

/// Instance `index` of a seeded family: SISTA parameters and an input sequence.
pub fn sista_instance(shape: InstanceShape, seed: u64, index: u64) -> (SistaParams, Vec<DenseVector>) {
    let mut r = rng::stream(rng::derive_seed(seed, index), streams::INSTANCE);
    let p = random_sista_params(shape.n, shape.m, &mut r);
    let x = random_inputs(shape.m, shape.t, &mut r);
    (p, x)
}

/// Random network of the given parameterization. Thresholds are kept small
/// relative to the weights so that a good share of units is active.
pub fn random_network(kind: super::Parameterization, shape: InstanceShape, r: &mut Rng) -> Network {
    let InstanceShape { n, m, k, .. } = shape;
    match kind {
        super::Parameterization::Generic => Network::Generic(StackedRnnParams {
            connectivity: Connectivity::Generic,
            h0: (0..k).map(|_| vector(r, n, 0.5)).collect(),
            b: (0..k).map(|_| DenseVector::from_fn(n, |_| r.random_range(0.02..0.2))).collect(),
            w: (0..k).map(|_| matrix(r, n, n, 0.6)).collect(),
            v: vec![matrix(r, n, m, 0.6)],
            s: (1..k).map(|_| matrix(r, n, n, 0.6)).collect(),
            u: matrix(r, n, n, 0.6),
            c: vector(r, n, 0.1),
        }),
        super::Parameterization::UntiedSista => {
            let h0 = vector(r, n, 0.5);
            let layers = (0..k)
                .map(|_| {
                    let mut p = random_sista_params(n, m, r);
                    p.lambda1 *= 0.2;
                    SistaLayer::from_params(&p)
                })
                .collect();
            Network::Untied(UntiedSistaParams { h0, layers })
        }
        super::Parameterization::TiedSista => {
            let mut params = random_sista_params(n, m, r);
            params.lambda1 *= 0.2;
            Network::Tied(TiedSistaNet { params, k })
        }
    }
}
