use std::fmt;
use std::str::FromStr;

use rand::Rng as _;

use super::TrainConfig;
use crate::error::{Error, Result};
use crate::linops::{DenseMatrix, DenseVector};
use crate::rng::{self, streams, Rng};
use crate::sparse_recovery::SistaParams;
use crate::unfolded_net::{
    map_sista_to_rnn, Connectivity, Network, Parameterization, SistaLayer, StackedRnnParams, TiedSistaNet,
    UntiedSistaParams,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitScheme {
    /// Start from the unsupervised SISTA parameters.
    Sista,
    /// Glorot-uniform weight matrices.
    Random,
}

impl fmt::Display for InitScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitScheme::Sista => "sista",
            InitScheme::Random => "random",
        })
    }
}

impl FromStr for InitScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sista" => Ok(InitScheme::Sista),
            "random" => Ok(InitScheme::Random),
            other => Err(Error::InvalidArgument(format!("unknown init scheme '{other}'"))),
        }
    }
}

/// Scalars used by random init when no base parameters are given.
const FALLBACK_SCALARS: (f64, f64, f64) = (1.0, 0.02, 0.002);

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn glorot(r: &mut Rng, rows: usize, cols: usize) -> DenseMatrix {
    let bound = glorot_bound(cols, rows);
    DenseMatrix::from_fn(rows, cols, |_, _| r.random_range(-bound..=bound))
}

/// Initial parameters for `cfg.mode` with `n` code entries and `m`
/// measurements.
///
/// SISTA init copies `base` (tied), replicates it per layer (untied) or
/// transfers the mapped weights (generic). Generic wiring feeds each layer's
/// recurrence from its own previous state rather than from the last layer, so
/// for the generic mode the transfer is a warm start, not an exact copy.
///
/// Random init draws weight matrices Glorot-uniform and zeroes `h0` and `c`;
/// thresholds and SISTA scalars come from `base` when present.
pub fn init_params(cfg: &TrainConfig, n: usize, m: usize, base: Option<&SistaParams>) -> Result<Network> {
    if cfg.k_layers == 0 {
        return Err(Error::InvalidArgument("k_layers must be at least 1".into()));
    }
    if let Some(b) = base {
        b.validate()?;
        if b.code_len() != n || b.measurements() != m {
            return Err(Error::dims("init_params", format!("N={n}, M={m}"), format!("N={}, M={}", b.code_len(), b.measurements())));
        }
    }
    let k = cfg.k_layers;
    match cfg.init {
        InitScheme::Sista => {
            let base = base.ok_or_else(|| Error::InvalidArgument("sista init needs base SISTA parameters".into()))?;
            Ok(match cfg.mode {
                Parameterization::TiedSista => Network::Tied(TiedSistaNet { params: base.clone(), k }),
                Parameterization::UntiedSista => Network::Untied(UntiedSistaParams::replicate(base, k)),
                Parameterization::Generic => {
                    let mapped = map_sista_to_rnn(base, k);
                    Network::Generic(StackedRnnParams {
                        connectivity: Connectivity::Generic,
                        h0: vec![base.h0.clone(); k],
                        ..mapped
                    })
                }
            })
        }
        InitScheme::Random => {
            let mut r = rng::stream(cfg.seed, streams::INIT);
            let (alpha, lambda1, lambda2) = base.map_or(FALLBACK_SCALARS, |b| (b.alpha, b.lambda1, b.lambda2));
            Ok(match cfg.mode {
                Parameterization::Generic => {
                    let w = (0..k).map(|_| glorot(&mut r, n, n)).collect();
                    let v = vec![glorot(&mut r, n, m)];
                    let s = (1..k).map(|_| glorot(&mut r, n, n)).collect();
                    let u = glorot(&mut r, n, n);
                    let threshold = base.map_or(0.0, |b| b.lambda1 / b.alpha);
                    Network::Generic(StackedRnnParams {
                        connectivity: Connectivity::Generic,
                        h0: vec![DenseVector::zeros(n); k],
                        b: vec![DenseVector::filled(n, threshold); k],
                        w,
                        v,
                        s,
                        u,
                        c: DenseVector::zeros(n),
                    })
                }
                Parameterization::TiedSista => Network::Tied(TiedSistaNet {
                    params: SistaParams {
                        a: glorot(&mut r, m, n),
                        d: glorot(&mut r, n, n),
                        f: glorot(&mut r, n, n),
                        h0: DenseVector::zeros(n),
                        alpha,
                        lambda1,
                        lambda2,
                    },
                    k,
                }),
                Parameterization::UntiedSista => Network::Untied(UntiedSistaParams {
                    h0: DenseVector::zeros(n),
                    layers: (0..k)
                        .map(|_| SistaLayer {
                            a: glorot(&mut r, m, n),
                            d: glorot(&mut r, n, n),
                            f: glorot(&mut r, n, n),
                            alpha,
                            lambda1,
                            lambda2,
                        })
                        .collect(),
                }),
            })
        }
    }
}
