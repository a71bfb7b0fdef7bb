use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use super::mapping::{map_layers, map_sista_to_rnn, pull_back_layers, SistaLayer};
use super::rnn::{Connectivity, ForwardTape, StackedRnnParams};
use crate::error::{Error, Result};
use crate::linops::DenseVector;
use crate::sparse_recovery::SistaParams;

/// Which parameters are trained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Parameterization {
    /// Free stacked-RNN weights with conventional wiring.
    Generic,
    /// One independent set of SISTA parameters per unfolded layer.
    UntiedSista,
    /// A single set of SISTA parameters shared by every layer.
    TiedSista,
}

impl Parameterization {
    pub fn as_str(self) -> &'static str {
        match self {
            Parameterization::Generic => "generic",
            Parameterization::UntiedSista => "untied_sista",
            Parameterization::TiedSista => "tied_sista",
        }
    }
}

impl fmt::Display for Parameterization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Parameterization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "generic" => Ok(Parameterization::Generic),
            "untied_sista" | "untied" => Ok(Parameterization::UntiedSista),
            "tied_sista" | "tied" => Ok(Parameterization::TiedSista),
            other => Err(Error::InvalidArgument(format!("unknown parameterization '{other}'"))),
        }
    }
}

/// SISTA unfolded `k` times with one shared parameter set.
#[derive(Clone, Debug, PartialEq)]
pub struct TiedSistaNet {
    pub params: SistaParams,
    pub k: usize,
}

/// Per-layer SISTA parameters plus the shared initial code.
#[derive(Clone, Debug, PartialEq)]
pub struct UntiedSistaParams {
    pub h0: DenseVector,
    pub layers: Vec<SistaLayer>,
}

impl UntiedSistaParams {
    /// `k` identical copies of `p`.
    pub fn replicate(p: &SistaParams, k: usize) -> Self {
        UntiedSistaParams {
            h0: p.h0.clone(),
            layers: vec![SistaLayer::from_params(p); k],
        }
    }
}

/// A trainable network in one of the three parameterizations. Gradients are
/// returned as a `Network` of the same shape.
#[derive(Clone, Debug, PartialEq)]
pub enum Network {
    Generic(StackedRnnParams),
    Untied(UntiedSistaParams),
    Tied(TiedSistaNet),
}

impl Network {
    pub fn kind(&self) -> Parameterization {
        match self {
            Network::Generic(_) => Parameterization::Generic,
            Network::Untied(_) => Parameterization::UntiedSista,
            Network::Tied(_) => Parameterization::TiedSista,
        }
    }

    pub fn layers(&self) -> usize {
        match self {
            Network::Generic(p) => p.layers(),
            Network::Untied(p) => p.layers.len(),
            Network::Tied(t) => t.k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Network::Generic(p) => {
                if p.connectivity != Connectivity::Generic {
                    return Err(Error::InvalidArgument("generic network must use generic wiring".into()));
                }
                p.validate()
            }
            Network::Untied(u) => {
                if u.layers.is_empty() {
                    return Err(Error::InvalidArgument("untied network needs at least one layer".into()));
                }
                for l in &u.layers {
                    // alpha may drift under training, but must not vanish
                    if l.alpha == 0.0 || !l.alpha.is_finite() {
                        return Err(Error::InvalidArgument(format!("layer alpha must be non-zero, got {}", l.alpha)));
                    }
                    let p = SistaParams {
                        a: l.a.clone(),
                        d: l.d.clone(),
                        f: l.f.clone(),
                        h0: u.h0.clone(),
                        alpha: l.alpha.abs(),
                        lambda1: l.lambda1,
                        lambda2: l.lambda2,
                    };
                    p.validate()?;
                }
                Ok(())
            }
            Network::Tied(t) => {
                if t.k == 0 {
                    return Err(Error::InvalidArgument("tied network needs at least one layer".into()));
                }
                let mut p = t.params.clone();
                p.alpha = p.alpha.abs();
                if t.params.alpha == 0.0 {
                    return Err(Error::InvalidArgument("alpha must be non-zero".into()));
                }
                p.validate()
            }
        }
    }

    /// The stacked-RNN weights this network evaluates.
    pub fn unfold(&self) -> Cow<'_, StackedRnnParams> {
        match self {
            Network::Generic(p) => Cow::Borrowed(p),
            Network::Untied(u) => Cow::Owned(map_layers(&u.h0, &u.layers)),
            Network::Tied(t) => Cow::Owned(map_sista_to_rnn(&t.params, t.k)),
        }
    }

    pub fn forward(&self, x_seq: &[DenseVector]) -> Result<(Vec<DenseVector>, ForwardTape)> {
        self.validate()?;
        let rnn = self.unfold();
        rnn.check_inputs(x_seq)?;
        Ok(rnn.forward_unchecked(x_seq, self.kind().as_str()))
    }

    /// Gradients for the tape of a matching [`Network::forward`] call.
    pub fn backward(&self, tape: &ForwardTape, grad_y: &[DenseVector]) -> Result<Network> {
        let rnn = self.unfold();
        let g = rnn.backward_from(tape, grad_y, self.kind().as_str())?;
        Ok(self.pull_back(&g))
    }

    /// Chains gradients w.r.t. the unfolded RNN weights onto this network's
    /// own parameters. Unused RNN entries (e.g. `c` for SISTA wiring) drop out.
    pub fn pull_back(&self, g: &StackedRnnParams) -> Network {
        match self {
            Network::Generic(_) => Network::Generic(g.clone()),
            Network::Untied(u) => {
                let (h0, layers) = pull_back_layers(&u.layers, g);
                Network::Untied(UntiedSistaParams { h0, layers })
            }
            Network::Tied(t) => {
                let layer = SistaLayer::from_params(&t.params);
                let (h0, per_layer) = pull_back_layers(&vec![layer; t.k], g);
                let mut total = per_layer[0].zeros_like();
                for l in &per_layer {
                    total.axpy(1.0, l);
                }
                Network::Tied(TiedSistaNet {
                    params: SistaParams {
                        a: total.a,
                        d: total.d,
                        f: total.f,
                        h0,
                        alpha: total.alpha,
                        lambda1: total.lambda1,
                        lambda2: total.lambda2,
                    },
                    k: t.k,
                })
            }
        }
    }

    pub fn zeros_like(&self) -> Network {
        let mut z = self.clone();
        for (_, b) in z.blocks_mut() {
            b.iter_mut().for_each(|v| *v = 0.0);
        }
        z
    }

    /// Named parameter blocks in a fixed order. Names are shared across
    /// layers (`"A"` covers every layer's measurement matrix), which is how
    /// freeze masks address them.
    pub fn blocks(&self) -> Vec<(&'static str, &[f64])> {
        match self {
            Network::Generic(p) => p.blocks(),
            Network::Untied(u) => {
                let mut out: Vec<(&'static str, &[f64])> = vec![("h0", u.h0.as_slice())];
                for l in &u.layers {
                    out.extend(layer_blocks(l));
                }
                out
            }
            Network::Tied(t) => {
                let p = &t.params;
                vec![
                    ("A", p.a.as_slice()),
                    ("D", p.d.as_slice()),
                    ("F", p.f.as_slice()),
                    ("h0", p.h0.as_slice()),
                    ("alpha", std::slice::from_ref(&p.alpha)),
                    ("lambda1", std::slice::from_ref(&p.lambda1)),
                    ("lambda2", std::slice::from_ref(&p.lambda2)),
                ]
            }
        }
    }

    pub fn blocks_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        match self {
            Network::Generic(p) => p.blocks_mut(),
            Network::Untied(u) => {
                let mut out: Vec<(&'static str, &mut [f64])> = vec![("h0", u.h0.as_mut_slice())];
                for l in &mut u.layers {
                    out.extend(layer_blocks_mut(l));
                }
                out
            }
            Network::Tied(t) => {
                let p = &mut t.params;
                vec![
                    ("A", p.a.as_mut_slice()),
                    ("D", p.d.as_mut_slice()),
                    ("F", p.f.as_mut_slice()),
                    ("h0", p.h0.as_mut_slice()),
                    ("alpha", std::slice::from_mut(&mut p.alpha)),
                    ("lambda1", std::slice::from_mut(&mut p.lambda1)),
                    ("lambda2", std::slice::from_mut(&mut p.lambda2)),
                ]
            }
        }
    }

    pub fn num_params(&self) -> usize {
        self.blocks().iter().map(|(_, b)| b.len()).sum()
    }

    /// All parameters concatenated in block order.
    pub fn to_flat(&self) -> Vec<f64> {
        self.blocks().into_iter().flat_map(|(_, b)| b.iter().copied()).collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut off = 0;
        for (_, b) in self.blocks_mut() {
            b.copy_from_slice(&flat[off..off + b.len()]);
            off += b.len();
        }
        debug_assert_eq!(off, flat.len());
    }

    /// Block name for each flat index.
    pub fn flat_names(&self) -> Vec<&'static str> {
        self.blocks()
            .into_iter()
            .flat_map(|(name, b)| std::iter::repeat_n(name, b.len()))
            .collect()
    }

    /// SISTA scalars `(alpha, lambda1, lambda2)` per layer; empty for generic.
    pub fn sista_scalars(&self) -> Vec<(f64, f64, f64)> {
        match self {
            Network::Generic(_) => Vec::new(),
            Network::Untied(u) => u.layers.iter().map(|l| (l.alpha, l.lambda1, l.lambda2)).collect(),
            Network::Tied(t) => vec![(t.params.alpha, t.params.lambda1, t.params.lambda2)],
        }
    }
}

fn layer_blocks(l: &SistaLayer) -> [(&'static str, &[f64]); 6] {
    [
        ("A", l.a.as_slice()),
        ("D", l.d.as_slice()),
        ("F", l.f.as_slice()),
        ("alpha", std::slice::from_ref(&l.alpha)),
        ("lambda1", std::slice::from_ref(&l.lambda1)),
        ("lambda2", std::slice::from_ref(&l.lambda2)),
    ]
}

fn layer_blocks_mut(l: &mut SistaLayer) -> [(&'static str, &mut [f64]); 6] {
    [
        ("A", l.a.as_mut_slice()),
        ("D", l.d.as_mut_slice()),
        ("F", l.f.as_mut_slice()),
        ("alpha", std::slice::from_mut(&mut l.alpha)),
        ("lambda1", std::slice::from_mut(&mut l.lambda1)),
        ("lambda2", std::slice::from_mut(&mut l.lambda2)),
    ]
}

/// Forward pass of SISTA unfolded `net.k` times.
pub fn forward_tied(net: &TiedSistaNet, x_seq: &[DenseVector]) -> Result<(Vec<DenseVector>, ForwardTape)> {
    Network::Tied(net.clone()).forward(x_seq)
}
