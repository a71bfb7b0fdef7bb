//! Mapping SISTA parameters onto stacked-RNN weights, and pulling RNN
//! gradients back onto the SISTA parameters.
//!
//! For one layer with parameters `(A, D, F, alpha, lambda1, lambda2)`, with
//! `P = D^T F D` and `G = D^T (A^T A + lambda2 I) D`:
//!
//! ```text
//! V = D^T A^T / alpha
//! S = I - G / alpha                                  (layers after the first)
//! W = (alpha + lambda2)/alpha P - G P / alpha        (first layer)
//! W = lambda2/alpha P                                (later layers)
//! b = lambda1/alpha 1
//! U = D (of the last layer),  c = 0
//! ```

use super::rnn::{Connectivity, StackedRnnParams};
use crate::linops::{DenseMatrix, DenseVector};
use crate::sparse_recovery::SistaParams;

/// SISTA parameters of one unfolded layer.
#[derive(Clone, Debug, PartialEq)]
pub struct SistaLayer {
    pub a: DenseMatrix,
    pub d: DenseMatrix,
    pub f: DenseMatrix,
    pub alpha: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl SistaLayer {
    pub fn from_params(p: &SistaParams) -> Self {
        SistaLayer {
            a: p.a.clone(),
            d: p.d.clone(),
            f: p.f.clone(),
            alpha: p.alpha,
            lambda1: p.lambda1,
            lambda2: p.lambda2,
        }
    }

    pub fn zeros_like(&self) -> Self {
        SistaLayer {
            a: DenseMatrix::zeros(self.a.rows(), self.a.cols()),
            d: DenseMatrix::zeros(self.d.rows(), self.d.cols()),
            f: DenseMatrix::zeros(self.f.rows(), self.f.cols()),
            alpha: 0.0,
            lambda1: 0.0,
            lambda2: 0.0,
        }
    }

    pub fn axpy(&mut self, s: f64, other: &SistaLayer) {
        self.a.axpy(s, &other.a);
        self.d.axpy(s, &other.d);
        self.f.axpy(s, &other.f);
        self.alpha += s * other.alpha;
        self.lambda1 += s * other.lambda1;
        self.lambda2 += s * other.lambda2;
    }
}

struct LayerTerms {
    input: DenseMatrix,
    gram: DenseMatrix,
    predict: DenseMatrix,
}

fn layer_terms(l: &SistaLayer) -> LayerTerms {
    let ad = l.a.mul(&l.d);
    let mut gram = ad.tmul(&ad);
    gram.axpy(l.lambda2, &l.d.tmul(&l.d));
    LayerTerms {
        input: ad.transpose(),
        gram,
        predict: l.d.tmul(&l.f.mul(&l.d)),
    }
}

/// Unfolds per-layer SISTA parameters into a SISTA-wired stacked RNN.
pub fn map_layers(h0: &DenseVector, layers: &[SistaLayer]) -> StackedRnnParams {
    assert!(!layers.is_empty(), "at least one layer is required");
    let n = h0.len();
    let mut w = Vec::with_capacity(layers.len());
    let mut v = Vec::with_capacity(layers.len());
    let mut s = Vec::with_capacity(layers.len() - 1);
    let mut b = Vec::with_capacity(layers.len());
    for (k, l) in layers.iter().enumerate() {
        let inv = 1.0 / l.alpha;
        let terms = layer_terms(l);
        v.push(terms.input.scaled(inv));
        b.push(DenseVector::filled(n, l.lambda1 * inv));
        if k == 0 {
            let mut w1 = terms.predict.scaled(1.0 + l.lambda2 * inv);
            w1.axpy(-inv, &terms.gram.mul(&terms.predict));
            w.push(w1);
        } else {
            w.push(terms.predict.scaled(l.lambda2 * inv));
            let mut sk = DenseMatrix::identity(n);
            sk.axpy(-inv, &terms.gram);
            s.push(sk);
        }
    }
    let last = layers.last().expect("non-empty");
    StackedRnnParams {
        connectivity: Connectivity::Sista,
        h0: vec![h0.clone()],
        b,
        w,
        v,
        s,
        u: last.d.clone(),
        c: DenseVector::zeros(last.d.rows()),
    }
}

/// Unfolds SISTA with `k` inner iterations into a `k`-layer stacked RNN.
pub fn map_sista_to_rnn(p: &SistaParams, k: usize) -> StackedRnnParams {
    let layer = SistaLayer::from_params(p);
    map_layers(&p.h0, &vec![layer; k])
}

/// Chain rule through [`map_layers`]: given `dL/d(RNN params)`, returns
/// `dL/dh0` and `dL/d(layer k params)` for every layer.
pub fn pull_back_layers(
    layers: &[SistaLayer],
    grad: &StackedRnnParams,
) -> (DenseVector, Vec<SistaLayer>) {
    let last = layers.len() - 1;
    let out = layers
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let gs = if k > 0 { Some(&grad.s[k - 1]) } else { None };
            let gu = if k == last { Some(&grad.u) } else { None };
            pull_back_layer(l, k == 0, &grad.v[k], &grad.w[k], gs, &grad.b[k], gu)
        })
        .collect();
    (grad.h0[0].clone(), out)
}

fn pull_back_layer(
    l: &SistaLayer,
    first: bool,
    gv: &DenseMatrix,
    gw: &DenseMatrix,
    gs: Option<&DenseMatrix>,
    gb: &DenseVector,
    gu: Option<&DenseMatrix>,
) -> SistaLayer {
    let n = l.d.rows();
    let inv = 1.0 / l.alpha;
    let inv2 = inv * inv;
    let terms = layer_terms(l);
    let mut g = l.zeros_like();
    let mut g_gram = DenseMatrix::zeros(n, n);
    let mut g_predict = DenseMatrix::zeros(n, n);

    // b = lambda1/alpha
    let gb_sum: f64 = gb.iter().sum();
    g.lambda1 += gb_sum * inv;
    g.alpha -= l.lambda1 * gb_sum * inv2;

    // V = input/alpha
    let g_input = gv.scaled(inv);
    g.alpha -= gv.inner(&terms.input) * inv2;

    // S = I - gram/alpha
    if let Some(gs) = gs {
        g_gram.axpy(-inv, gs);
        g.alpha += gs.inner(&terms.gram) * inv2;
    }

    let gw_p = gw.inner(&terms.predict);
    if first {
        // W = (1 + lambda2/alpha) P - gram P/alpha
        let gram_predict = terms.gram.mul(&terms.predict);
        g_predict.axpy(1.0 + l.lambda2 * inv, gw);
        g.lambda2 += gw_p * inv;
        g.alpha += (gw.inner(&gram_predict) - l.lambda2 * gw_p) * inv2;
        let g_gp = gw.scaled(-inv);
        g_gram.axpy(1.0, &g_gp.mul_t(&terms.predict));
        g_predict.axpy(1.0, &terms.gram.tmul(&g_gp));
    } else {
        // W = lambda2/alpha P
        g_predict.axpy(l.lambda2 * inv, gw);
        g.lambda2 += gw_p * inv;
        g.alpha -= l.lambda2 * gw_p * inv2;
    }

    // P = D^T F D
    let fd = l.f.mul(&l.d);
    g.d.axpy(1.0, &fd.mul_t(&g_predict));
    g.d.axpy(1.0, &l.f.tmul(&l.d).mul(&g_predict));
    g.f.axpy(1.0, &l.d.mul(&g_predict).mul_t(&l.d));

    // gram = D^T Q D with Q = A^T A + lambda2 I (symmetric)
    let mut q = l.a.tmul(&l.a);
    q.add_diag(l.lambda2);
    let g_gram_sym = g_gram.add(&g_gram.transpose());
    g.d.axpy(1.0, &q.mul(&l.d).mul(&g_gram_sym));
    let g_q = l.d.mul(&g_gram).mul_t(&l.d);
    g.a.axpy(1.0, &l.a.mul(&g_q.add(&g_q.transpose())));
    g.lambda2 += g_q.trace();

    // input = D^T A^T
    g.d.axpy(1.0, &l.a.tmul(&g_input.transpose()));
    g.a.axpy(1.0, &g_input.tmul(&l.d.transpose()));

    if let Some(gu) = gu {
        g.d.axpy(1.0, gu);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::{build_dictionary, DictionaryKind, DictionarySpec};
    use crate::rng;
    use rand::Rng;

    #[test]
    fn unit_step_identity_dictionary_substitution() {
        let mut r = rng::stream(1, 0);
        let (m, n) = (3, 5);
        let a = DenseMatrix::from_fn(m, n, |_, _| r.random_range(-1.0..1.0));
        let f = DenseMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
        let p = SistaParams {
            a: a.clone(),
            d: DenseMatrix::identity(n),
            f: f.clone(),
            h0: DenseVector::zeros(n),
            alpha: 1.0,
            lambda1: 0.3,
            lambda2: 0.0,
        };
        let rnn = map_sista_to_rnn(&p, 3);
        let ata = a.transpose().mul(&a);
        for v in &rnn.v {
            assert!(v.max_abs_diff(&a.transpose()) < 1e-15);
        }
        for s in &rnn.s {
            assert!(s.max_abs_diff(&DenseMatrix::identity(n).sub(&ata)) < 1e-14);
        }
        assert!(rnn.w[0].max_abs_diff(&f.sub(&ata.mul(&f))) < 1e-14);
        assert!(rnn.w[1..].iter().all(|w| w.max_abs() == 0.0));
        assert_eq!(rnn.u, DenseMatrix::identity(n));
        assert_eq!(rnn.c, DenseVector::zeros(n));
        assert!(rnn.b.iter().all(|b| b.iter().all(|v| *v == 0.3)));
    }

    #[test]
    fn orthogonal_dictionary_identity_prediction_gives_identity_p() {
        let n = 8;
        let d = build_dictionary(&DictionarySpec::new(DictionaryKind::Daubechies8, n, 1)).unwrap();
        let p = SistaParams {
            a: DenseMatrix::zeros(2, n),
            d,
            f: DenseMatrix::identity(n),
            h0: DenseVector::zeros(n),
            alpha: 2.0,
            lambda1: 0.1,
            lambda2: 0.5,
        };
        let rnn = map_sista_to_rnn(&p, 2);
        // with A = 0: W^(2) = lambda2/alpha P = 0.25 I
        assert!(rnn.w[1].max_abs_diff(&DenseMatrix::identity(n).scaled(0.25)) < 1e-12);
    }
}
