use std::fmt;

use crate::error::{Error, Result};
use crate::linops::{DenseMatrix, DenseVector};

/// How the hidden layers of a stacked RNN are wired.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Connectivity {
    /// Conventional stack: layer `k` recurs on its own previous state and
    /// layers above the first are fed by the layer below.
    Generic,
    /// Unfolded-SISTA wiring: every layer sees the input, and every layer's
    /// recurrence reads the *last* layer's previous state.
    Sista,
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Connectivity::Generic => "generic",
            Connectivity::Sista => "sista",
        })
    }
}

/// Parameters of a `K`-layer stacked RNN with soft-threshold activations.
///
/// Per-layer vectors are indexed by layer `0..K`. `s[k-1]` is the cross-layer
/// matrix feeding layer `k` from layer `k-1` (so `s.len() == K - 1`).
///
/// `h0` holds one initial state per layer for generic wiring and a single
/// shared state for SISTA wiring. `v` holds one input matrix per layer, except
/// that generic wiring may carry a single matrix, meaning only the first
/// layer receives the input.
///
/// The same struct doubles as the container for parameter gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct StackedRnnParams {
    pub connectivity: Connectivity,
    pub h0: Vec<DenseVector>,
    pub b: Vec<DenseVector>,
    pub w: Vec<DenseMatrix>,
    pub v: Vec<DenseMatrix>,
    pub s: Vec<DenseMatrix>,
    pub u: DenseMatrix,
    pub c: DenseVector,
}

/// Soft-threshold activation `sign(a) * max(|a| - b, 0)` and whether `a` is
/// outside the dead zone. The derivative is taken as 0 at `|a| == b`.
#[inline]
pub(crate) fn activate(a: f64, b: f64) -> (f64, bool) {
    if a.abs() > b {
        (a - b * a.signum(), true)
    } else {
        (0.0, false)
    }
}

/// Everything the backward pass needs from a forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTape {
    pub(crate) connectivity: Connectivity,
    /// Parameterization that produced the tape, for mismatch detection.
    pub(crate) origin: &'static str,
    pub(crate) layers: usize,
    pub(crate) hidden_len: usize,
    pub(crate) input_len: usize,
    pub(crate) x_seq: Vec<DenseVector>,
    /// `pre[t][k]`: pre-activation of layer `k` at step `t`.
    pub(crate) pre: Vec<Vec<DenseVector>>,
    /// `hidden[t][k]`: post-activation of layer `k` at step `t`.
    pub(crate) hidden: Vec<Vec<DenseVector>>,
}

impl ForwardTape {
    pub fn steps(&self) -> usize {
        self.x_seq.len()
    }

    pub fn pre_activations(&self) -> &[Vec<DenseVector>] {
        &self.pre
    }

    pub fn hidden_states(&self) -> &[Vec<DenseVector>] {
        &self.hidden
    }

    /// Final-layer states `h_t^(K)`, the sparse-code estimates.
    pub fn codes(&self) -> Vec<DenseVector> {
        self.hidden.iter().map(|hs| hs[self.layers - 1].clone()).collect()
    }
}

impl StackedRnnParams {
    pub fn layers(&self) -> usize {
        self.w.len()
    }

    pub fn hidden_len(&self) -> usize {
        self.u.cols()
    }

    pub fn input_len(&self) -> usize {
        self.v[0].cols()
    }

    pub fn output_len(&self) -> usize {
        self.u.rows()
    }

    fn receives_input(&self, layer: usize) -> bool {
        layer < self.v.len()
    }

    fn h0_for_layer(&self, layer: usize) -> &DenseVector {
        &self.h0[layer.min(self.h0.len() - 1)]
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.w.len();
        if k == 0 {
            return Err(Error::InvalidArgument("stacked RNN needs at least one layer".into()));
        }
        let n = self.u.cols();
        let m = self.v.first().map(|v| v.cols()).unwrap_or(0);
        let h0_ok = match self.connectivity {
            Connectivity::Sista => self.h0.len() == 1 && self.v.len() == k,
            Connectivity::Generic => self.h0.len() == k && (self.v.len() == 1 || self.v.len() == k),
        };
        if !h0_ok {
            return Err(Error::InvalidArgument(format!(
                "{} wiring with {k} layers cannot take {} initial states and {} input matrices",
                self.connectivity,
                self.h0.len(),
                self.v.len()
            )));
        }
        let shape_err = |what: &str, want: String, got: String| {
            Err(Error::dims("StackedRnnParams", format!("{what} {want}"), got))
        };
        if self.b.len() != k || self.s.len() != k - 1 {
            return shape_err("per-layer counts", format!("b:{k} s:{}", k - 1), format!("b:{} s:{}", self.b.len(), self.s.len()));
        }
        for w in self.w.iter().chain(&self.s) {
            if w.shape() != (n, n) {
                return shape_err("recurrent/cross-layer matrix", format!("{n}x{n}"), format!("{:?}", w.shape()));
            }
        }
        for v in &self.v {
            if v.shape() != (n, m) {
                return shape_err("input matrix", format!("{n}x{m}"), format!("{:?}", v.shape()));
            }
        }
        for vec in self.h0.iter().chain(&self.b) {
            if vec.len() != n {
                return shape_err("state/threshold vector", n.to_string(), vec.len().to_string());
            }
        }
        if self.c.len() != self.u.rows() {
            return shape_err("output bias", self.u.rows().to_string(), self.c.len().to_string());
        }
        Ok(())
    }

    /// All-zero parameters with the same shapes.
    pub fn zeros_like(&self) -> Self {
        let zm = |m: &DenseMatrix| DenseMatrix::zeros(m.rows(), m.cols());
        let zv = |v: &DenseVector| DenseVector::zeros(v.len());
        StackedRnnParams {
            connectivity: self.connectivity,
            h0: self.h0.iter().map(zv).collect(),
            b: self.b.iter().map(zv).collect(),
            w: self.w.iter().map(zm).collect(),
            v: self.v.iter().map(zm).collect(),
            s: self.s.iter().map(zm).collect(),
            u: zm(&self.u),
            c: zv(&self.c),
        }
    }

    /// `self += alpha * other` over every parameter.
    pub fn axpy(&mut self, alpha: f64, other: &StackedRnnParams) {
        for (a, b) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (x, y) in a.1.iter_mut().zip(b.1) {
                *x += alpha * y;
            }
        }
    }

    /// Named parameter blocks in a fixed order.
    pub fn blocks(&self) -> Vec<(&'static str, &[f64])> {
        let mut out: Vec<(&'static str, &[f64])> = Vec::new();
        out.extend(self.h0.iter().map(|v| ("h0", v.as_slice())));
        out.extend(self.b.iter().map(|v| ("b", v.as_slice())));
        out.extend(self.w.iter().map(|m| ("W", m.as_slice())));
        out.extend(self.v.iter().map(|m| ("V", m.as_slice())));
        out.extend(self.s.iter().map(|m| ("S", m.as_slice())));
        out.push(("U", self.u.as_slice()));
        out.push(("c", self.c.as_slice()));
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        let mut out: Vec<(&'static str, &mut [f64])> = Vec::new();
        out.extend(self.h0.iter_mut().map(|v| ("h0", v.as_mut_slice())));
        out.extend(self.b.iter_mut().map(|v| ("b", v.as_mut_slice())));
        out.extend(self.w.iter_mut().map(|m| ("W", m.as_mut_slice())));
        out.extend(self.v.iter_mut().map(|m| ("V", m.as_mut_slice())));
        out.extend(self.s.iter_mut().map(|m| ("S", m.as_mut_slice())));
        out.push(("U", self.u.as_mut_slice()));
        out.push(("c", self.c.as_mut_slice()));
        out
    }

    pub(crate) fn check_inputs(&self, x_seq: &[DenseVector]) -> Result<()> {
        self.validate()?;
        let m = self.input_len();
        match x_seq.iter().position(|x| x.len() != m) {
            Some(t) => Err(Error::dims("forward", format!("x_{t} of length {m}"), x_seq[t].len())),
            None => Ok(()),
        }
    }

    /// Forward pass. Returns `y_hat_t = U h_t^(K) + c` for every step and the tape.
    pub fn forward(&self, x_seq: &[DenseVector]) -> Result<(Vec<DenseVector>, ForwardTape)> {
        self.check_inputs(x_seq)?;
        Ok(self.forward_unchecked(x_seq, self.connectivity_name()))
    }

    fn connectivity_name(&self) -> &'static str {
        match self.connectivity {
            Connectivity::Generic => "generic",
            Connectivity::Sista => "sista",
        }
    }

    pub(crate) fn forward_unchecked(
        &self,
        x_seq: &[DenseVector],
        origin: &'static str,
    ) -> (Vec<DenseVector>, ForwardTape) {
        let k_total = self.layers();
        let n = self.hidden_len();
        let mut tape = ForwardTape {
            connectivity: self.connectivity,
            origin,
            layers: k_total,
            hidden_len: n,
            input_len: self.input_len(),
            x_seq: x_seq.to_vec(),
            pre: Vec::with_capacity(x_seq.len()),
            hidden: Vec::with_capacity(x_seq.len()),
        };
        let mut y_seq = Vec::with_capacity(x_seq.len());
        for (t, x) in x_seq.iter().enumerate() {
            let mut pre_t: Vec<DenseVector> = Vec::with_capacity(k_total);
            let mut hid_t: Vec<DenseVector> = Vec::with_capacity(k_total);
            for k in 0..k_total {
                let source = self.recurrence_source(&tape, t, k);
                let mut a = self.w[k].mv(source);
                if self.receives_input(k) {
                    self.v[k].mv_acc(x, &mut a);
                }
                if k > 0 {
                    self.s[k - 1].mv_acc(&hid_t[k - 1], &mut a);
                }
                let b = &self.b[k];
                let h = DenseVector::from_fn(n, |i| activate(a[i], b[i]).0);
                pre_t.push(a);
                hid_t.push(h);
            }
            let mut y = self.c.clone();
            self.u.mv_acc(&hid_t[k_total - 1], &mut y);
            y_seq.push(y);
            tape.pre.push(pre_t);
            tape.hidden.push(hid_t);
        }
        (y_seq, tape)
    }

    /// State read by layer `k`'s recurrence at step `t`.
    fn recurrence_source<'a>(&'a self, tape: &'a ForwardTape, t: usize, k: usize) -> &'a DenseVector {
        let layer = match self.connectivity {
            Connectivity::Generic => k,
            Connectivity::Sista => self.layers() - 1,
        };
        if t == 0 {
            self.h0_for_layer(k)
        } else {
            &tape.hidden[t - 1][layer]
        }
    }

    fn check_tape(&self, tape: &ForwardTape, origin: &'static str) -> Result<()> {
        let matches = tape.origin == origin
            && tape.connectivity == self.connectivity
            && tape.layers == self.layers()
            && tape.hidden_len == self.hidden_len()
            && tape.input_len == self.input_len();
        if matches {
            Ok(())
        } else {
            Err(Error::TapeMismatch {
                tape: format!(
                    "{} ({} wiring, K={}, N={}, M={})",
                    tape.origin, tape.connectivity, tape.layers, tape.hidden_len, tape.input_len
                ),
                params: format!(
                    "{origin} ({} wiring, K={}, N={}, M={})",
                    self.connectivity,
                    self.layers(),
                    self.hidden_len(),
                    self.input_len()
                ),
            })
        }
    }

    /// Reverse-mode gradient of a loss with `dL/dy_hat_t = grad_y[t]`.
    pub fn backward(&self, tape: &ForwardTape, grad_y: &[DenseVector]) -> Result<StackedRnnParams> {
        self.backward_from(tape, grad_y, self.connectivity_name())
    }

    pub(crate) fn backward_from(
        &self,
        tape: &ForwardTape,
        grad_y: &[DenseVector],
        origin: &'static str,
    ) -> Result<StackedRnnParams> {
        self.check_tape(tape, origin)?;
        if grad_y.len() != tape.steps() {
            return Err(Error::dims("backward", tape.steps(), grad_y.len()));
        }
        if let Some(g) = grad_y.iter().find(|g| g.len() != self.output_len()) {
            return Err(Error::dims("backward", self.output_len(), g.len()));
        }
        let k_total = self.layers();
        let last = k_total - 1;
        let n = self.hidden_len();
        let mut grads = self.zeros_like();
        // carry[k]: dL/dh_t^(k) arriving from step t+1 through the recurrence
        let mut carry = vec![DenseVector::zeros(n); k_total];

        for t in (0..tape.steps()).rev() {
            let x = &tape.x_seq[t];
            let mut gh = std::mem::replace(&mut carry, vec![DenseVector::zeros(n); k_total]);
            let gy = &grad_y[t];
            self.u.tmv_acc(gy, &mut gh[last]);
            grads.u.add_outer(1.0, gy, &tape.hidden[t][last]);
            grads.c.axpy(1.0, gy);

            for k in (0..k_total).rev() {
                let a = &tape.pre[t][k];
                let b = &self.b[k];
                let mut ga = DenseVector::zeros(n);
                for i in 0..n {
                    if activate(a[i], b[i]).1 {
                        ga[i] = gh[k][i];
                        grads.b[k][i] -= a[i].signum() * gh[k][i];
                    }
                }
                let source = self.recurrence_source(tape, t, k);
                grads.w[k].add_outer(1.0, &ga, source);
                if self.receives_input(k) {
                    grads.v[k].add_outer(1.0, &ga, x);
                }
                if k > 0 {
                    grads.s[k - 1].add_outer(1.0, &ga, &tape.hidden[t][k - 1]);
                    let (below, _) = gh.split_at_mut(k);
                    self.s[k - 1].tmv_acc(&ga, &mut below[k - 1]);
                }
                let target = match self.connectivity {
                    Connectivity::Generic => k,
                    Connectivity::Sista => last,
                };
                if t == 0 {
                    let slot = target.min(grads.h0.len() - 1);
                    self.w[k].tmv_acc(&ga, &mut grads.h0[slot]);
                } else {
                    self.w[k].tmv_acc(&ga, &mut carry[target]);
                }
            }
        }
        Ok(grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn random_params(conn: Connectivity, k: usize, n: usize, m: usize, seed: u64) -> StackedRnnParams {
        let mut r = rng::stream(seed, 0);
        let mut mat = |rows, cols| DenseMatrix::from_fn(rows, cols, |_, _| r.random_range(-0.6..0.6));
        let w = (0..k).map(|_| mat(n, n)).collect();
        let s = (1..k).map(|_| mat(n, n)).collect();
        let v_count = if conn == Connectivity::Sista { k } else { 1 };
        let v = (0..v_count).map(|_| mat(n, m)).collect();
        let u = mat(n, n);
        let mut r = rng::stream(seed, 1);
        let mut vecr = |lo: f64, hi: f64| DenseVector::from_fn(n, |_| r.random_range(lo..hi));
        let h0_count = if conn == Connectivity::Sista { 1 } else { k };
        StackedRnnParams {
            connectivity: conn,
            h0: (0..h0_count).map(|_| vecr(-0.5, 0.5)).collect(),
            b: (0..k).map(|_| vecr(0.02, 0.2)).collect(),
            w,
            v,
            s,
            u,
            c: vecr(-0.1, 0.1),
        }
    }

    fn inputs(t: usize, m: usize, seed: u64) -> Vec<DenseVector> {
        let mut r = rng::stream(seed, 2);
        (0..t).map(|_| DenseVector::from_fn(m, |_| r.random_range(-1.0..1.0))).collect()
    }

    fn half_sq_loss(p: &StackedRnnParams, xs: &[DenseVector], ys: &[DenseVector]) -> f64 {
        let (yh, _) = p.forward(xs).unwrap();
        yh.iter().zip(ys).map(|(a, b)| 0.5 * a.sub(b).norm_sq()).sum()
    }

    fn min_kink_margin(p: &StackedRnnParams, tape: &ForwardTape) -> f64 {
        let mut m = f64::INFINITY;
        for pre_t in &tape.pre {
            for (k, a) in pre_t.iter().enumerate() {
                for i in 0..a.len() {
                    m = m.min((a[i].abs() - p.b[k][i]).abs());
                }
            }
        }
        m
    }

    fn fd_check(conn: Connectivity, seed: u64) {
        let (k, n, m, t) = (2, 6, 3, 3);
        let mut seed = seed;
        let (p, xs) = loop {
            let p = random_params(conn, k, n, m, seed);
            let xs = inputs(t, m, seed);
            let (_, tape) = p.forward(&xs).unwrap();
            if min_kink_margin(&p, &tape) > 1e-3 {
                break (p, xs);
            }
            seed += 1000;
        };
        let ys = inputs(t, n, seed + 7);
        let (yh, tape) = p.forward(&xs).unwrap();
        let gy: Vec<DenseVector> = yh.iter().zip(&ys).map(|(a, b)| a.sub(b)).collect();
        let analytic = p.backward(&tape, &gy).unwrap();

        let step = 1e-6;
        let mut num = Vec::new();
        let mut ana = Vec::new();
        let blocks = p.blocks().iter().map(|(_, b)| b.len()).collect::<Vec<_>>();
        for (bi, len) in blocks.into_iter().enumerate() {
            for i in 0..len {
                let mut plus = p.clone();
                plus.blocks_mut()[bi].1[i] += step;
                let mut minus = p.clone();
                minus.blocks_mut()[bi].1[i] -= step;
                num.push((half_sq_loss(&plus, &xs, &ys) - half_sq_loss(&minus, &xs, &ys)) / (2.0 * step));
                ana.push(analytic.blocks()[bi].1[i]);
            }
        }
        let diff: f64 = num.iter().zip(&ana).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = ana.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(diff / scale < 1e-6, "{conn}: relative error {}", diff / scale);
    }

    #[test]
    fn generic_gradients_match_finite_differences() {
        for seed in 0..4 {
            fd_check(Connectivity::Generic, seed);
        }
    }

    #[test]
    fn sista_gradients_match_finite_differences() {
        for seed in 10..14 {
            fd_check(Connectivity::Sista, seed);
        }
    }

    #[test]
    fn single_layer_wirings_coincide() {
        let mut g = random_params(Connectivity::Generic, 1, 5, 3, 3);
        let xs = inputs(4, 3, 3);
        let (yg, _) = g.forward(&xs).unwrap();
        g.connectivity = Connectivity::Sista;
        let (ys, _) = g.forward(&xs).unwrap();
        assert_eq!(yg, ys);
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let mut p = random_params(Connectivity::Sista, 3, 4, 2, 4);
        p = p.zeros_like();
        let (y, _) = p.forward(&inputs(3, 2, 4)).unwrap();
        assert!(y.iter().all(|v| v.norm_inf() == 0.0));
    }

    #[test]
    fn zero_upstream_gradient() {
        let p = random_params(Connectivity::Generic, 2, 4, 2, 5);
        let xs = inputs(3, 2, 5);
        let (_, tape) = p.forward(&xs).unwrap();
        let g = p.backward(&tape, &vec![DenseVector::zeros(4); 3]).unwrap();
        assert!(g.blocks().iter().all(|(_, b)| b.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn output_bias_gradient_is_residual() {
        let mut p = random_params(Connectivity::Sista, 1, 3, 3, 6);
        p.b[0] = DenseVector::zeros(3);
        let xs = inputs(1, 3, 6);
        let y = inputs(1, 3, 7);
        let (yh, tape) = p.forward(&xs).unwrap();
        let residual = yh[0].sub(&y[0]);
        let g = p.backward(&tape, std::slice::from_ref(&residual)).unwrap();
        assert_eq!(g.c, residual);
    }

    #[test]
    fn mismatched_tape_rejected() {
        let p = random_params(Connectivity::Sista, 2, 4, 2, 7);
        let q = random_params(Connectivity::Generic, 2, 4, 2, 7);
        let (_, tape) = p.forward(&inputs(2, 2, 7)).unwrap();
        let err = q.backward(&tape, &vec![DenseVector::zeros(4); 2]).unwrap_err();
        assert!(matches!(err, Error::TapeMismatch { .. }));
        assert!(p.backward(&tape, &vec![DenseVector::zeros(4); 1]).is_err());
    }

    #[test]
    fn invalid_shapes_rejected() {
        let mut p = random_params(Connectivity::Sista, 2, 4, 2, 8);
        p.h0.push(DenseVector::zeros(4));
        assert!(p.validate().is_err());
        let mut p = random_params(Connectivity::Generic, 2, 4, 2, 8);
        p.s.clear();
        assert!(p.validate().is_err());
        let p = random_params(Connectivity::Generic, 2, 4, 2, 8);
        assert!(p.forward(&inputs(2, 3, 1)).is_err());
    }
}
