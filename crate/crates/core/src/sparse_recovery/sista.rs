use super::ista::iterate_until_flat;
use super::soft::soft_unchecked;
use crate::error::{Error, Result};
use crate::linops::{DenseMatrix, DenseVector};

/// Parameters of sequential ISTA: measurement `a` (M x N), dictionary `d`,
/// prediction matrix `f`, initial code `h0`, step parameter `alpha`,
/// sparsity weight `lambda1` and prediction weight `lambda2`.
#[derive(Clone, Debug, PartialEq)]
pub struct SistaParams {
    pub a: DenseMatrix,
    pub d: DenseMatrix,
    pub f: DenseMatrix,
    pub h0: DenseVector,
    pub alpha: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl SistaParams {
    pub fn validate(&self) -> Result<()> {
        let (_, n) = self.a.shape();
        for (name, m) in [("D", &self.d), ("F", &self.f)] {
            if m.shape() != (n, n) {
                return Err(Error::dims(
                    "SistaParams",
                    format!("{name} {n}x{n}"),
                    format!("{:?}", m.shape()),
                ));
            }
        }
        if self.h0.len() != n {
            return Err(Error::dims("SistaParams", format!("h0 of length {n}"), self.h0.len()));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidArgument(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !self.lambda1.is_finite() || !self.lambda2.is_finite() {
            return Err(Error::InvalidArgument("lambda1 and lambda2 must be finite".into()));
        }
        Ok(())
    }

    pub fn measurements(&self) -> usize {
        self.a.rows()
    }

    pub fn code_len(&self) -> usize {
        self.a.cols()
    }

    /// Per-time-step objective
    /// `1/2||x - A D h||^2 + lambda1 ||h||_1 + lambda2/2 ||D h - F D h_prev||^2`.
    pub fn step_objective(&self, x: &DenseVector, h: &DenseVector, h_prev: &DenseVector) -> f64 {
        let y = self.d.mv(h);
        let data = x.sub(&self.a.mv(&y)).norm_sq();
        let pred = y.sub(&self.f.mv(&self.d.mv(h_prev))).norm_sq();
        0.5 * data + self.lambda1 * h.norm_l1() + 0.5 * self.lambda2 * pred
    }
}

/// Output of a sequential recovery run.
#[derive(Clone, Debug)]
pub struct RecoveryResult {
    pub h_seq: Vec<DenseVector>,
    pub y_seq: Vec<DenseVector>,
    /// Per time step, the objective after each inner iteration. Empty unless requested.
    pub objective_trace: Vec<Vec<f64>>,
    /// Inner iterations performed at each time step.
    pub iterations: Vec<usize>,
    /// Time steps that stopped on `max_iter` rather than on the tolerance.
    pub unconverged_steps: Vec<usize>,
}

/// Operators shared by every time step, computed once per parameter set.
struct SistaOperators {
    /// `D^T A^T`, N x M
    pub input: DenseMatrix,
    /// `D^T (A^T A + lambda2 I) D`
    pub gram: DenseMatrix,
    /// `D^T F D`
    pub predict: DenseMatrix,
}

impl SistaOperators {
    pub fn new(p: &SistaParams) -> Self {
        let ad = p.a.mul(&p.d);
        let mut gram = ad.tmul(&ad);
        gram.axpy(p.lambda2, &p.d.tmul(&p.d));
        SistaOperators {
            input: ad.transpose(),
            gram,
            predict: p.d.tmul(&p.f.mul(&p.d)),
        }
    }
}

/// One SISTA inner iteration from `h`, given `input_term = D^T A^T x_t` and
/// `prediction = D^T F D h_prev`.
#[inline]
fn inner_step(
    ops: &SistaOperators,
    p: &SistaParams,
    h: &DenseVector,
    input_term: &DenseVector,
    prediction: &DenseVector,
) -> DenseVector {
    let inv = 1.0 / p.alpha;
    let mut z = h.clone();
    z.axpy(-inv, &ops.gram.mv(h));
    z.axpy(inv, input_term);
    z.axpy(p.lambda2 * inv, prediction);
    soft_unchecked(&z, p.lambda1 * inv)
}

fn check_inputs(x_seq: &[DenseVector], p: &SistaParams) -> Result<()> {
    p.validate()?;
    if let Some((t, x)) = x_seq.iter().enumerate().find(|(_, x)| x.len() != p.measurements()) {
        return Err(Error::dims(
            "sista",
            format!("x_{t} of length {}", p.measurements()),
            x.len(),
        ));
    }
    Ok(())
}

/// Sequential ISTA with `k` inner iterations per time step.
///
/// Each step is warm-started from the prediction `D^T F D h_{t-1}` and the
/// prediction also enters every inner iteration through the `lambda2` term.
pub fn sista(x_seq: &[DenseVector], p: &SistaParams, k: usize) -> Result<RecoveryResult> {
    run_sista(x_seq, p, k, false, |_, _| {})
}

/// [`sista`] that also records the objective after every inner iteration.
pub fn sista_traced(x_seq: &[DenseVector], p: &SistaParams, k: usize) -> Result<RecoveryResult> {
    run_sista(x_seq, p, k, true, |_, _| {})
}

/// [`sista`] that also returns every inner iterate `h_t^(0..=k)` for each `t`.
pub fn sista_iterates(
    x_seq: &[DenseVector],
    p: &SistaParams,
    k: usize,
) -> Result<(RecoveryResult, Vec<Vec<DenseVector>>)> {
    let mut iterates: Vec<Vec<DenseVector>> = Vec::with_capacity(x_seq.len());
    let result = run_sista(x_seq, p, k, false, |t, h| {
        if iterates.len() <= t {
            iterates.push(Vec::with_capacity(k + 1));
        }
        iterates[t].push(h.clone());
    })?;
    Ok((result, iterates))
}

fn run_sista(
    x_seq: &[DenseVector],
    p: &SistaParams,
    k: usize,
    record_trace: bool,
    mut observe: impl FnMut(usize, &DenseVector),
) -> Result<RecoveryResult> {
    check_inputs(x_seq, p)?;
    if k == 0 {
        return Err(Error::InvalidArgument("sista needs at least one iteration".into()));
    }
    let ops = SistaOperators::new(p);
    let mut h_prev = p.h0.clone();
    let mut out = RecoveryResult::with_capacity(x_seq.len());
    for (t, x) in x_seq.iter().enumerate() {
        let prediction = ops.predict.mv(&h_prev);
        let input_term = ops.input.mv(x);
        let mut h = prediction.clone();
        observe(t, &h);
        let mut trace = Vec::new();
        for _ in 0..k {
            h = inner_step(&ops, p, &h, &input_term, &prediction);
            observe(t, &h);
            if record_trace {
                trace.push(p.step_objective(x, &h, &h_prev));
            }
        }
        out.push(p, h.clone(), k, trace);
        h_prev = h;
    }
    Ok(out)
}

/// Sequential ISTA where every time step runs until its relative objective
/// improvement falls below `rel_tol` (or `max_iter` is hit).
pub fn sista_converged(
    x_seq: &[DenseVector],
    p: &SistaParams,
    rel_tol: f64,
    max_iter: usize,
) -> Result<RecoveryResult> {
    check_inputs(x_seq, p)?;
    if !(rel_tol > 0.0) {
        return Err(Error::InvalidArgument(format!("rel_tol must be > 0, got {rel_tol}")));
    }
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    let ops = SistaOperators::new(p);
    let mut h_prev = p.h0.clone();
    let mut out = RecoveryResult::with_capacity(x_seq.len());
    for (t, x) in x_seq.iter().enumerate() {
        let prediction = ops.predict.mv(&h_prev);
        let input_term = ops.input.mv(x);
        let (h, iters, converged) = iterate_until_flat(
            prediction.clone(),
            |h| inner_step(&ops, p, h, &input_term, &prediction),
            |h| p.step_objective(x, h, &h_prev),
            rel_tol,
            max_iter,
        );
        if !converged {
            out.unconverged_steps.push(t);
        }
        out.push(p, h.clone(), iters, Vec::new());
        h_prev = h;
    }
    Ok(out)
}

/// Full sequential objective summed over time, with `h_0 = p.h0`.
pub fn sista_objective(p: &SistaParams, h_seq: &[DenseVector], x_seq: &[DenseVector]) -> Result<f64> {
    check_inputs(x_seq, p)?;
    if h_seq.len() != x_seq.len() {
        return Err(Error::dims("sista_objective", x_seq.len(), h_seq.len()));
    }
    if let Some(h) = h_seq.iter().find(|h| h.len() != p.code_len()) {
        return Err(Error::dims("sista_objective", p.code_len(), h.len()));
    }
    let mut total = 0.0;
    let mut h_prev = &p.h0;
    for (h, x) in h_seq.iter().zip(x_seq) {
        total += p.step_objective(x, h, h_prev);
        h_prev = h;
    }
    Ok(total)
}

impl RecoveryResult {
    fn with_capacity(t: usize) -> Self {
        RecoveryResult {
            h_seq: Vec::with_capacity(t),
            y_seq: Vec::with_capacity(t),
            objective_trace: Vec::new(),
            iterations: Vec::with_capacity(t),
            unconverged_steps: Vec::new(),
        }
    }

    fn push(&mut self, p: &SistaParams, h: DenseVector, iters: usize, trace: Vec<f64>) {
        self.y_seq.push(p.d.mv(&h));
        self.h_seq.push(h);
        self.iterations.push(iters);
        if !trace.is_empty() {
            self.objective_trace.push(trace);
        }
    }
}
