use super::soft::soft_unchecked;
use crate::error::{Error, Result};
use crate::linops::{DenseMatrix, DenseVector};

/// Denominator guard for relative-improvement convergence tests.
pub const OBJECTIVE_EPS: f64 = 1e-300;

/// `min_h 1/2 ||x - A D h||^2 + lambda ||h||_1`
#[derive(Clone, Debug)]
pub struct LassoProblem {
    pub a: DenseMatrix,
    pub d: DenseMatrix,
    pub x: DenseVector,
    pub lambda: f64,
}

impl LassoProblem {
    pub fn new(a: DenseMatrix, d: DenseMatrix, x: DenseVector, lambda: f64) -> Result<Self> {
        let p = LassoProblem { a, d, x, lambda };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let (m, n) = self.a.shape();
        if self.d.shape() != (n, n) {
            return Err(Error::dims("LassoProblem", format!("D {n}x{n}"), format!("{:?}", self.d.shape())));
        }
        if self.x.len() != m {
            return Err(Error::dims("LassoProblem", format!("x of length {m}"), self.x.len()));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        Ok(())
    }

    pub fn code_len(&self) -> usize {
        self.d.cols()
    }

    /// The effective dictionary `A D`.
    pub fn operator(&self) -> DenseMatrix {
        self.a.mul(&self.d)
    }
}

pub fn lasso_objective(p: &LassoProblem, h: &DenseVector) -> Result<f64> {
    if h.len() != p.code_len() {
        return Err(Error::dims("lasso_objective", p.code_len(), h.len()));
    }
    let residual = p.x.sub(&p.a.mv(&p.d.mv(h)));
    Ok(0.5 * residual.norm_sq() + p.lambda * h.norm_l1())
}

/// Precomputed pieces of the proximal-gradient step on `1/2 ||x - Phi h||^2`.
pub(crate) struct GradientStep {
    pub phi: DenseMatrix,
    pub gram: DenseMatrix,
    pub correlation: DenseVector,
}

impl GradientStep {
    pub fn new(phi: DenseMatrix, x: &DenseVector) -> Self {
        let gram = phi.tmul(&phi);
        let correlation = phi.tmv(x);
        GradientStep {
            phi,
            gram,
            correlation,
        }
    }

    /// `soft_{lambda/alpha}((I - G/alpha) h + Phi^T x / alpha)`
    pub fn apply(&self, h: &DenseVector, alpha: f64, lambda: f64) -> DenseVector {
        let mut z = h.clone();
        z.axpy(-1.0 / alpha, &self.gram.mv(h));
        z.axpy(1.0 / alpha, &self.correlation);
        soft_unchecked(&z, lambda / alpha)
    }

    pub fn objective(&self, x: &DenseVector, h: &DenseVector, lambda: f64) -> f64 {
        0.5 * x.sub(&self.phi.mv(h)).norm_sq() + lambda * h.norm_l1()
    }
}

#[derive(Clone, Debug)]
pub struct IstaOutcome {
    pub h: DenseVector,
    /// Objective after each iteration; empty unless requested.
    pub trace: Vec<f64>,
}

fn check_start(p: &LassoProblem, h0: &DenseVector, alpha: f64) -> Result<()> {
    p.validate()?;
    if h0.len() != p.code_len() {
        return Err(Error::dims("ista", format!("h0 of length {}", p.code_len()), h0.len()));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("step parameter alpha must be > 0, got {alpha}")));
    }
    Ok(())
}

/// Runs exactly `k` ISTA iterations from `h0`.
pub fn ista(
    p: &LassoProblem,
    h0: &DenseVector,
    alpha: f64,
    k: usize,
    record_trace: bool,
) -> Result<IstaOutcome> {
    check_start(p, h0, alpha)?;
    let step = GradientStep::new(p.operator(), &p.x);
    let mut h = h0.clone();
    let mut trace = Vec::with_capacity(if record_trace { k } else { 0 });
    for _ in 0..k {
        h = step.apply(&h, alpha, p.lambda);
        if record_trace {
            trace.push(step.objective(&p.x, &h, p.lambda));
        }
    }
    Ok(IstaOutcome { h, trace })
}

#[derive(Clone, Debug)]
pub struct ConvergedOutcome {
    pub h: DenseVector,
    pub iterations: usize,
    /// False when `max_iter` was reached before the improvement test passed.
    pub converged: bool,
}

/// Iterates until the relative objective improvement
/// `(obj_{k-1} - obj_k) / max(obj_{k-1}, 1e-300)` drops below `rel_tol`.
pub fn ista_converged(
    p: &LassoProblem,
    h0: &DenseVector,
    alpha: f64,
    rel_tol: f64,
    max_iter: usize,
) -> Result<ConvergedOutcome> {
    check_start(p, h0, alpha)?;
    if !(rel_tol > 0.0) {
        return Err(Error::InvalidArgument(format!("rel_tol must be > 0, got {rel_tol}")));
    }
    let step = GradientStep::new(p.operator(), &p.x);
    let (h, iterations, converged) = iterate_until_flat(
        h0.clone(),
        |h| step.apply(h, alpha, p.lambda),
        |h| step.objective(&p.x, h, p.lambda),
        rel_tol,
        max_iter,
    );
    Ok(ConvergedOutcome {
        h,
        iterations,
        converged,
    })
}

pub(crate) fn iterate_until_flat(
    mut h: DenseVector,
    update: impl Fn(&DenseVector) -> DenseVector,
    objective: impl Fn(&DenseVector) -> f64,
    rel_tol: f64,
    max_iter: usize,
) -> (DenseVector, usize, bool) {
    let mut prev = objective(&h);
    for iter in 1..=max_iter {
        h = update(&h);
        let obj = objective(&h);
        if (prev - obj) / prev.max(OBJECTIVE_EPS) < rel_tol {
            return (h, iter, true);
        }
        prev = obj;
    }
    (h, max_iter, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::spectral_norm_sq;
    use crate::rng;
    use rand::Rng;

    fn v(x: &[f64]) -> DenseVector {
        DenseVector::from_vec(x.to_vec()).unwrap()
    }

    fn eye_problem(x: &[f64], lambda: f64) -> LassoProblem {
        let n = x.len();
        LassoProblem::new(DenseMatrix::identity(n), DenseMatrix::identity(n), v(x), lambda).unwrap()
    }

    fn random_problem(m: usize, n: usize, lambda: f64, seed: u64) -> LassoProblem {
        let mut r = rng::stream(seed, 0);
        let a = DenseMatrix::from_fn(m, n, |_, _| r.random_range(-1.0..1.0));
        let d = DenseMatrix::from_fn(n, n, |_, _| r.random_range(-0.5..0.5));
        let x = DenseVector::from_fn(m, |_| r.random_range(-1.0..1.0));
        LassoProblem::new(a, d, x, lambda).unwrap()
    }

    #[test]
    fn objective_examples() {
        let p = eye_problem(&[1.0, 0.0], 1.0);
        assert_eq!(lasso_objective(&p, &v(&[0.0, 0.0])).unwrap(), 0.5);
        assert_eq!(lasso_objective(&p, &v(&[1.0, 0.0])).unwrap(), 1.0);
        assert!(lasso_objective(&p, &v(&[1.0])).is_err());
    }

    #[test]
    fn objective_matches_elementwise_recomputation() {
        let p = random_problem(4, 6, 0.3, 5);
        let h = v(&[0.1, -0.2, 0.0, 0.5, 0.0, -1.0]);
        let mut data = 0.0;
        for i in 0..4 {
            let mut pred = 0.0;
            for j in 0..6 {
                for l in 0..6 {
                    pred += p.a[(i, j)] * p.d[(j, l)] * h[l];
                }
            }
            data += (p.x[i] - pred).powi(2);
        }
        let l1: f64 = h.iter().map(|x| x.abs()).sum();
        let oracle = 0.5 * data + 0.3 * l1;
        assert!((lasso_objective(&p, &h).unwrap() - oracle).abs() < 1e-14);
    }

    #[test]
    fn one_step_is_soft_threshold_of_x() {
        let p = eye_problem(&[2.0, -0.3], 0.5);
        let out = ista(&p, &DenseVector::zeros(2), 1.0, 1, false).unwrap();
        assert_eq!(out.h, v(&[1.5, 0.0]));
    }

    #[test]
    fn unregularised_step_lands_on_x() {
        let p = eye_problem(&[0.7, -1.1, 0.2], 0.0);
        let out = ista(&p, &DenseVector::zeros(3), 1.0, 1, true).unwrap();
        assert_eq!(out.h, p.x);
        assert_eq!(out.trace, vec![0.0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = eye_problem(&[1.0], 0.1);
        assert!(ista(&p, &DenseVector::zeros(1), 0.0, 1, false).is_err());
        assert!(ista(&p, &DenseVector::zeros(2), 1.0, 1, false).is_err());
        assert!(ista_converged(&p, &DenseVector::zeros(1), 1.0, 0.0, 5).is_err());
        assert!(LassoProblem::new(DenseMatrix::identity(2), DenseMatrix::identity(2), v(&[1.0, 2.0]), -1.0).is_err());
    }

    #[test]
    fn converges_to_long_run_fixed_point() {
        let p = random_problem(8, 16, 0.05, 9);
        let alpha = spectral_norm_sq(&p.operator()).unwrap() * 1.01;
        let h0 = DenseVector::zeros(16);
        // oracle: same update, run long
        let oracle = ista(&p, &h0, alpha, 20_000, false).unwrap();
        let oracle_obj = lasso_objective(&p, &oracle.h).unwrap();
        let out = ista_converged(&p, &h0, alpha, 1e-12, 20_000).unwrap();
        let obj = lasso_objective(&p, &out.h).unwrap();
        assert!((obj - oracle_obj).abs() < 1e-8, "{obj} vs {oracle_obj}");
    }

    #[test]
    fn fixed_point_stops_after_one_iteration() {
        let p = eye_problem(&[2.0, -0.3], 0.5);
        let fixed = v(&[1.5, 0.0]);
        let out = ista_converged(&p, &fixed, 1.0, 1e-4, 100).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(out.converged);
        assert!(out.h.max_abs_diff(&fixed) < 1e-12);
    }

    #[test]
    fn huge_lambda_shrinks_to_zero() {
        let p = random_problem(4, 6, 0.0, 3);
        let alpha = 2.0;
        let bound = p.operator().tmv(&p.x).norm_inf() / alpha;
        let p = LassoProblem { lambda: 1.01 * bound * alpha, ..p };
        let out = ista_converged(&p, &DenseVector::zeros(6), alpha, 1e-4, 100).unwrap();
        assert_eq!(out.h, DenseVector::zeros(6));
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn converged_matches_fixed_count_rerun() {
        let p = random_problem(6, 10, 0.1, 21);
        let alpha = spectral_norm_sq(&p.operator()).unwrap() * 1.5;
        let h0 = DenseVector::zeros(10);
        let out = ista_converged(&p, &h0, alpha, 1e-6, 5000).unwrap();
        let rerun = ista(&p, &h0, alpha, out.iterations, false).unwrap();
        assert_eq!(out.h, rerun.h);
    }

    #[test]
    fn reports_max_iter_without_error() {
        let p = random_problem(6, 10, 0.01, 4);
        let out = ista_converged(&p, &DenseVector::zeros(10), 50.0, 1e-15, 3).unwrap();
        assert_eq!(out.iterations, 3);
        assert!(!out.converged);
    }

    #[test]
    fn trace_is_monotone_under_lipschitz_step() {
        for seed in 0..5 {
            let p = random_problem(8, 16, 0.05, 100 + seed);
            let alpha = spectral_norm_sq(&p.operator()).unwrap();
            let h0 = DenseVector::zeros(16);
            let out = ista(&p, &h0, alpha, 200, true).unwrap();
            let mut prev = lasso_objective(&p, &h0).unwrap();
            for obj in out.trace {
                assert!(obj <= prev + 1e-12);
                prev = obj;
            }
        }
    }
}
