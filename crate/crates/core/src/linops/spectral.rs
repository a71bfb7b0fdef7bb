use rand::Rng;

use super::{DenseMatrix, DenseVector};
use crate::error::{Error, Result};
use crate::rng::{self, streams};

pub const POWER_REL_TOL: f64 = 1e-10;
pub const POWER_MAX_ITER: usize = 10_000;

/// Squared spectral norm `||m||_2^2`, i.e. the largest eigenvalue of `m^T m`,
/// by power iteration from a fixed pseudo-random start vector.
///
/// Stops once the Rayleigh quotient changes by less than `1e-10` relative to
/// itself. Fails with the last iterate after 10,000 iterations.
pub fn spectral_norm_sq(m: &DenseMatrix) -> Result<f64> {
    spectral_norm_sq_with(m, POWER_REL_TOL, POWER_MAX_ITER)
}

pub fn spectral_norm_sq_with(m: &DenseMatrix, rel_tol: f64, max_iter: usize) -> Result<f64> {
    let n = m.cols();
    if n == 0 || m.rows() == 0 || m.max_abs() == 0.0 {
        return Ok(0.0);
    }
    let mut r = rng::stream(0x5eed, streams::POWER_ITERATION);
    let mut v = DenseVector::from_fn(n, |_| r.random_range(0.5..1.5));
    v = v.scaled(1.0 / v.norm());
    let mut estimate = 0.0;
    for iter in 1..=max_iter {
        let w = m.tmv(&m.mv(&v));
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            // start vector landed in the null space of m^T m
            return Ok(0.0);
        }
        v = w.scaled(1.0 / norm);
        if iter > 1 && (next - estimate).abs() <= rel_tol * next.abs() {
            return Ok(next);
        }
        estimate = next;
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        estimate,
        last_iterate: v.into_vec(),
    })
}
