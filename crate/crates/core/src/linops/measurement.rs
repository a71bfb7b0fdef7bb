use rand::Rng;

use super::DenseMatrix;
use crate::rng::{self, streams};

/// Random `m x n` measurement matrix with entries `+-1/(3 sqrt(m))`, each sign
/// drawn with probability 1/2. A pure function of `(m, n, seed)`.
///
/// The `1/3` factor keeps `||A D||_2` below one for orthogonal `D` in the usual
/// compression regimes, so a unit step size is stable.
pub fn sample_measurement_matrix(m: usize, n: usize, seed: u64) -> DenseMatrix {
    let magnitude = 1.0 / (3.0 * (m as f64).sqrt());
    let mut r = rng::stream(seed, streams::MEASUREMENT);
    DenseMatrix::from_fn(m, n, |_, _| {
        if r.random_bool(0.5) {
            magnitude
        } else {
            -magnitude
        }
    })
}
