use crate::error::{Error, Result};
use crate::linops::DenseVector;

/// Scalar soft-threshold `sign(z) * max(|z| - b, 0)`, with `soft(0) = 0`.
#[inline]
pub fn soft_scalar(z: f64, b: f64) -> f64 {
    if z > b {
        z - b
    } else if z < -b {
        z + b
    } else {
        0.0
    }
}

/// Elementwise soft-threshold, the proximal operator of `b * ||.||_1`.
pub fn soft_threshold(z: &DenseVector, b: f64) -> Result<DenseVector> {
    if !(b >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "soft-threshold level must be non-negative, got {b}"
        )));
    }
    Ok(soft_unchecked(z, b))
}

pub(crate) fn soft_unchecked(z: &DenseVector, b: f64) -> DenseVector {
    DenseVector::from_fn(z.len(), |i| soft_scalar(z[i], b))
}
