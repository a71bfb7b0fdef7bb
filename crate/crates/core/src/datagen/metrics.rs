use crate::error::{Error, Result};
use crate::linops::DenseVector;

fn check_shapes(a: &[DenseVector], b: &[DenseVector]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::dims("metric", format!("{} steps", b.len()), a.len()));
    }
    match a.iter().zip(b).find(|(x, y)| x.len() != y.len()) {
        Some((x, y)) => Err(Error::dims("metric", y.len(), x.len())),
        None => Ok(()),
    }
}

/// Sum of squared errors over every step and entry.
pub fn sse(y_hat: &[DenseVector], y: &[DenseVector]) -> Result<f64> {
    check_shapes(y_hat, y)?;
    Ok(y_hat.iter().zip(y).map(|(a, b)| a.sub(b).norm_sq()).sum())
}

/// Mean squared error per element. Zero for empty input.
pub fn mse(y_hat: &[DenseVector], y: &[DenseVector]) -> Result<f64> {
    let total = sse(y_hat, y)?;
    let count: usize = y.iter().map(|v| v.len()).sum();
    Ok(if count == 0 { 0.0 } else { total / count as f64 })
}

/// `10 log10(peak^2 / mse)` with per-element MSE; `+inf` for a perfect match.
pub fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    }
}

pub fn psnr(y_hat: &[DenseVector], y: &[DenseVector], peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return Err(Error::InvalidArgument(format!("peak must be > 0, got {peak}")));
    }
    Ok(psnr_from_mse(mse(y_hat, y)?, peak))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(values: &[&[f64]]) -> Vec<DenseVector> {
        values.iter().map(|v| DenseVector::from_vec(v.to_vec()).unwrap()).collect()
    }

    #[test]
    fn identical_inputs() {
        let y = seq(&[&[0.1, 0.2], &[0.3, 0.4]]);
        assert_eq!(mse(&y, &y).unwrap(), 0.0);
        assert_eq!(psnr(&y, &y, 1.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn uniform_error_of_a_tenth() {
        let y = seq(&[&[0.5, 0.5], &[0.2, 0.9]]);
        let y_hat = seq(&[&[0.6, 0.4], &[0.3, 0.8]]);
        assert!((mse(&y_hat, &y).unwrap() - 0.01).abs() < 1e-15);
        assert!((psnr(&y_hat, &y, 1.0).unwrap() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn scaling_signals_and_peak_together_is_invariant() {
        let y = seq(&[&[0.5, 0.25, 0.0]]);
        let y_hat = seq(&[&[0.45, 0.3, 0.1]]);
        let scale = |s: &[DenseVector]| s.iter().map(|v| v.scaled(255.0)).collect::<Vec<_>>();
        let unit = psnr(&y_hat, &y, 1.0).unwrap();
        let bytes = psnr(&scale(&y_hat), &scale(&y), 255.0).unwrap();
        assert!((unit - bytes).abs() < 1e-10);
        // same data on the [0,1] scale but a 255 peak reads 20 log10(255) dB higher
        let mismatched = psnr(&y_hat, &y, 255.0).unwrap();
        assert!((mismatched - unit - 20.0 * 255f64.log10()).abs() < 1e-10);
    }

    #[test]
    fn psnr_decreases_with_mse() {
        let mut last = f64::INFINITY;
        for m in [1e-6, 1e-4, 1e-2, 1.0] {
            let p = psnr_from_mse(m, 1.0);
            assert!(p < last);
            last = p;
        }
    }

    #[test]
    fn shape_errors() {
        let a = seq(&[&[1.0]]);
        let b = seq(&[&[1.0, 2.0]]);
        assert!(mse(&a, &b).is_err());
        assert!(mse(&a, &[]).is_err());
        assert!(psnr(&a, &a, 0.0).is_err());
    }
}
