use crate::error::{Error, Result};
use crate::linops::DenseVector;

/// Per-element mean squared error over a sequence and its gradient w.r.t.
/// `y_hat`: `(1/(T N)) sum_t |y_hat_t - y_t|^2` and `(2/(T N)) (y_hat_t - y_t)`.
pub fn mse_loss(y_hat: &[DenseVector], y: &[DenseVector]) -> Result<(f64, Vec<DenseVector>)> {
    if y_hat.len() != y.len() {
        return Err(Error::dims("mse_loss", format!("{} steps", y.len()), y_hat.len()));
    }
    if let Some((a, b)) = y_hat.iter().zip(y).find(|(a, b)| a.len() != b.len()) {
        return Err(Error::dims("mse_loss", b.len(), a.len()));
    }
    let count: usize = y.iter().map(|v| v.len()).sum();
    if count == 0 {
        return Ok((0.0, y.iter().map(|v| DenseVector::zeros(v.len())).collect()));
    }
    let scale = 1.0 / count as f64;
    let mut loss = 0.0;
    let grad = y_hat
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = a.sub(b);
            loss += r.norm_sq();
            r.scaled(2.0 * scale)
        })
        .collect();
    Ok((loss * scale, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng as _;

    #[test]
    fn perfect_prediction() {
        let y = vec![DenseVector::from_fn(3, |i| i as f64); 2];
        let (l, g) = mse_loss(&y, &y).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|v| v.norm_inf() == 0.0));
    }

    #[test]
    fn unit_residual_has_unit_loss() {
        let y = vec![DenseVector::zeros(4); 3];
        let y_hat = vec![DenseVector::filled(4, 1.0); 3];
        assert_eq!(mse_loss(&y_hat, &y).unwrap().0, 1.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut r = rng::stream(3, 0);
        let mut rand_seq = || (0..3).map(|_| DenseVector::from_fn(4, |_| r.random_range(-1.0..1.0))).collect::<Vec<_>>();
        let y = rand_seq();
        let y_hat = rand_seq();
        let (_, g) = mse_loss(&y_hat, &y).unwrap();
        let h = 1e-7;
        for t in 0..3 {
            for i in 0..4 {
                let mut up = y_hat.clone();
                up[t][i] += h;
                let mut down = y_hat.clone();
                down[t][i] -= h;
                let fd = (mse_loss(&up, &y).unwrap().0 - mse_loss(&down, &y).unwrap().0) / (2.0 * h);
                assert!((fd - g[t][i]).abs() < 1e-7, "{fd} vs {}", g[t][i]);
            }
        }
    }

    #[test]
    fn shape_mismatch() {
        let a = vec![DenseVector::zeros(2)];
        assert!(mse_loss(&a, &[DenseVector::zeros(3)]).is_err());
        assert!(mse_loss(&a, &[]).is_err());
    }
}
