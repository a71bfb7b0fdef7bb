use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::linops::{DenseMatrix, DenseVector};
use crate::rng::{self, streams};
use crate::sparse_recovery::soft_scalar;

/// Generative model for sparse, linearly predictable sequences:
/// `x_t = A y_t + u_t`, `y_t = D h_t`, with `h_t` a sparsified prediction of
/// `h_{t-1}`.
#[derive(Clone, Debug)]
pub struct SequentialModelSpec {
    pub a: DenseMatrix,
    pub d: DenseMatrix,
    pub f: DenseMatrix,
    /// observation noise variance
    pub sigma2: f64,
    /// inverse scale of the sparsity prior; the code threshold is `1/nu1`
    pub nu1: f64,
    /// precision of the prediction error
    pub nu2: f64,
    pub t: usize,
    pub h_init: DenseVector,
}

/// One observed sequence with its ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceSample {
    pub x_seq: Vec<DenseVector>,
    pub y_seq: Vec<DenseVector>,
    /// latent codes, kept for diagnostics
    pub h_seq: Vec<DenseVector>,
    /// code preceding the first step (the oracle `h_0`)
    pub h_init: DenseVector,
}

impl SequentialModelSpec {
    pub fn validate(&self) -> Result<()> {
        let (_, n) = self.a.shape();
        if self.d.shape() != (n, n) || self.f.shape() != (n, n) || self.h_init.len() != n {
            return Err(Error::dims("SequentialModelSpec", format!("D, F {n}x{n} and h_init {n}"), format!(
                "D {:?}, F {:?}, h_init {}",
                self.d.shape(),
                self.f.shape(),
                self.h_init.len()
            )));
        }
        if !(self.sigma2 >= 0.0) || !(self.nu1 > 0.0) || !(self.nu2 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "need sigma2 >= 0, nu1 > 0, nu2 > 0 (got {}, {}, {})",
                self.sigma2, self.nu1, self.nu2
            )));
        }
        Ok(())
    }
}

/// Draws a sequence from the model.
///
/// Exact sampling from the coupled Laplace/Gaussian conditional is not
/// tractable, so codes come from a surrogate: predict
/// `h~_t = D^T F D h_{t-1} + N(0, 1/nu2)`, then soft-threshold at `1/nu1`.
/// The result has the model's qualitative structure (sparse codes, linearly
/// predictable signals) and nothing downstream depends on exactness.
pub fn sample_sequence(spec: &SequentialModelSpec, seed: u64) -> Result<SequenceSample> {
    spec.validate()?;
    let n = spec.a.cols();
    let predict = spec.d.tmul(&spec.f.mul(&spec.d));
    let innovation = Normal::new(0.0, (1.0 / spec.nu2).sqrt())
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let threshold = 1.0 / spec.nu1;
    let mut r = rng::stream(seed, streams::SEQUENCE);

    let mut h_prev = spec.h_init.clone();
    let mut h_seq = Vec::with_capacity(spec.t);
    let mut y_seq = Vec::with_capacity(spec.t);
    for _ in 0..spec.t {
        let mut h = predict.mv(&h_prev);
        for i in 0..n {
            h[i] = soft_scalar(h[i] + innovation.sample(&mut r), threshold);
        }
        y_seq.push(spec.d.mv(&h));
        h_seq.push(h.clone());
        h_prev = h;
    }
    let x_seq = measure(&y_seq, &spec.a, spec.sigma2, seed)?;
    Ok(SequenceSample {
        x_seq,
        y_seq,
        h_seq,
        h_init: spec.h_init.clone(),
    })
}

/// `x_t = A y_t + N(0, sigma2 I)`, deterministic per seed.
pub fn measure(y_seq: &[DenseVector], a: &DenseMatrix, sigma2: f64, seed: u64) -> Result<Vec<DenseVector>> {
    if !(sigma2 >= 0.0) {
        return Err(Error::InvalidArgument(format!("sigma2 must be >= 0, got {sigma2}")));
    }
    if let Some(y) = y_seq.iter().find(|y| y.len() != a.cols()) {
        return Err(Error::dims("measure", a.cols(), y.len()));
    }
    let noise = Normal::new(0.0, sigma2.sqrt()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut r = rng::stream(seed, streams::NOISE);
    Ok(y_seq
        .iter()
        .map(|y| {
            let mut x = a.mv(y);
            if sigma2 > 0.0 {
                for v in x.as_mut_slice() {
                    *v += noise.sample(&mut r);
                }
            }
            x
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::{build_dictionary, sample_measurement_matrix, DictionaryKind, DictionarySpec};

    fn spec(sigma2: f64, nu1: f64) -> SequentialModelSpec {
        let n = 16;
        SequentialModelSpec {
            a: sample_measurement_matrix(8, n, 1),
            d: build_dictionary(&DictionarySpec::new(DictionaryKind::Haar, n, 2)).unwrap(),
            f: DenseMatrix::identity(n),
            sigma2,
            nu1,
            nu2: 4.0,
            t: 12,
            h_init: DenseVector::from_fn(n, |i| if i % 3 == 0 { 1.0 } else { 0.0 }),
        }
    }

    #[test]
    fn noiseless_observations_are_exact() {
        let s = sample_sequence(&spec(0.0, 2.0), 3).unwrap();
        let sp = spec(0.0, 2.0);
        for (x, y) in s.x_seq.iter().zip(&s.y_seq) {
            assert_eq!(*x, sp.a.mv(y));
        }
    }

    #[test]
    fn signals_are_dictionary_synthesis_of_codes() {
        let sp = spec(0.1, 2.0);
        let s = sample_sequence(&sp, 4).unwrap();
        for (h, y) in s.h_seq.iter().zip(&s.y_seq) {
            assert!(sp.d.mv(h).max_abs_diff(y) < 1e-12);
        }
    }

    #[test]
    fn vanishing_threshold_gives_dense_codes() {
        let s = sample_sequence(&spec(0.0, 1e12), 5).unwrap();
        let zeros = s.h_seq.iter().flat_map(|h| h.iter()).filter(|v| **v == 0.0).count();
        assert_eq!(zeros, 0);
    }

    #[test]
    fn sparsity_grows_with_threshold() {
        let zero_fraction = |threshold: f64| {
            (0..10)
                .map(|seed| {
                    let s = sample_sequence(&spec(0.0, 1.0 / threshold), seed).unwrap();
                    s.h_seq.iter().flat_map(|h| h.iter()).filter(|v| **v == 0.0).count()
                })
                .sum::<usize>()
        };
        let counts: Vec<usize> = [0.1, 0.5, 1.0].into_iter().map(zero_fraction).collect();
        assert!(counts[0] < counts[1] && counts[1] < counts[2], "{counts:?}");
    }

    #[test]
    fn deterministic_per_seed() {
        let sp = spec(0.3, 2.0);
        assert_eq!(sample_sequence(&sp, 9).unwrap(), sample_sequence(&sp, 9).unwrap());
        assert_ne!(sample_sequence(&sp, 9).unwrap(), sample_sequence(&sp, 10).unwrap());
    }

    #[test]
    fn pure_noise_has_requested_variance() {
        let a = sample_measurement_matrix(20, 8, 2);
        let ys = vec![DenseVector::zeros(8); 100];
        let xs = measure(&ys, &a, 0.25, 7).unwrap();
        let values: Vec<f64> = xs.iter().flat_map(|x| x.iter().copied()).collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
        assert!((var - 0.25).abs() < 0.05, "{var}");
        assert_eq!(xs, measure(&ys, &a, 0.25, 7).unwrap());
    }

    #[test]
    fn rejects_invalid_spec() {
        let mut sp = spec(0.0, 2.0);
        sp.nu2 = 0.0;
        assert!(sample_sequence(&sp, 1).is_err());
        let mut sp = spec(0.0, 2.0);
        sp.h_init = DenseVector::zeros(3);
        assert!(sample_sequence(&sp, 1).is_err());
        assert!(measure(&[DenseVector::zeros(3)], &sample_measurement_matrix(2, 4, 1), 0.0, 1).is_err());
    }
}
