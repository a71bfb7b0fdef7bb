//! Orthogonal wavelet dictionaries as explicit synthesis matrices.
//!
//! Column layout of the returned `N x N` matrix (pyramid order, coarse to
//! fine): the `N/2^L` scaling coefficients of the coarsest level, then the
//! detail bands from level `L` (coarsest, `N/2^L` columns) down to level 1
//! (finest, `N/2` columns). Column `j` is the signal synthesised from the
//! `j`-th standard basis coefficient vector. Boundaries are periodic, so the
//! matrix is exactly orthogonal at every depth.

use std::fmt;
use std::str::FromStr;

use super::DenseMatrix;
use crate::error::{Error, Result};

/// Daubechies scaling filter with 4 vanishing moments (8 taps), sometimes
/// written "db4" and sometimes "D8". Values solve the orthonormality and
/// vanishing-moment equations to 20 significant digits.
const DAUBECHIES8: [f64; 8] = [
    0.230_377_813_308_896_500_86,
    0.714_846_570_552_915_647_09,
    0.630_880_767_929_858_907_88,
    -0.027_983_769_416_859_854_211,
    -0.187_034_811_719_093_084_08,
    0.030_841_381_835_560_763_627,
    0.032_883_011_666_885_199_735,
    -0.010_597_401_785_069_032_105,
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DictionaryKind {
    Identity,
    Haar,
    Daubechies8,
}

impl DictionaryKind {
    fn scaling_filter(self) -> Option<Vec<f64>> {
        match self {
            DictionaryKind::Identity => None,
            DictionaryKind::Haar => Some(vec![std::f64::consts::FRAC_1_SQRT_2; 2]),
            DictionaryKind::Daubechies8 => Some(DAUBECHIES8.to_vec()),
        }
    }
}

impl fmt::Display for DictionaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DictionaryKind::Identity => "identity",
            DictionaryKind::Haar => "haar",
            DictionaryKind::Daubechies8 => "daubechies8",
        })
    }
}

impl FromStr for DictionaryKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(DictionaryKind::Identity),
            "haar" => Ok(DictionaryKind::Haar),
            "daubechies8" | "db8" => Ok(DictionaryKind::Daubechies8),
            other => Err(Error::InvalidArgument(format!("unknown dictionary kind '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DictionarySpec {
    pub kind: DictionaryKind,
    pub size: usize,
    pub levels: usize,
}

impl DictionarySpec {
    pub fn new(kind: DictionaryKind, size: usize, levels: usize) -> Self {
        DictionarySpec { kind, size, levels }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::InvalidArgument("dictionary size must be positive".into()));
        }
        if self.kind == DictionaryKind::Identity {
            return Ok(());
        }
        if self.levels == 0 {
            return Err(Error::InvalidArgument("wavelet levels must be at least 1".into()));
        }
        let block = 1usize
            .checked_shl(self.levels as u32)
            .filter(|b| *b <= self.size)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "{} levels is too deep for size {}",
                    self.levels, self.size
                ))
            })?;
        if !self.size.is_multiple_of(block) {
            return Err(Error::InvalidArgument(format!(
                "size {} is not divisible by 2^{}",
                self.size, self.levels
            )));
        }
        Ok(())
    }
}

/// Builds the `N x N` synthesis matrix `D` (signal = `D` * coefficients).
pub fn build_dictionary(spec: &DictionarySpec) -> Result<DenseMatrix> {
    spec.validate()?;
    let n = spec.size;
    let Some(lo) = spec.kind.scaling_filter() else {
        return Ok(DenseMatrix::identity(n));
    };
    let taps = lo.len();
    let hi: Vec<f64> = (0..taps)
        .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } * lo[taps - 1 - i])
        .collect();

    let mut d = DenseMatrix::zeros(n, n);
    let mut coeffs = vec![0.0; n];
    for j in 0..n {
        coeffs.iter_mut().for_each(|c| *c = 0.0);
        coeffs[j] = 1.0;
        let signal = synthesize(&coeffs, spec.levels, &lo, &hi);
        for (i, v) in signal.into_iter().enumerate() {
            d[(i, j)] = v;
        }
    }
    Ok(d)
}

/// Multi-level periodic inverse transform of a pyramid-ordered coefficient vector.
fn synthesize(coeffs: &[f64], levels: usize, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let n = coeffs.len();
    let coarse = n >> levels;
    let mut approx = coeffs[..coarse].to_vec();
    let mut offset = coarse;
    for _ in 0..levels {
        let half = approx.len();
        let detail = &coeffs[offset..offset + half];
        offset += half;
        let len = 2 * half;
        let mut out = vec![0.0; len];
        for k in 0..half {
            let (a, d) = (approx[k], detail[k]);
            if a == 0.0 && d == 0.0 {
                continue;
            }
            for (i, (l, h)) in lo.iter().zip(hi).enumerate() {
                out[(2 * k + i) % len] += a * l + d * h;
            }
        }
        approx = out;
    }
    approx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orthogonality_error(d: &DenseMatrix) -> f64 {
        let n = d.rows();
        let eye = DenseMatrix::identity(n);
        let ddt = d.mul(&d.transpose());
        let dtd = d.transpose().mul(d);
        ddt.max_abs_diff(&eye).max(dtd.max_abs_diff(&eye))
    }

    #[test]
    fn identity_kind() {
        let d = build_dictionary(&DictionarySpec::new(DictionaryKind::Identity, 8, 1)).unwrap();
        assert_eq!(d, DenseMatrix::identity(8));
    }

    #[test]
    fn two_point_haar() {
        let d = build_dictionary(&DictionarySpec::new(DictionaryKind::Haar, 2, 1)).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let expected = DenseMatrix::from_rows(&[&[s, s], &[s, -s]]).unwrap();
        assert!(d.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn filter_satisfies_design_equations() {
        let h = DAUBECHIES8;
        for shift in 0..4 {
            let s: f64 = (0..8 - 2 * shift).map(|k| h[k] * h[k + 2 * shift]).sum();
            let target = if shift == 0 { 1.0 } else { 0.0 };
            assert!((s - target).abs() < 1e-15, "shift {shift}: {s}");
        }
        for moment in 0..4 {
            let s: f64 = (0..8)
                .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 } * (k as f64).powi(moment) * h[k])
                .sum();
            assert!(s.abs() < 1e-13, "moment {moment}: {s}");
        }
    }

    #[test]
    fn daubechies_is_orthogonal() {
        let d = build_dictionary(&DictionarySpec::new(DictionaryKind::Daubechies8, 32, 2)).unwrap();
        assert!(orthogonality_error(&d) < 1e-12);
    }

    #[test]
    fn all_kinds_sizes_levels_orthogonal() {
        for kind in [DictionaryKind::Haar, DictionaryKind::Daubechies8] {
            for n in [2usize, 4, 8, 16, 32, 128] {
                for levels in 1..=n.trailing_zeros() as usize {
                    let d = build_dictionary(&DictionarySpec::new(kind, n, levels)).unwrap();
                    let err = orthogonality_error(&d);
                    assert!(err < 1e-12, "{kind} n={n} L={levels}: {err}");
                }
            }
        }
    }

    #[test]
    fn haar_coarsest_column_is_constant() {
        let d = build_dictionary(&DictionarySpec::new(DictionaryKind::Haar, 8, 3)).unwrap();
        let c = d.column(0);
        let expected = 1.0 / 8f64.sqrt();
        assert!(c.iter().all(|v| (v - expected).abs() < 1e-15));
    }

    #[test]
    fn invalid_specs_rejected() {
        let bad = [
            DictionarySpec::new(DictionaryKind::Haar, 12, 3),
            DictionarySpec::new(DictionaryKind::Haar, 8, 0),
            DictionarySpec::new(DictionaryKind::Daubechies8, 8, 4),
            DictionarySpec::new(DictionaryKind::Identity, 0, 1),
        ];
        for spec in bad {
            assert!(build_dictionary(&spec).is_err(), "{spec:?}");
        }
    }

    #[test]
    fn kind_round_trips_through_text() {
        for kind in [DictionaryKind::Identity, DictionaryKind::Haar, DictionaryKind::Daubechies8] {
            assert_eq!(kind.to_string().parse::<DictionaryKind>().unwrap(), kind);
        }
    }
}
