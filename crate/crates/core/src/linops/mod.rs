//! Dense linear algebra, measurement matrices and wavelet dictionaries.

mod matrix;
mod measurement;
mod spectral;
pub mod ssr1;
mod wavelet;

pub use matrix::{DenseMatrix, DenseVector};
pub use measurement::sample_measurement_matrix;
pub use spectral::{spectral_norm_sq, spectral_norm_sq_with, POWER_MAX_ITER, POWER_REL_TOL};
pub use wavelet::{build_dictionary, DictionaryKind, DictionarySpec};
