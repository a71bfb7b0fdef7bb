use super::mapping::map_sista_to_rnn;
use super::rnn::StackedRnnParams;
use crate::error::Result;
use crate::linops::DenseVector;
use crate::sparse_recovery::{sista, SistaParams};

/// Outcome of comparing SISTA against its unfolded network.
#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceReport {
    pub steps: usize,
    /// max |h_sista - h_rnn| over all steps and entries
    pub max_code_diff: f64,
    /// max |y_sista - y_rnn| over all steps and entries
    pub max_output_diff: f64,
    pub tol: f64,
    pub passed: bool,
}

impl EquivalenceReport {
    pub fn max_diff(&self) -> f64 {
        self.max_code_diff.max(self.max_output_diff)
    }
}

/// Runs `sista(x, p, k)` and the forward pass of `map_sista_to_rnn(p, k)` and
/// compares codes and reconstructions elementwise.
pub fn equivalence_check(p: &SistaParams, k: usize, x_seq: &[DenseVector], tol: f64) -> Result<EquivalenceReport> {
    compare_with_sista(p, k, &map_sista_to_rnn(p, k), x_seq, tol)
}

/// Like [`equivalence_check`] but against an arbitrary SISTA-wired network,
/// e.g. a deliberately perturbed mapping.
pub fn compare_with_sista(
    p: &SistaParams,
    k: usize,
    rnn: &StackedRnnParams,
    x_seq: &[DenseVector],
    tol: f64,
) -> Result<EquivalenceReport> {
    let reference = sista(x_seq, p, k)?;
    let (y_rnn, tape) = rnn.forward(x_seq)?;
    let codes = tape.codes();
    let max_code_diff = reference
        .h_seq
        .iter()
        .zip(&codes)
        .fold(0.0f64, |m, (a, b)| m.max(a.max_abs_diff(b)));
    let max_output_diff = reference
        .y_seq
        .iter()
        .zip(&y_rnn)
        .fold(0.0f64, |m, (a, b)| m.max(a.max_abs_diff(b)));
    Ok(EquivalenceReport {
        steps: x_seq.len(),
        max_code_diff,
        max_output_diff,
        tol,
        passed: max_code_diff < tol && max_output_diff < tol,
    })
}
