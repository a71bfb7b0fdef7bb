//! Supervised training of unfolded networks: MSE loss, SGD and RMSProp,
//! seeded minibatching and per-epoch validation.

mod init;
mod loss;
mod optim;
mod trainer;

pub use init::{glorot_bound, init_params, InitScheme};
pub use loss::mse_loss;
pub use optim::{rmsprop_step, sgd_step, Optimizer, RmsPropState, RMSPROP_EPS};
pub use trainer::{evaluate, train, train_network, EpochRecord, Evaluation, TrainOutcome, TrainReport};

use crate::error::{Error, Result};
use crate::unfolded_net::Parameterization;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub mode: Parameterization,
    pub init: InitScheme,
    pub k_layers: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub rmsprop_momentum: f64,
    pub rmsprop_avg: f64,
    pub clamp_lambda2_nonneg: bool,
    /// Block names (`"A"`, `"D"`, `"W"`, ...) excluded from updates.
    pub freeze: Vec<String>,
    /// Rescale the minibatch gradient to at most this Euclidean norm.
    pub max_grad_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: Parameterization::TiedSista,
            init: InitScheme::Sista,
            k_layers: 3,
            lr: 1e-5,
            batch_size: 50,
            epochs: 200,
            seed: 0,
            optimizer: Optimizer::Rmsprop,
            rmsprop_momentum: 0.9,
            rmsprop_avg: 0.1,
            clamp_lambda2_nonneg: false,
            freeze: Vec::new(),
            max_grad_norm: None,
        }
    }
}

impl TrainConfig {
    /// `lr = 0` is allowed so that a run can serve as a frozen baseline.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return bad(format!("lr must be finite and >= 0, got {}", self.lr));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.k_layers == 0 {
            return bad("batch_size, epochs and k_layers must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.rmsprop_momentum) || !(self.rmsprop_avg > 0.0 && self.rmsprop_avg <= 1.0) {
            return bad(format!(
                "need rmsprop_momentum in [0,1) and rmsprop_avg in (0,1], got {} and {}",
                self.rmsprop_momentum, self.rmsprop_avg
            ));
        }
        if self.max_grad_norm.is_some_and(|v| !(v > 0.0)) {
            return bad("max_grad_norm must be positive".into());
        }
        Ok(())
    }
}
