use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::loss::mse_loss;
use super::optim::{rmsprop_step, sgd_step, Optimizer, RmsPropState};
use super::{init_params, TrainConfig};
use crate::datagen::SequenceSample;
use crate::error::{Error, Result};
use crate::rng::{self, streams};
use crate::sparse_recovery::SistaParams;
use crate::unfolded_net::{Network, StackedRnnParams};

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    /// 0 is the evaluation before any update.
    pub epoch: usize,
    /// Mean per-sequence loss over the epoch's minibatches (full training set
    /// evaluation for epoch 0).
    pub train_loss: f64,
    pub val_mse: f64,
    /// Validation squared error summed over a sequence, averaged over sequences.
    pub val_sse: f64,
    /// Wall time of the epoch. Kept out of the CSV so reruns compare equal.
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct TrainReport {
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
    /// Why training stopped early, if it did.
    pub diverged: Option<String>,
}

impl TrainReport {
    pub fn val_curve(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.val_mse).collect()
    }

    pub fn final_record(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    /// `epoch,train_loss,val_mse,val_sse` with shortest round-trip floats.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_mse,val_sse\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{:?},{:?},{:?}", r.epoch, r.train_loss, r.val_mse, r.val_sse);
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub report: TrainReport,
    /// Parameters after the last completed step.
    pub network: Network,
    /// Parameters at the epoch with the lowest validation MSE.
    pub best: Network,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    /// per-element mean squared error
    pub mse: f64,
    /// squared error summed within a sequence, averaged over sequences
    pub sse_per_sequence: f64,
}

fn check_samples(rnn: &StackedRnnParams, samples: &[SequenceSample]) -> Result<()> {
    for s in samples {
        rnn.check_inputs(&s.x_seq)?;
        if s.y_seq.len() != s.x_seq.len() {
            return Err(Error::dims("training sample", format!("{} targets", s.x_seq.len()), s.y_seq.len()));
        }
        if let Some(y) = s.y_seq.iter().find(|y| y.len() != rnn.output_len()) {
            return Err(Error::dims("training target", rnn.output_len(), y.len()));
        }
    }
    Ok(())
}

/// Validation metrics of `net` on `samples`.
pub fn evaluate(net: &Network, samples: &[SequenceSample]) -> Result<Evaluation> {
    net.validate()?;
    let rnn = net.unfold();
    check_samples(&rnn, samples)?;
    let origin = net.kind().as_str();
    let errors: Vec<(f64, usize)> = samples
        .par_iter()
        .map(|s| {
            let (y_hat, _) = rnn.forward_unchecked(&s.x_seq, origin);
            let sse: f64 = y_hat.iter().zip(&s.y_seq).map(|(a, b)| a.sub(b).norm_sq()).sum();
            (sse, s.y_seq.iter().map(|y| y.len()).sum::<usize>())
        })
        .collect();
    let (sse, count) = errors.iter().fold((0.0, 0usize), |(s, c), (e, n)| (s + e, c + n));
    Ok(Evaluation {
        mse: if count == 0 { 0.0 } else { sse / count as f64 },
        sse_per_sequence: if samples.is_empty() { 0.0 } else { sse / samples.len() as f64 },
    })
}

/// Summed loss and summed flat gradient over a minibatch. Per-sample passes
/// run in parallel; the reduction runs in sample order.
fn batch_gradient(net: &Network, batch: &[&SequenceSample]) -> Result<(f64, Vec<f64>)> {
    let rnn = net.unfold();
    let origin = net.kind().as_str();
    let parts = batch
        .par_iter()
        .map(|s| {
            let (y_hat, tape) = rnn.forward_unchecked(&s.x_seq, origin);
            let (loss, grad_y) = mse_loss(&y_hat, &s.y_seq)?;
            Ok((loss, rnn.backward_from(&tape, &grad_y, origin)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = rnn.zeros_like();
    let mut loss = 0.0;
    for (l, g) in &parts {
        loss += l;
        total.axpy(1.0, g);
    }
    Ok((loss, net.pull_back(&total).to_flat()))
}

fn frozen_mask(net: &Network, freeze: &[String]) -> Result<Option<Vec<bool>>> {
    if freeze.is_empty() {
        return Ok(None);
    }
    let names = net.flat_names();
    if let Some(bad) = freeze.iter().find(|f| !names.contains(&f.as_str())) {
        return Err(Error::InvalidArgument(format!(
            "cannot freeze '{bad}': no such block in a {} network",
            net.kind()
        )));
    }
    Ok(Some(names.iter().map(|n| freeze.iter().any(|f| f == n)).collect()))
}

fn clamp_lambda2(net: &mut Network) {
    for (name, block) in net.blocks_mut() {
        if name == "lambda2" {
            block.iter_mut().for_each(|v| *v = v.max(0.0));
        }
    }
}

/// Trains `net` on `train`, validating on `val` after every epoch.
///
/// Non-finite losses, gradients or parameters, or a network that stops being
/// valid (e.g. `alpha` reaching zero), end the run early; the report then
/// covers the completed epochs and `diverged` says why.
pub fn train_network(
    net: Network,
    train: &[SequenceSample],
    val: &[SequenceSample],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    net.validate()?;
    check_samples(&net.unfold(), train)?;
    check_samples(&net.unfold(), val)?;
    let skip = frozen_mask(&net, &cfg.freeze)?;

    let start = Instant::now();
    let train_eval = evaluate(&net, train)?;
    let val_eval = evaluate(&net, val)?;
    let first = EpochRecord {
        epoch: 0,
        train_loss: train_eval.mse,
        val_mse: val_eval.mse,
        val_sse: val_eval.sse_per_sequence,
        seconds: start.elapsed().as_secs_f64(),
    };
    on_epoch(&first);
    let mut report = TrainReport {
        records: vec![first],
        best_epoch: 0,
        diverged: None,
    };

    let mut net = net;
    let mut best = net.clone();
    let mut best_val = val_eval.mse;
    let mut flat = net.to_flat();
    let mut state = RmsPropState::new(flat.len());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut shuffle = rng::stream(cfg.seed, streams::SHUFFLE);

    'epochs: for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        order.shuffle(&mut shuffle);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&SequenceSample> = chunk.iter().map(|&i| &train[i]).collect();
            let (loss, mut grad) = batch_gradient(&net, &batch)?;
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                report.diverged = Some(format!("non-finite loss or gradient in epoch {epoch}"));
                break 'epochs;
            }
            if let Some(limit) = cfg.max_grad_norm {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > limit {
                    grad.iter_mut().for_each(|g| *g *= limit / norm);
                }
            }
            epoch_loss += loss;

            let mut next = flat.clone();
            match cfg.optimizer {
                Optimizer::Sgd => sgd_step(&mut next, &grad, cfg.lr, skip.as_deref()),
                Optimizer::Rmsprop => rmsprop_step(
                    &mut next,
                    &grad,
                    &mut state,
                    cfg.lr,
                    cfg.rmsprop_momentum,
                    cfg.rmsprop_avg,
                    skip.as_deref(),
                ),
            }
            let mut candidate = net.clone();
            candidate.set_flat(&next);
            if cfg.clamp_lambda2_nonneg {
                clamp_lambda2(&mut candidate);
            }
            if next.iter().any(|v| !v.is_finite()) {
                report.diverged = Some(format!("non-finite parameters in epoch {epoch}"));
                break 'epochs;
            }
            if let Err(e) = candidate.validate() {
                report.diverged = Some(format!("invalid parameters in epoch {epoch}: {e}"));
                break 'epochs;
            }
            flat = candidate.to_flat();
            net = candidate;
        }
        let val_eval = evaluate(&net, val)?;
        if !val_eval.mse.is_finite() {
            report.diverged = Some(format!("non-finite validation error in epoch {epoch}"));
            break;
        }
        let record = EpochRecord {
            epoch,
            train_loss: epoch_loss / train.len() as f64,
            val_mse: val_eval.mse,
            val_sse: val_eval.sse_per_sequence,
            seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(&record);
        if val_eval.mse < best_val {
            best_val = val_eval.mse;
            best = net.clone();
            report.best_epoch = epoch;
        }
        report.records.push(record);
    }
    Ok(TrainOutcome { report, network: net, best })
}

/// Initializes from `cfg` (and `base` for SISTA init) and trains.
pub fn train(
    train_set: &[SequenceSample],
    val: &[SequenceSample],
    cfg: &TrainConfig,
    base: Option<&SistaParams>,
) -> Result<TrainOutcome> {
    let first = train_set
        .first()
        .ok_or_else(|| Error::InvalidArgument("training set is empty".into()))?;
    let m = first.x_seq.first().map_or(0, |x| x.len());
    let n = first.y_seq.first().map_or(0, |y| y.len());
    let net = init_params(cfg, n, m, base)?;
    train_network(net, train_set, val, cfg, |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_dataset, Dataset, DatasetSpec};
    use crate::linops::{DictionaryKind, DictionarySpec};
    use crate::training::InitScheme;
    use crate::unfolded_net::Parameterization;

    fn dataset() -> Dataset {
        generate_dataset(&DatasetSpec {
            m: 6,
            n: 16,
            t: 6,
            train: 24,
            val: 8,
            test: 0,
            seed: 21,
            dictionary: DictionarySpec::new(DictionaryKind::Haar, 16, 2),
            sigma2: 0.0,
            nu1: 20.0,
            nu2: 400.0,
            init_density: 0.25,
            init_scale: 1.0,
            offset: 0.3,
        })
        .unwrap()
    }

    fn base(data: &Dataset) -> SistaParams {
        SistaParams {
            a: data.a.clone(),
            d: data.d.clone(),
            f: data.f.clone(),
            h0: crate::linops::DenseVector::zeros(16),
            alpha: 1.0,
            lambda1: 0.02,
            lambda2: 0.002,
        }
    }

    fn cfg(mode: Parameterization) -> TrainConfig {
        TrainConfig {
            mode,
            init: InitScheme::Sista,
            k_layers: 2,
            lr: 1e-3,
            batch_size: 8,
            epochs: 3,
            seed: 5,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_learning_rate_gives_flat_curve() {
        let data = dataset();
        let c = TrainConfig { lr: 0.0, ..cfg(Parameterization::TiedSista) };
        let out = train(&data.train, &data.val, &c, Some(&base(&data))).unwrap();
        let curve = out.report.val_curve();
        assert_eq!(curve.len(), 4);
        assert!(curve.iter().all(|v| *v == curve[0]));
    }

    #[test]
    fn reruns_are_bit_identical() {
        let data = dataset();
        for mode in [Parameterization::TiedSista, Parameterization::Generic] {
            let c = cfg(mode);
            let a = train(&data.train, &data.val, &c, Some(&base(&data))).unwrap();
            let b = train(&data.train, &data.val, &c, Some(&base(&data))).unwrap();
            assert_eq!(a.report.to_csv(), b.report.to_csv());
            assert_eq!(a.network, b.network);
        }
    }

    #[test]
    fn tied_training_improves_validation() {
        let data = dataset();
        let c = TrainConfig { epochs: 10, lr: 3e-5, ..cfg(Parameterization::TiedSista) };
        let out = train(&data.train, &data.val, &c, Some(&base(&data))).unwrap();
        let curve = out.report.val_curve();
        assert!(curve.last().unwrap() < &curve[0], "{curve:?}");
        assert!(out.report.diverged.is_none());
    }

    #[test]
    fn small_full_batch_sgd_step_does_not_increase_loss() {
        let data = dataset();
        for mode in [Parameterization::TiedSista, Parameterization::UntiedSista, Parameterization::Generic] {
            let c = TrainConfig {
                optimizer: Optimizer::Sgd,
                lr: 1e-6,
                batch_size: data.train.len(),
                epochs: 1,
                ..cfg(mode)
            };
            let net = init_params(&c, 16, 6, Some(&base(&data))).unwrap();
            let before = evaluate(&net, &data.train).unwrap().mse;
            let out = train_network(net, &data.train, &data.val, &c, |_| {}).unwrap();
            let after = evaluate(&out.network, &data.train).unwrap().mse;
            assert!(after <= before, "{mode}: {after} > {before}");
        }
    }

    #[test]
    fn frozen_blocks_are_bit_identical() {
        let data = dataset();
        let c = TrainConfig { freeze: vec!["A".into(), "D".into(), "lambda1".into()], ..cfg(Parameterization::TiedSista) };
        let net = init_params(&c, 16, 6, Some(&base(&data))).unwrap();
        let out = train_network(net.clone(), &data.train, &data.val, &c, |_| {}).unwrap();
        for ((name, before), (_, after)) in net.blocks().into_iter().zip(out.network.blocks()) {
            let same = before.iter().zip(after).all(|(x, y)| x.to_bits() == y.to_bits());
            if c.freeze.iter().any(|f| f == name) {
                assert!(same, "{name} changed");
            } else if name == "F" || name == "alpha" {
                assert!(!same, "{name} did not move");
            }
        }
    }

    #[test]
    fn unknown_frozen_block_rejected() {
        let data = dataset();
        let c = TrainConfig { freeze: vec!["W".into()], ..cfg(Parameterization::TiedSista) };
        assert!(train(&data.train, &data.val, &c, Some(&base(&data))).is_err());
    }

    #[test]
    fn lambda2_clamp_holds_after_every_step() {
        let data = dataset();
        let mut b = base(&data);
        b.lambda2 = 0.0;
        let c = TrainConfig { clamp_lambda2_nonneg: true, lr: 1e-2, epochs: 4, ..cfg(Parameterization::UntiedSista) };
        let out = train(&data.train, &data.val, &c, Some(&b)).unwrap();
        assert!(out.network.sista_scalars().iter().all(|s| s.2 >= 0.0));
    }

    #[test]
    fn divergence_stops_with_partial_report() {
        let data = dataset();
        let c = TrainConfig { optimizer: Optimizer::Sgd, lr: 1e12, epochs: 5, ..cfg(Parameterization::Generic) };
        let out = train(&data.train, &data.val, &c, Some(&base(&data))).unwrap();
        assert!(out.report.diverged.is_some());
        assert!(out.report.records.len() < 6);
        assert!(out.network.to_flat().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn csv_layout() {
        let report = TrainReport {
            records: vec![EpochRecord { epoch: 0, train_loss: 0.5, val_mse: 0.25, val_sse: 4.0, seconds: 1.0 }],
            best_epoch: 0,
            diverged: None,
        };
        assert_eq!(report.to_csv(), "epoch,train_loss,val_mse,val_sse\n0,0.5,0.25,4.0\n");
    }
}
