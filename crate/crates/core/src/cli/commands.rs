use std::fmt::Write as _;
use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;

use super::config::RunConfig;
use crate::datagen::{generate_dataset, mse, psnr_from_mse, read_dataset, sse, write_dataset, Dataset, DatasetSpec, SequenceSample, Split};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::linops::{spectral_norm_sq, DenseVector, DictionaryKind, DictionarySpec};
use crate::rng::{self, streams};
use crate::sparse_recovery::{ista, ista_converged, sista, sista_converged, LassoProblem, SistaParams};
use crate::training::{evaluate, init_params, train_network, Optimizer, TrainConfig};
use crate::unfolded_net::checkpoint;
use crate::unfolded_net::equivalence_check;
use crate::unfolded_net::gradcheck::{run_gradcheck, GradCheckConfig};
use crate::unfolded_net::instances::{sista_instance, InstanceShape};
use crate::unfolded_net::{Network, Parameterization};

pub const DEFAULT_LAMBDA1: f64 = 0.02;
pub const DEFAULT_LAMBDA2: f64 = 0.002;

/// How a command finished when it did not fail outright.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// gradcheck or equiv found a mismatch
    ValidationFailed,
    /// training hit a non-finite loss; partial outputs were written
    Diverged,
}

fn parse_split(cfg: &RunConfig, default: Split) -> Result<Split> {
    match cfg.get::<String>("split")?.as_deref() {
        None => Ok(default),
        Some("train") => Ok(Split::Train),
        Some("val") => Ok(Split::Val),
        Some("test") => Ok(Split::Test),
        Some(other) => Err(Error::Config {
            line: 0,
            reason: format!("split must be train, val or test, got '{other}'"),
        }),
    }
}

/// Dataset spec from config keys, defaulting to the desk-scale preset.
pub fn dataset_spec(cfg: &RunConfig) -> Result<DatasetSpec> {
    let n = cfg.get_or("n", 32usize)?;
    let kind: DictionaryKind = cfg.get_or("dictionary", DictionaryKind::Daubechies8)?;
    Ok(DatasetSpec {
        m: cfg.get_or("m", 8)?,
        n,
        t: cfg.get_or("t", 16)?,
        train: cfg.get_or("train", 512)?,
        val: cfg.get_or("val", 64)?,
        test: cfg.get_or("test", 64)?,
        seed: cfg.get_or("seed", 2017)?,
        dictionary: DictionarySpec::new(kind, n, cfg.get_or("levels", 2)?),
        sigma2: cfg.get_or("sigma2", 0.0)?,
        nu1: cfg.get_or("nu1", 50.0)?,
        nu2: cfg.get_or("nu2", 1e4)?,
        init_density: cfg.get_or("init_density", 0.06)?,
        init_scale: cfg.get_or("init_scale", 1.0)?,
        offset: cfg.get_or("offset", 0.25)?,
    })
}

/// SISTA parameters for a dataset. `alpha` defaults to
/// `max(1, ||A D||^2 + lambda2)`, the smallest step bound that guarantees descent.
pub fn base_params(data: &Dataset, lambda1: f64, lambda2: f64, alpha: Option<f64>) -> Result<SistaParams> {
    let op = data.a.matmul(&data.d)?;
    let norm = spectral_norm_sq(&op)?;
    if norm >= 1.0 {
        eprintln!("warning: ||A D||^2 = {norm:.4} >= 1; alpha = 1 would not guarantee convergence");
    }
    let p = SistaParams {
        a: data.a.clone(),
        d: data.d.clone(),
        f: data.f.clone(),
        h0: DenseVector::zeros(data.a.cols()),
        alpha: alpha.unwrap_or((norm + lambda2).max(1.0)),
        lambda1,
        lambda2,
    };
    p.validate()?;
    Ok(p)
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn cmd_datagen(cfg: &RunConfig) -> Result<Outcome> {
    let out = cfg.require_path("out_dir")?;
    let spec = dataset_spec(cfg)?;
    cfg.finish()?;
    spec.validate()?;
    ensure_dir(&out)?;
    let data = generate_dataset(&spec)?;
    write_dataset(&out, &spec, &data)?;
    let op = data.a.matmul(&data.d)?;
    let norm = spectral_norm_sq(&op)?;
    if norm >= 1.0 {
        eprintln!("warning: ||A D||^2 = {norm:.4} >= 1");
    }
    println!(
        "wrote {} train / {} val / {} test sequences to {} (||A D||^2 = {norm:.4})",
        spec.train,
        spec.val,
        spec.test,
        out.display()
    );
    Ok(Outcome::Success)
}

/// One CSV row per sequence plus a `mean` row.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub mse: f64,
    pub sse: f64,
    pub iterations: usize,
}

pub fn metrics_csv(rows: &[MetricRow], peak: f64) -> String {
    let mut out = String::from("sequence,mse,psnr,sse,iterations\n");
    for (i, r) in rows.iter().enumerate() {
        let _ = writeln!(out, "{i},{:?},{:?},{:?},{}", r.mse, psnr_from_mse(r.mse, peak), r.sse, r.iterations);
    }
    if !rows.is_empty() {
        let count = rows.len() as f64;
        let mean_mse = rows.iter().map(|r| r.mse).sum::<f64>() / count;
        let mean_sse = rows.iter().map(|r| r.sse).sum::<f64>() / count;
        let mean_iter = rows.iter().map(|r| r.iterations).sum::<usize>() as f64 / count;
        let _ = writeln!(out, "mean,{mean_mse:?},{:?},{mean_sse:?},{mean_iter:?}", psnr_from_mse(mean_mse, peak));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Ista,
    IstaConverged,
    Sista,
    SistaConverged,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ista" => Ok(Method::Ista),
            "ista_converged" => Ok(Method::IstaConverged),
            "sista" => Ok(Method::Sista),
            "sista_converged" => Ok(Method::SistaConverged),
            other => Err(Error::InvalidArgument(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RecoverSettings {
    pub method: Method,
    pub k: usize,
    pub rel_tol: f64,
    pub max_iter: usize,
    /// start each sequence from its true preceding code instead of `p.h0`
    pub oracle_h0: bool,
}

fn recover_one(s: &SequenceSample, p: &SistaParams, st: &RecoverSettings) -> Result<MetricRow> {
    let (y_hat, iterations) = match st.method {
        Method::Ista | Method::IstaConverged => {
            let mut y_hat = Vec::with_capacity(s.x_seq.len());
            let mut iterations = 0;
            for x in &s.x_seq {
                let lp = LassoProblem::new(p.a.clone(), p.d.clone(), x.clone(), p.lambda1)?;
                let h0 = DenseVector::zeros(p.code_len());
                let h = if st.method == Method::Ista {
                    iterations += st.k;
                    ista(&lp, &h0, p.alpha, st.k, false)?.h
                } else {
                    let out = ista_converged(&lp, &h0, p.alpha, st.rel_tol, st.max_iter)?;
                    iterations += out.iterations;
                    out.h
                };
                y_hat.push(p.d.matvec(&h)?);
            }
            (y_hat, iterations)
        }
        Method::Sista | Method::SistaConverged => {
            let mut local = p.clone();
            if st.oracle_h0 {
                local.h0 = s.h_init.clone();
            }
            let r = if st.method == Method::Sista {
                sista(&s.x_seq, &local, st.k)?
            } else {
                sista_converged(&s.x_seq, &local, st.rel_tol, st.max_iter)?
            };
            (r.y_seq, r.iterations.iter().sum())
        }
    };
    Ok(MetricRow {
        mse: mse(&y_hat, &s.y_seq)?,
        sse: sse(&y_hat, &s.y_seq)?,
        iterations,
    })
}

/// Per-sequence metrics of a classical recovery method.
pub fn recover_split(samples: &[SequenceSample], p: &SistaParams, st: &RecoverSettings) -> Result<Vec<MetricRow>> {
    samples.par_iter().map(|s| recover_one(s, p, st)).collect()
}

pub fn mean_mse(rows: &[MetricRow]) -> f64 {
    if rows.is_empty() {
        0.0
    } else {
        rows.iter().map(|r| r.mse).sum::<f64>() / rows.len() as f64
    }
}

/// Random search over `lambda1, lambda2 = 10^U(-3, 1)` on the validation
/// split; returns the best parameters found (or `p` itself if it wins).
fn search_lambdas(data: &Dataset, p: &SistaParams, st: &RecoverSettings, trials: usize, seed: u64) -> Result<SistaParams> {
    let mut r = rng::stream(seed, streams::INSTANCE);
    let mut best = p.clone();
    let mut best_mse = mean_mse(&recover_split(&data.val, p, st)?);
    for trial in 0..trials {
        let lambda1 = 10f64.powf(r.random_range(-3.0..1.0));
        let lambda2 = 10f64.powf(r.random_range(-3.0..1.0));
        let candidate = base_params(data, lambda1, lambda2, None)?;
        let score = mean_mse(&recover_split(&data.val, &candidate, st)?);
        println!("search {trial}: lambda1 = {lambda1:.5} lambda2 = {lambda2:.5} val mse = {score:.6}");
        if score < best_mse {
            best_mse = score;
            best = candidate;
        }
    }
    println!(
        "search best: lambda1 = {:.5} lambda2 = {:.5} alpha = {:.5} val mse = {best_mse:.6}",
        best.lambda1, best.lambda2, best.alpha
    );
    Ok(best)
}

pub fn cmd_recover(cfg: &RunConfig) -> Result<Outcome> {
    let data_dir = cfg.require_path("data_dir")?;
    let out = cfg.require_path("out")?;
    let split = parse_split(cfg, Split::Test)?;
    let st = RecoverSettings {
        method: cfg.get_or("method", Method::Sista)?,
        k: cfg.get_or("k", 3)?,
        rel_tol: cfg.get_or("rel_tol", 1e-8)?,
        max_iter: cfg.get_or("max_iter", 10_000)?,
        oracle_h0: cfg.flag("oracle_h0", false)?,
    };
    let peak = cfg.get_or("peak", 1.0)?;
    let trials = cfg.get_or("search_trials", 0usize)?;
    let search_seed = cfg.get_or("search_seed", 0u64)?;
    let lambda1 = cfg.get_or("lambda1", DEFAULT_LAMBDA1)?;
    let lambda2 = cfg.get_or("lambda2", DEFAULT_LAMBDA2)?;
    let alpha = cfg.get("alpha")?;
    cfg.finish()?;
    if !(peak > 0.0) {
        return Err(Error::InvalidArgument(format!("peak must be > 0, got {peak}")));
    }
    let data = read_dataset(&data_dir)?;
    let mut p = base_params(&data, lambda1, lambda2, alpha)?;
    if trials > 0 {
        p = search_lambdas(&data, &p, &st, trials, search_seed)?;
    }
    let rows = recover_split(data.split(split), &p, &st)?;
    fsutil::atomic_write(&out, metrics_csv(&rows, peak).as_bytes())?;
    let m = mean_mse(&rows);
    println!(
        "{} sequences, mean mse {m:.6}, psnr {:.3} dB -> {}",
        rows.len(),
        psnr_from_mse(m, peak),
        out.display()
    );
    Ok(Outcome::Success)
}

pub fn train_config(cfg: &RunConfig) -> Result<TrainConfig> {
    let d = TrainConfig::default();
    Ok(TrainConfig {
        mode: cfg.get_or("mode", d.mode)?,
        init: cfg.get_or("init", d.init)?,
        k_layers: cfg.get_or("k", d.k_layers)?,
        lr: cfg.get_or("lr", d.lr)?,
        batch_size: cfg.get_or("batch_size", d.batch_size)?,
        epochs: cfg.get_or("epochs", d.epochs)?,
        seed: cfg.get_or("seed", d.seed)?,
        optimizer: cfg.get_or::<Optimizer>("optimizer", d.optimizer)?,
        rmsprop_momentum: cfg.get_or("rmsprop_momentum", d.rmsprop_momentum)?,
        rmsprop_avg: cfg.get_or("rmsprop_avg", d.rmsprop_avg)?,
        clamp_lambda2_nonneg: cfg.flag("clamp_lambda2_nonneg", d.clamp_lambda2_nonneg)?,
        freeze: cfg.list("freeze"),
        max_grad_norm: cfg.get("max_grad_norm")?,
    })
}

fn block<'a>(net: &'a Network, name: &str) -> Vec<&'a [f64]> {
    net.blocks().into_iter().filter(|(n, _)| *n == name).map(|(_, b)| b).collect()
}

fn max_abs_change(before: &Network, after: &Network, name: &str) -> f64 {
    block(before, name)
        .iter()
        .zip(block(after, name))
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

/// Learned SISTA scalars before and after training, and how far `D` and `F`
/// moved. Empty for generic networks.
pub fn interpretable_report(before: &Network, after: &Network) -> String {
    let mut out = String::new();
    if before.kind() == Parameterization::Generic {
        return out;
    }
    for (layer, (b, a)) in before.sista_scalars().iter().zip(after.sista_scalars()).enumerate() {
        let _ = writeln!(
            out,
            "layer {layer}: alpha {:.4} -> {:.4}, lambda1 {:.4} -> {:.4}, lambda2 {:.4} -> {:.4}",
            b.0, a.0, b.1, a.1, b.2, a.2
        );
        if a.2 < 0.0 {
            let _ = writeln!(out, "layer {layer}: learned lambda2 is negative; the probabilistic reading no longer applies");
        }
    }
    let _ = writeln!(
        out,
        "max |change| D {:.4e}, F {:.4e}",
        max_abs_change(before, after, "D"),
        max_abs_change(before, after, "F")
    );
    out
}

pub fn cmd_train(cfg: &RunConfig) -> Result<Outcome> {
    let data_dir = cfg.require_path("data_dir")?;
    let out_dir = cfg.require_path("out_dir")?;
    let tc = train_config(cfg)?;
    let lambda1 = cfg.get_or("lambda1", DEFAULT_LAMBDA1)?;
    let lambda2 = cfg.get_or("lambda2", DEFAULT_LAMBDA2)?;
    let alpha = cfg.get("alpha")?;
    let peak = cfg.get_or("peak", 1.0)?;
    cfg.finish()?;
    tc.validate()?;
    let data = read_dataset(&data_dir)?;
    ensure_dir(&out_dir)?;
    let base = base_params(&data, lambda1, lambda2, alpha)?;
    let net = init_params(&tc, base.code_len(), base.measurements(), Some(&base))?;
    let initial = net.clone();
    println!("training {} (init {}, K = {}, {} parameters)", tc.mode, tc.init, tc.k_layers, net.num_params());
    let outcome = train_network(net, &data.train, &data.val, &tc, |r| {
        println!(
            "epoch {:>4}  train {:.6e}  val mse {:.6e}  val psnr {:.3} dB  ({:.2}s)",
            r.epoch,
            r.train_loss,
            r.val_mse,
            psnr_from_mse(r.val_mse, peak),
            r.seconds
        );
    })?;
    let report = &outcome.report;
    fsutil::atomic_write(&out_dir.join("loss.csv"), report.to_csv().as_bytes())?;
    checkpoint::save(&out_dir.join("final.ckpt"), &outcome.network)?;
    checkpoint::save(&out_dir.join("best.ckpt"), &outcome.best)?;
    print!("{}", interpretable_report(&initial, &outcome.network));
    if let Some(reason) = &report.diverged {
        eprintln!("training diverged: {reason}");
        return Ok(Outcome::Diverged);
    }
    let test = evaluate(&outcome.best, &data.test)?;
    println!(
        "best epoch {}; test mse {:.6e}, psnr {:.3} dB, per-sequence squared error {:.6e}",
        report.best_epoch,
        test.mse,
        psnr_from_mse(test.mse, peak),
        test.sse_per_sequence
    );
    Ok(Outcome::Success)
}

pub fn cmd_eval(cfg: &RunConfig) -> Result<Outcome> {
    let data_dir = cfg.require_path("data_dir")?;
    let ckpt = cfg.require_path("checkpoint")?;
    let out = cfg.require_path("out")?;
    let split = parse_split(cfg, Split::Test)?;
    let peak = cfg.get_or("peak", 1.0)?;
    cfg.finish()?;
    let data = read_dataset(&data_dir)?;
    let net = checkpoint::load(&ckpt)?;
    let samples = data.split(split);
    let rows = samples
        .par_iter()
        .map(|s| {
            let (y_hat, _) = net.forward(&s.x_seq)?;
            Ok(MetricRow {
                mse: mse(&y_hat, &s.y_seq)?,
                sse: sse(&y_hat, &s.y_seq)?,
                iterations: net.layers() * s.x_seq.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    fsutil::atomic_write(&out, metrics_csv(&rows, peak).as_bytes())?;
    let m = mean_mse(&rows);
    println!("{} sequences, mean mse {m:.6}, psnr {:.3} dB", rows.len(), psnr_from_mse(m, peak));
    Ok(Outcome::Success)
}

pub fn cmd_gradcheck(cfg: &RunConfig) -> Result<Outcome> {
    let d = GradCheckConfig::default();
    let kinds = cfg.list("kinds");
    let gc = GradCheckConfig {
        shape: InstanceShape {
            n: cfg.get_or("n", d.shape.n)?,
            m: cfg.get_or("m", d.shape.m)?,
            t: cfg.get_or("t", d.shape.t)?,
            k: cfg.get_or("k", d.shape.k)?,
        },
        kinds: if kinds.is_empty() {
            d.kinds
        } else {
            kinds.iter().map(|k| k.parse()).collect::<Result<_>>()?
        },
        instances: cfg.get_or("instances", d.instances)?,
        seed: cfg.get_or("seed", d.seed)?,
        step: cfg.get_or("step", d.step)?,
        tol: cfg.get_or("tol", d.tol)?,
        kink_margin: cfg.get_or("kink_margin", d.kink_margin)?,
        max_resamples: cfg.get_or("max_resamples", d.max_resamples)?,
        inject_sign_flip: cfg.flag("inject_sign_flip", false)?,
    };
    cfg.finish()?;
    let report = run_gradcheck(&gc)?;
    for kind in &gc.kinds {
        let cases: Vec<_> = report.cases.iter().filter(|c| c.kind == *kind).collect();
        let worst = cases.iter().fold(0.0f64, |m, c| m.max(c.rel_error));
        let failed = cases.iter().filter(|c| !c.passed).count();
        println!("{kind}: {} instances, worst relative error {worst:.3e}, {failed} failed", cases.len());
    }
    let passed = report.passed();
    println!("gradcheck {} (tol {:e})", if passed { "PASS" } else { "FAIL" }, gc.tol);
    Ok(if passed { Outcome::Success } else { Outcome::ValidationFailed })
}

pub fn cmd_equiv(cfg: &RunConfig) -> Result<Outcome> {
    let shape = InstanceShape {
        n: cfg.get_or("n", 16)?,
        m: cfg.get_or("m", 8)?,
        t: cfg.get_or("t", 5)?,
        k: cfg.get_or("k", 3)?,
    };
    let instances = cfg.get_or("instances", 100usize)?;
    let seed = cfg.get_or("seed", 2017u64)?;
    let tol = cfg.get_or("tol", 1e-9)?;
    cfg.finish()?;
    let reports = (0..instances as u64)
        .into_par_iter()
        .map(|i| {
            let (p, x) = sista_instance(shape, seed, i);
            equivalence_check(&p, shape.k, &x, tol)
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = reports.iter().fold(0.0f64, |m, r| m.max(r.max_diff()));
    let failed = reports.iter().filter(|r| !r.passed).count();
    println!("{instances} instances, max deviation {worst:.3e}, {failed} above tol {tol:e}");
    let passed = failed == 0;
    println!("equiv {}", if passed { "PASS" } else { "FAIL" });
    Ok(if passed { Outcome::Success } else { Outcome::ValidationFailed })
}
