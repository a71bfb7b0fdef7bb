use std::fs;
use std::path::{Path, PathBuf};

use sista::cli::{self, exit, Command, RunConfig};
use sista::datagen::{read_dataset, Split};

fn write_cfg(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

const SMALL_DATA: &str = "out_dir = data\nm = 6\nn = 16\nt = 5\ntrain = 20\nval = 6\ntest = 4\nlevels = 2\noffset = 0\n";

fn small_dataset(dir: &Path) -> PathBuf {
    let cfg = write_cfg(dir, "gen.cfg", SMALL_DATA);
    assert_eq!(cli::run(Command::Datagen, &cfg), exit::OK);
    dir.join("data")
}

fn csv_mean_mse(path: &Path) -> f64 {
    let text = fs::read_to_string(path).unwrap();
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("mean,"), "{text}");
    last.split(',').nth(1).unwrap().parse().unwrap()
}

#[test]
fn datagen_writes_samples_and_manifest_reproducibly() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = "out_dir = data\nm = 8\nn = 16\nt = 5\ntrain = 20\nval = 0\ntest = 0\n";
    for dir in [a.path(), b.path()] {
        assert_eq!(cli::run(Command::Datagen, &write_cfg(dir, "gen.cfg", cfg)), exit::OK);
    }
    let files = fs::read_dir(a.path().join("data/train")).unwrap().count();
    assert_eq!(files, 20);
    let manifest = fs::read_to_string(a.path().join("data/manifest.txt")).unwrap();
    assert_eq!(manifest.lines().filter(|l| l.starts_with("sample train")).count(), 20);
    for rel in ["manifest.txt", "A.ssr1", "D.ssr1", "train/00007.seq"] {
        assert_eq!(fs::read(a.path().join("data").join(rel)).unwrap(), fs::read(b.path().join("data").join(rel)).unwrap(), "{rel}");
    }
}

#[test]
fn datagen_with_no_samples_writes_manifest_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "gen.cfg", "out_dir = data\nm = 8\nn = 16\nt = 5\ntrain = 0\nval = 0\ntest = 0\n");
    assert_eq!(cli::run(Command::Datagen, &cfg), exit::OK);
    assert!(dir.path().join("data/manifest.txt").exists());
    assert_eq!(fs::read_dir(dir.path().join("data/train")).unwrap().count(), 0);
}

#[test]
fn datagen_rejects_bad_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "gen.cfg", "out_dir = data\nn = 12\nlevels = 3\n");
    assert_eq!(cli::run(Command::Datagen, &cfg), exit::BAD_CONFIG);
}

#[test]
fn huge_threshold_recovers_zero() {
    let dir = tempfile::tempdir().unwrap();
    let data_dir = small_dataset(dir.path());
    let cfg = write_cfg(dir.path(), "rec.cfg", "data_dir = data\nout = zero.csv\nlambda1 = 1e9\n");
    assert_eq!(cli::run(Command::Recover, &cfg), exit::OK);
    let data = read_dataset(&data_dir).unwrap();
    let expected: f64 = data
        .split(Split::Test)
        .iter()
        .map(|s| s.y_seq.iter().map(|y| y.norm_sq()).sum::<f64>() / (5.0 * 16.0))
        .sum::<f64>()
        / 4.0;
    assert!((csv_mean_mse(&dir.path().join("zero.csv")) - expected).abs() < 1e-15);
}

#[test]
fn converged_recovery_beats_three_iterations() {
    let dir = tempfile::tempdir().unwrap();
    small_dataset(dir.path());
    let k3 = write_cfg(dir.path(), "k3.cfg", "data_dir = data\nout = k3.csv\nk = 3\n");
    let conv = write_cfg(dir.path(), "conv.cfg", "data_dir = data\nout = conv.csv\nmethod = sista_converged\n");
    assert_eq!(cli::run(Command::Recover, &k3), exit::OK);
    assert_eq!(cli::run(Command::Recover, &conv), exit::OK);
    assert!(csv_mean_mse(&dir.path().join("conv.csv")) <= csv_mean_mse(&dir.path().join("k3.csv")));
}

#[test]
fn empty_split_gives_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let gen = write_cfg(dir.path(), "gen.cfg", "out_dir = data\nm = 4\nn = 8\nlevels = 1\nt = 3\ntrain = 2\nval = 1\ntest = 0\n");
    assert_eq!(cli::run(Command::Datagen, &gen), exit::OK);
    let cfg = write_cfg(dir.path(), "rec.cfg", "data_dir = data\nout = out.csv\nmethod = ista\n");
    assert_eq!(cli::run(Command::Recover, &cfg), exit::OK);
    assert_eq!(fs::read_to_string(dir.path().join("out.csv")).unwrap(), "sequence,mse,psnr,sse,iterations\n");
}

#[test]
fn every_recovery_method_runs() {
    let dir = tempfile::tempdir().unwrap();
    small_dataset(dir.path());
    for method in ["ista", "ista_converged", "sista", "sista_converged"] {
        let cfg = write_cfg(dir.path(), "rec.cfg", &format!("data_dir = data\nout = {method}.csv\nmethod = {method}\nsplit = val\n"));
        assert_eq!(cli::run(Command::Recover, &cfg), exit::OK, "{method}");
        let rows = fs::read_to_string(dir.path().join(format!("{method}.csv"))).unwrap().lines().count();
        assert_eq!(rows, 1 + 6 + 1);
    }
    let oracle = write_cfg(dir.path(), "o.cfg", "data_dir = data\nout = o.csv\noracle_h0 = true\n");
    assert_eq!(cli::run(Command::Recover, &oracle), exit::OK);
    let search = write_cfg(dir.path(), "s.cfg", "data_dir = data\nout = s.csv\nsearch_trials = 3\n");
    assert_eq!(cli::run(Command::Recover, &search), exit::OK);
}

#[test]
fn untrained_epoch_matches_recover_on_validation() {
    let dir = tempfile::tempdir().unwrap();
    small_dataset(dir.path());
    let rec = write_cfg(dir.path(), "rec.cfg", "data_dir = data\nout = val.csv\nsplit = val\nk = 3\n");
    assert_eq!(cli::run(Command::Recover, &rec), exit::OK);
    let train = write_cfg(dir.path(), "train.cfg", "data_dir = data\nout_dir = run\nk = 3\nepochs = 2\nlr = 0\nbatch_size = 5\n");
    assert_eq!(cli::run(Command::Train, &train), exit::OK);
    let csv = fs::read_to_string(dir.path().join("run/loss.csv")).unwrap();
    let vals: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(vals.len(), 3);
    assert!(vals.iter().all(|v| *v == vals[0]), "lr = 0 must leave the curve flat: {vals:?}");
    // every sequence has the same length, so the mean of per-sequence MSEs is the pooled MSE
    assert!((vals[0] - csv_mean_mse(&dir.path().join("val.csv"))).abs() < 1e-12);
}

#[test]
fn train_is_reproducible_and_checkpoints_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    small_dataset(dir.path());
    let body = "data_dir = data\nout_dir = OUT\nmode = untied_sista\nepochs = 2\nlr = 1e-4\nbatch_size = 4\nseed = 9\n";
    for out in ["r1", "r2"] {
        let cfg = write_cfg(dir.path(), "train.cfg", &body.replace("OUT", out));
        assert_eq!(cli::run(Command::Train, &cfg), exit::OK);
    }
    assert_eq!(fs::read(dir.path().join("r1/loss.csv")).unwrap(), fs::read(dir.path().join("r2/loss.csv")).unwrap());
    assert_eq!(fs::read(dir.path().join("r1/final.ckpt")).unwrap(), fs::read(dir.path().join("r2/final.ckpt")).unwrap());
    let eval = write_cfg(dir.path(), "eval.cfg", "data_dir = data\ncheckpoint = r1/best.ckpt\nsplit = val\nout = eval.csv\n");
    assert_eq!(cli::run(Command::Eval, &eval), exit::OK);
    let best_val: f64 = {
        let csv = fs::read_to_string(dir.path().join("r1/loss.csv")).unwrap();
        csv.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap()).fold(f64::INFINITY, f64::min)
    };
    assert!((csv_mean_mse(&dir.path().join("eval.csv")) - best_val).abs() < 1e-12);
}

#[test]
fn divergence_has_its_own_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    small_dataset(dir.path());
    let cfg = write_cfg(dir.path(), "train.cfg", "data_dir = data\nout_dir = run\nmode = generic\ninit = random\noptimizer = sgd\nlr = 1e12\nepochs = 3\n");
    assert_eq!(cli::run(Command::Train, &cfg), exit::DIVERGED);
    assert!(dir.path().join("run/loss.csv").exists());
}

#[test]
fn gradcheck_and_equiv_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write_cfg(dir.path(), "gc.cfg", "instances = 4\n");
    assert_eq!(cli::run(Command::Gradcheck, &ok), exit::OK);
    let flipped = write_cfg(dir.path(), "gcf.cfg", "instances = 2\ninject_sign_flip = true\n");
    assert_eq!(cli::run(Command::Gradcheck, &flipped), exit::VALIDATION_FAILED);
    let eq = write_cfg(dir.path(), "eq.cfg", "instances = 100\ntol = 1e-9\n");
    assert_eq!(cli::run(Command::Equiv, &eq), exit::OK);
    let minimal = write_cfg(dir.path(), "eqm.cfg", "instances = 3\nt = 1\nk = 1\n");
    assert_eq!(cli::run(Command::Equiv, &minimal), exit::OK);
    let strict = write_cfg(dir.path(), "eqs.cfg", "instances = 100\ntol = 1e-16\n");
    assert_eq!(cli::run(Command::Equiv, &strict), exit::VALIDATION_FAILED);
}

#[test]
fn config_and_io_errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_cfg(dir.path(), "u.cfg", "instances = 2\nlearning_rate = 1\n");
    assert_eq!(cli::run(Command::Equiv, &unknown), exit::BAD_CONFIG);
    let missing = write_cfg(dir.path(), "m.cfg", "data_dir = nowhere\nout = x.csv\n");
    assert_eq!(cli::run(Command::Recover, &missing), exit::IO);
    assert_eq!(cli::run(Command::Equiv, &dir.path().join("absent.cfg")), exit::IO);
    assert!(RunConfig::parse("x = 1").is_ok());
}
