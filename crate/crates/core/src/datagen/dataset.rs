//! Synthetic train/val/test datasets and their on-disk layout.
//!
//! A dataset directory holds `A.ssr1`, `D.ssr1`, `F.ssr1`, a `manifest.txt`
//! recording the generating spec and every per-sample seed, and one file per
//! sample under `train/`, `val/` and `test/`. Sample files are four
//! concatenated SSR1 records: `x` (M x T), `y` (N x T), `h` (N x T) and
//! `h_init` (N x 1).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::model::{sample_sequence, SequenceSample, SequentialModelSpec};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::linops::ssr1::{self, RecordReader};
use crate::linops::{build_dictionary, sample_measurement_matrix, DenseMatrix, DenseVector, DictionarySpec};
use crate::rng::{self, streams};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    fn index(self) -> u64 {
        self as u64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSpec {
    pub m: usize,
    pub n: usize,
    pub t: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub seed: u64,
    pub dictionary: DictionarySpec,
    pub sigma2: f64,
    pub nu1: f64,
    pub nu2: f64,
    /// probability that an entry of `h_init` is active
    pub init_density: f64,
    /// standard deviation of the active entries of `h_init`
    pub init_scale: f64,
    /// constant level added to the initial signal `D h_init`, like the mean
    /// intensity shared by image columns
    pub offset: f64,
}

impl DatasetSpec {
    pub fn count(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Val => self.val,
            Split::Test => self.test,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 || self.t == 0 {
            return Err(Error::InvalidArgument(format!(
                "dimensions must be positive (m={}, n={}, t={})",
                self.m, self.n, self.t
            )));
        }
        if self.dictionary.size != self.n {
            return Err(Error::dims("DatasetSpec dictionary", self.n, self.dictionary.size));
        }
        self.dictionary.validate()?;
        if !(0.0..=1.0).contains(&self.init_density) || !(self.init_scale >= 0.0) || !self.offset.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "need init_density in [0,1] and init_scale >= 0 (got {}, {})",
                self.init_density, self.init_scale
            )));
        }
        Ok(())
    }

    /// Seed of sample `index` within `split`.
    pub fn sample_seed(&self, split: Split, index: usize) -> u64 {
        rng::derive_seed(self.seed, (split.index() << 40) | index as u64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub a: DenseMatrix,
    pub d: DenseMatrix,
    pub f: DenseMatrix,
    pub train: Vec<SequenceSample>,
    pub val: Vec<SequenceSample>,
    pub test: Vec<SequenceSample>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> &[SequenceSample] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

fn initial_code(spec: &DatasetSpec, d: &DenseMatrix, seed: u64) -> Result<DenseVector> {
    let level = d.tmv(&DenseVector::filled(spec.n, spec.offset));
    let normal = Normal::new(0.0, spec.init_scale).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut r = rng::stream(seed, streams::INSTANCE);
    Ok(DenseVector::from_fn(spec.n, |_| {
        let active = r.random_bool(spec.init_density);
        let value = normal.sample(&mut r);
        if active {
            value
        } else {
            0.0
        }
    })
    .add(&level))
}

/// Generates every split. Samples are independent, so they are drawn in
/// parallel from their own derived seeds.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    let a = sample_measurement_matrix(spec.m, spec.n, spec.seed);
    let d = build_dictionary(&spec.dictionary)?;
    let f = DenseMatrix::identity(spec.n);
    let model = SequentialModelSpec {
        a: a.clone(),
        d: d.clone(),
        f: f.clone(),
        sigma2: spec.sigma2,
        nu1: spec.nu1,
        nu2: spec.nu2,
        t: spec.t,
        h_init: DenseVector::zeros(spec.n),
    };
    let draw = |split: Split| -> Result<Vec<SequenceSample>> {
        (0..spec.count(split))
            .into_par_iter()
            .map(|i| {
                let seed = spec.sample_seed(split, i);
                let mut m = model.clone();
                m.h_init = initial_code(spec, &d, seed)?;
                sample_sequence(&m, seed)
            })
            .collect()
    };
    Ok(Dataset {
        train: draw(Split::Train)?,
        val: draw(Split::Val)?,
        test: draw(Split::Test)?,
        a,
        d,
        f,
    })
}

fn as_matrix(seq: &[DenseVector], rows: usize) -> DenseMatrix {
    if seq.is_empty() {
        return DenseMatrix::zeros(rows, 0);
    }
    DenseMatrix::from_columns(seq).expect("equal-length columns")
}

pub fn encode_sample(s: &SequenceSample, out: &mut Vec<u8>) {
    let n = s.h_init.len();
    let m = s.x_seq.first().map_or(0, |x| x.len());
    ssr1::encode(&as_matrix(&s.x_seq, m), out);
    ssr1::encode(&as_matrix(&s.y_seq, n), out);
    ssr1::encode(&as_matrix(&s.h_seq, n), out);
    ssr1::encode(&as_matrix(std::slice::from_ref(&s.h_init), n), out);
}

pub fn decode_sample(bytes: &[u8]) -> Result<SequenceSample> {
    let mut r = RecordReader::new(bytes);
    let x = r.read_matrix()?;
    let y = r.read_matrix()?;
    let h = r.read_matrix()?;
    let h_init = r.read_matrix()?;
    let t = x.cols();
    if y.cols() != t || h.cols() != t || h.rows() != y.rows() || h_init.shape() != (y.rows(), 1) {
        return Err(Error::Malformed {
            format: "sample",
            offset: 0,
            reason: format!(
                "inconsistent records x {:?}, y {:?}, h {:?}, h_init {:?}",
                x.shape(),
                y.shape(),
                h.shape(),
                h_init.shape()
            ),
        });
    }
    Ok(SequenceSample {
        x_seq: x.columns(),
        y_seq: y.columns(),
        h_seq: h.columns(),
        h_init: h_init.column(0),
    })
}

pub fn save_sample(path: &Path, s: &SequenceSample) -> Result<()> {
    let mut bytes = Vec::new();
    encode_sample(s, &mut bytes);
    fsutil::atomic_write(path, &bytes)
}

pub fn load_sample(path: &Path) -> Result<SequenceSample> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_sample(&bytes)
}

fn sample_path(dir: &Path, split: Split, index: usize) -> PathBuf {
    dir.join(split.as_str()).join(format!("{index:05}.seq"))
}

/// Text manifest: the generating spec, then one `sample <split> <index> =
/// <seed>` line per sample.
pub fn manifest(spec: &DatasetSpec) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "m = {}\nn = {}\nt = {}", spec.m, spec.n, spec.t);
    let _ = writeln!(s, "train = {}\nval = {}\ntest = {}", spec.train, spec.val, spec.test);
    let _ = writeln!(s, "seed = {}", spec.seed);
    let _ = writeln!(s, "dictionary = {}\nlevels = {}", spec.dictionary.kind, spec.dictionary.levels);
    let _ = writeln!(s, "sigma2 = {:?}\nnu1 = {:?}\nnu2 = {:?}", spec.sigma2, spec.nu1, spec.nu2);
    let _ = writeln!(s, "init_density = {:?}\ninit_scale = {:?}", spec.init_density, spec.init_scale);
    let _ = writeln!(s, "offset = {:?}", spec.offset);
    let _ = writeln!(s, "measurement_seed = {}", spec.seed);
    for split in Split::ALL {
        for i in 0..spec.count(split) {
            let _ = writeln!(s, "sample {} {i} = {}", split.as_str(), spec.sample_seed(split, i));
        }
    }
    s
}

pub fn write_dataset(dir: &Path, spec: &DatasetSpec, data: &Dataset) -> Result<()> {
    for split in Split::ALL {
        let sub = dir.join(split.as_str());
        std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
    }
    ssr1::save(&dir.join("A.ssr1"), &data.a)?;
    ssr1::save(&dir.join("D.ssr1"), &data.d)?;
    ssr1::save(&dir.join("F.ssr1"), &data.f)?;
    for split in Split::ALL {
        for (i, s) in data.split(split).iter().enumerate() {
            save_sample(&sample_path(dir, split, i), s)?;
        }
    }
    fsutil::atomic_write(&dir.join("manifest.txt"), manifest(spec).as_bytes())
}

fn manifest_count(text: &str, split: Split) -> Result<usize> {
    text.lines()
        .filter_map(|l| l.split_once(" = "))
        .find(|(k, _)| *k == split.as_str())
        .and_then(|(_, v)| v.trim().parse().ok())
        .ok_or_else(|| Error::Malformed {
            format: "manifest",
            offset: 0,
            reason: format!("missing '{}' count", split.as_str()),
        })
}

/// Reads a dataset directory written by [`write_dataset`].
pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let manifest_path = dir.join("manifest.txt");
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let a = ssr1::load(&dir.join("A.ssr1"))?;
    let d = ssr1::load(&dir.join("D.ssr1"))?;
    let f = ssr1::load(&dir.join("F.ssr1"))?;
    let mut splits = Vec::with_capacity(3);
    for split in Split::ALL {
        let count = manifest_count(&text, split)?;
        let samples = (0..count)
            .map(|i| load_sample(&sample_path(dir, split, i)))
            .collect::<Result<Vec<_>>>()?;
        for s in &samples {
            if s.x_seq.first().is_some_and(|x| x.len() != a.rows()) || s.h_init.len() != a.cols() {
                return Err(Error::dims("dataset sample", format!("M={}, N={}", a.rows(), a.cols()), format!(
                    "M={}, N={}",
                    s.x_seq.first().map_or(0, |x| x.len()),
                    s.h_init.len()
                )));
            }
        }
        splits.push(samples);
    }
    let test = splits.pop().expect("three splits");
    let val = splits.pop().expect("three splits");
    let train = splits.pop().expect("three splits");
    Ok(Dataset { a, d, f, train, val, test })
}
