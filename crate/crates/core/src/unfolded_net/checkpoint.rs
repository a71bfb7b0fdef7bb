//! Network checkpoints.
//!
//! A checkpoint is one file:
//!
//! ```text
//! SSRCKPT1\n
//! <manifest byte length, decimal>\n
//! <manifest: UTF-8 `key = value` lines>
//! <SSR1 records, one per `matrix` line of the manifest, in order>
//! ```
//!
//! Manifest keys are `kind`, `k`, `n`, `m`, then `scalar <name> = <hex>`
//! lines (IEEE-754 bits as 16 hex digits, so values round-trip exactly) and
//! `matrix <name> = <rows>x<cols>` lines. Vectors are stored as column matrices.

use std::collections::HashMap;
use std::path::Path;

use super::mapping::SistaLayer;
use super::model::{Network, Parameterization, TiedSistaNet, UntiedSistaParams};
use super::rnn::{Connectivity, StackedRnnParams};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::linops::ssr1::{self, RecordReader};
use crate::linops::{DenseMatrix, DenseVector};
use crate::sparse_recovery::SistaParams;

const MAGIC: &[u8] = b"SSRCKPT1\n";

enum Entry {
    Scalar(f64),
    Matrix(DenseMatrix),
}

fn column(v: &DenseVector) -> DenseMatrix {
    DenseMatrix::from_columns(std::slice::from_ref(v)).expect("single column")
}

fn entries(net: &Network) -> Vec<(String, Entry)> {
    let mut out = Vec::new();
    let mut mat = |name: String, m: &DenseMatrix| out.push((name, Entry::Matrix(m.clone())));
    let mut scalars = Vec::new();
    match net {
        Network::Tied(t) => {
            let p = &t.params;
            mat("A".into(), &p.a);
            mat("D".into(), &p.d);
            mat("F".into(), &p.f);
            mat("h0".into(), &column(&p.h0));
            scalars.extend([("alpha".to_string(), p.alpha), ("lambda1".into(), p.lambda1), ("lambda2".into(), p.lambda2)]);
        }
        Network::Untied(u) => {
            mat("h0".into(), &column(&u.h0));
            for (k, l) in u.layers.iter().enumerate() {
                mat(format!("layer{k}.A"), &l.a);
                mat(format!("layer{k}.D"), &l.d);
                mat(format!("layer{k}.F"), &l.f);
                scalars.extend([
                    (format!("layer{k}.alpha"), l.alpha),
                    (format!("layer{k}.lambda1"), l.lambda1),
                    (format!("layer{k}.lambda2"), l.lambda2),
                ]);
            }
        }
        Network::Generic(p) => {
            for (k, v) in p.h0.iter().enumerate() {
                mat(format!("h0.{k}"), &column(v));
            }
            for (k, v) in p.b.iter().enumerate() {
                mat(format!("b.{k}"), &column(v));
            }
            for (k, w) in p.w.iter().enumerate() {
                mat(format!("W.{k}"), w);
            }
            for (k, v) in p.v.iter().enumerate() {
                mat(format!("V.{k}"), v);
            }
            for (k, s) in p.s.iter().enumerate() {
                mat(format!("S.{}", k + 1), s);
            }
            mat("U".into(), &p.u);
            mat("c".into(), &column(&p.c));
        }
    }
    out.extend(scalars.into_iter().map(|(n, v)| (n, Entry::Scalar(v))));
    out
}

fn dims(net: &Network) -> (usize, usize) {
    let rnn_dims = |p: &StackedRnnParams| (p.hidden_len(), p.input_len());
    match net {
        Network::Generic(p) => rnn_dims(p),
        Network::Untied(u) => (u.h0.len(), u.layers[0].a.rows()),
        Network::Tied(t) => (t.params.code_len(), t.params.measurements()),
    }
}

pub fn encode(net: &Network) -> Vec<u8> {
    let (n, m) = dims(net);
    let mut manifest = format!("kind = {}\nk = {}\nn = {n}\nm = {m}\n", net.kind(), net.layers());
    let mut blobs = Vec::new();
    for (name, entry) in entries(net) {
        match entry {
            Entry::Scalar(v) => manifest.push_str(&format!("scalar {name} = {:016x}\n", v.to_bits())),
            Entry::Matrix(mat) => {
                manifest.push_str(&format!("matrix {name} = {}x{}\n", mat.rows(), mat.cols()));
                ssr1::encode(&mat, &mut blobs);
            }
        }
    }
    let mut out = MAGIC.to_vec();
    out.extend_from_slice(format!("{}\n", manifest.len()).as_bytes());
    out.extend_from_slice(manifest.as_bytes());
    out.extend_from_slice(&blobs);
    out
}

pub fn save(path: &Path, net: &Network) -> Result<()> {
    fsutil::atomic_write(path, &encode(net))
}

pub fn load(path: &Path) -> Result<Network> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

fn malformed(offset: usize, reason: impl Into<String>) -> Error {
    Error::Malformed {
        format: "checkpoint",
        offset: offset as u64,
        reason: reason.into(),
    }
}

pub fn decode(bytes: &[u8]) -> Result<Network> {
    if !bytes.starts_with(MAGIC) {
        return Err(malformed(0, "bad magic"));
    }
    let mut pos = MAGIC.len();
    let nl = bytes[pos..]
        .iter()
        .position(|b| *b == b'\n')
        .ok_or_else(|| malformed(pos, "missing manifest length"))?;
    let len: usize = std::str::from_utf8(&bytes[pos..pos + nl])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| malformed(pos, "bad manifest length"))?;
    pos += nl + 1;
    let manifest_bytes = bytes
        .get(pos..pos + len)
        .ok_or_else(|| malformed(pos, "truncated manifest"))?;
    let manifest = std::str::from_utf8(manifest_bytes).map_err(|_| malformed(pos, "manifest is not UTF-8"))?;
    let blob_start = pos + len;

    let mut header = HashMap::new();
    let mut scalars = HashMap::new();
    let mut matrix_names = Vec::new();
    for line in manifest.lines() {
        let (key, value) = line
            .split_once(" = ")
            .ok_or_else(|| malformed(pos, format!("bad manifest line '{line}'")))?;
        if let Some(name) = key.strip_prefix("scalar ") {
            let bits = u64::from_str_radix(value, 16).map_err(|_| malformed(pos, format!("bad scalar '{value}'")))?;
            scalars.insert(name.to_string(), f64::from_bits(bits));
        } else if let Some(name) = key.strip_prefix("matrix ") {
            matrix_names.push(name.to_string());
        } else {
            header.insert(key.to_string(), value.to_string());
        }
    }
    let mut reader = RecordReader::new(&bytes[blob_start..]);
    let mut matrices = HashMap::new();
    for name in matrix_names {
        let m = reader.read_matrix().map_err(|e| match e {
            Error::Malformed { offset, reason, .. } => malformed(blob_start + offset as usize, reason),
            other => other,
        })?;
        matrices.insert(name, m);
    }

    let get_usize = |key: &str| -> Result<usize> {
        header
            .get(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| malformed(0, format!("missing or bad '{key}'")))
    };
    let kind: Parameterization = header
        .get("kind")
        .ok_or_else(|| malformed(0, "missing 'kind'"))?
        .parse()?;
    let k = get_usize("k")?;
    let mut take = |name: &str| -> Result<DenseMatrix> {
        matrices.remove(name).ok_or_else(|| malformed(0, format!("missing matrix '{name}'")))
    };
    let scalar = |name: &str| -> Result<f64> {
        scalars.get(name).copied().ok_or_else(|| malformed(0, format!("missing scalar '{name}'")))
    };
    let vector = |m: DenseMatrix| DenseVector::from_vec_unchecked(m.as_slice().to_vec());

    let net = match kind {
        Parameterization::TiedSista => Network::Tied(TiedSistaNet {
            params: SistaParams {
                a: take("A")?,
                d: take("D")?,
                f: take("F")?,
                h0: vector(take("h0")?),
                alpha: scalar("alpha")?,
                lambda1: scalar("lambda1")?,
                lambda2: scalar("lambda2")?,
            },
            k,
        }),
        Parameterization::UntiedSista => {
            let h0 = vector(take("h0")?);
            let layers = (0..k)
                .map(|i| {
                    Ok(SistaLayer {
                        a: take(&format!("layer{i}.A"))?,
                        d: take(&format!("layer{i}.D"))?,
                        f: take(&format!("layer{i}.F"))?,
                        alpha: scalar(&format!("layer{i}.alpha"))?,
                        lambda1: scalar(&format!("layer{i}.lambda1"))?,
                        lambda2: scalar(&format!("layer{i}.lambda2"))?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Network::Untied(UntiedSistaParams { h0, layers })
        }
        Parameterization::Generic => {
            let mut many = |prefix: &str, range: std::ops::Range<usize>| -> Result<Vec<DenseMatrix>> {
                let mut out = Vec::new();
                for i in range {
                    match take(&format!("{prefix}.{i}")) {
                        Ok(m) => out.push(m),
                        Err(_) if prefix == "V" && i > 0 => break,
                        Err(e) => return Err(e),
                    }
                }
                Ok(out)
            };
            let h0 = many("h0", 0..k)?.into_iter().map(vector).collect();
            let b = many("b", 0..k)?.into_iter().map(vector).collect();
            let w = many("W", 0..k)?;
            let v = many("V", 0..k)?;
            let s = many("S", 1..k)?;
            Network::Generic(StackedRnnParams {
                connectivity: Connectivity::Generic,
                h0,
                b,
                w,
                v,
                s,
                u: take("U")?,
                c: vector(take("c")?),
            })
        }
    };
    net.validate()?;
    Ok(net)
}
