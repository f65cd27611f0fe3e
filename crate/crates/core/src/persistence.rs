//! Single-file model container.
//!
//! ```text
//! DRRMODEL
//! version=1
//! method=drr
//! dim=36
//! meta.<key>=<value>        (zero or more)
//! payload_bytes=<n>
//! sha256=<hex of payload>
//! <empty line>
//! <payload>
//! ```
//!
//! The payload is a sequence of arrays, each `rows: u64`, `cols: u64`, then
//! `rows * cols` `f64` values in row-major order, all little-endian. The
//! array sequence per method:
//!
//! * pca: `mean (1 x d)`, `basis (d x d)`, `eigenvalues (1 x d)`
//! * ppa: `mean`, `degree (1 x 1)`, then per stage `e (1 x m)`,
//!   `e_perp ((m-1) x m)`, `coeffs ((m-1) x (deg+1))`, `alpha_scale (1 x 1)`
//! * drr: the pca arrays, then per dimension `2..=d` a `kind (1 x 1)` tag
//!   (0 none, 1 kernel, 2 linear) followed by `inputs (n x p)`, `beta (1 x n)`,
//!   `[sigma, gamma, jitter] (1 x 3)` for kernel or `coef (1 x p)` for linear.

use std::fmt::Write as _;
use std::path::Path;

use faer::Mat;
use sha2::{Digest, Sha256};

use crate::dataset::DataMatrix;
use crate::drr::{DrrConfig, DrrModel, LinearRegressor, Regressor};
use crate::error::{DrrError, Result};
use crate::krr::KrrModel;
use crate::pca::PcaModel;
use crate::ppa::{PpaModel, PpaStage};
use crate::transform::{InvertibleTransform, Method};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "DRRMODEL";

/// Any fitted model.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Pca(PcaModel),
    Ppa(PpaModel),
    Drr(DrrModel),
}

impl Model {
    /// Fits `method` on `x`. `degree` is used by PPA only, `drr` by DRR only.
    pub fn fit(method: Method, x: &DataMatrix, drr: &DrrConfig, degree: usize) -> Result<Self> {
        Ok(match method {
            Method::Pca => Model::Pca(PcaModel::fit(x)?),
            Method::Ppa => Model::Ppa(PpaModel::fit(x, degree)?),
            Method::Drr => Model::Drr(DrrModel::fit(x, drr)?),
        })
    }

    fn inner(&self) -> &dyn InvertibleTransform {
        match self {
            Model::Pca(m) => m,
            Model::Ppa(m) => m,
            Model::Drr(m) => m,
        }
    }
}

impl InvertibleTransform for Model {
    fn method(&self) -> Method {
        self.inner().method()
    }

    fn dim(&self) -> usize {
        self.inner().dim()
    }

    fn forward(&self, x: &DataMatrix) -> Result<DataMatrix> {
        self.inner().forward(x)
    }

    fn inverse(&self, r: &DataMatrix) -> Result<DataMatrix> {
        self.inner().inverse(r)
    }

    fn inverse_truncated(&self, leading: &DataMatrix) -> Result<DataMatrix> {
        self.inner().inverse_truncated(leading)
    }

    fn truncate_reconstruct(&self, x: &DataMatrix, k: usize) -> Result<DataMatrix> {
        self.inner().truncate_reconstruct(x, k)
    }
}

/// A decoded model file.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: Model,
    /// `meta.*` header entries, prefix stripped, in file order.
    pub metadata: Vec<(String, String)>,
}

struct Writer(Vec<u8>);

impl Writer {
    fn array(&mut self, rows: usize, cols: usize, values: impl IntoIterator<Item = f64>) {
        self.0.extend_from_slice(&(rows as u64).to_le_bytes());
        self.0.extend_from_slice(&(cols as u64).to_le_bytes());
        let mut count = 0;
        for v in values {
            self.0.extend_from_slice(&v.to_le_bytes());
            count += 1;
        }
        debug_assert_eq!(count, rows * cols);
    }

    fn vec(&mut self, v: &[f64]) {
        self.array(1, v.len(), v.iter().copied());
    }

    fn mat(&mut self, m: &Mat<f64>) {
        let (r, c) = (m.nrows(), m.ncols());
        self.array(r, c, (0..r).flat_map(|i| (0..c).map(move |j| m[(i, j)])));
    }

    fn pca(&mut self, m: &PcaModel) {
        self.vec(m.mean());
        self.mat(m.basis());
        self.vec(m.eigenvalues());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn u64(&mut self) -> Result<u64> {
        let end = self.pos + 8;
        let bytes = self
            .buf
            .get(self.pos..end)
            .ok_or_else(|| DrrError::Corrupt("payload ends mid-array".into()))?;
        self.pos = end;
        Ok(u64::from_le_bytes(bytes.try_into().expect("8 bytes")))
    }

    fn array(&mut self) -> Result<(usize, usize, Vec<f64>)> {
        let rows = self.u64()? as usize;
        let cols = self.u64()? as usize;
        let n = rows
            .checked_mul(cols)
            .filter(|n| n.saturating_mul(8) <= self.buf.len() - self.pos)
            .ok_or_else(|| DrrError::Corrupt(format!("array of {rows} x {cols} exceeds payload")))?;
        let values = (0..n).map(|_| self.u64().map(f64::from_bits)).collect::<Result<_>>()?;
        Ok((rows, cols, values))
    }

    fn vec(&mut self, len: Option<usize>) -> Result<Vec<f64>> {
        let (r, c, v) = self.array()?;
        if r != 1 || len.is_some_and(|l| l != c) {
            return Err(DrrError::Corrupt(format!("expected a vector of length {len:?}, found {r} x {c}")));
        }
        Ok(v)
    }

    fn scalar(&mut self) -> Result<f64> {
        Ok(self.vec(Some(1))?[0])
    }

    fn mat(&mut self, shape: Option<(usize, usize)>) -> Result<Mat<f64>> {
        let (r, c, v) = self.array()?;
        if shape.is_some_and(|s| s != (r, c)) {
            return Err(DrrError::Corrupt(format!("expected a {shape:?} matrix, found {r} x {c}")));
        }
        Ok(Mat::from_fn(r, c, |i, j| v[i * c + j]))
    }

    fn pca(&mut self, d: usize) -> Result<PcaModel> {
        let mean = self.vec(Some(d))?;
        let basis = self.mat(Some((d, d)))?;
        let eig = self.vec(Some(d))?;
        Ok(PcaModel::from_parts(mean, basis, eig))
    }
}

fn encode_payload(model: &Model) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    match model {
        Model::Pca(m) => w.pca(m),
        Model::Ppa(m) => {
            w.vec(m.mean());
            w.vec(&[m.degree() as f64]);
            for s in m.stages() {
                w.vec(s.leading_vector());
                w.mat(s.complement());
                w.mat(s.coefficients());
                w.vec(&[s.alpha_scale()]);
            }
        }
        Model::Drr(m) => {
            w.pca(m.pca());
            for r in m.regressors() {
                match r {
                    None => w.vec(&[0.0]),
                    Some(Regressor::Kernel(k)) => {
                        w.vec(&[1.0]);
                        let p = k.input_dim();
                        w.array(k.n_train(), p, k.train_inputs_row_major().iter().copied());
                        w.vec(k.beta());
                        w.vec(&[k.sigma(), k.gamma(), k.jitter()]);
                    }
                    Some(Regressor::Linear(l)) => {
                        w.vec(&[2.0]);
                        w.vec(l.coefficients());
                    }
                }
            }
        }
    }
    w.0
}

fn decode_payload(method: Method, d: usize, payload: &[u8]) -> Result<Model> {
    let mut r = Reader { buf: payload, pos: 0 };
    let model = match method {
        Method::Pca => Model::Pca(r.pca(d)?),
        Method::Ppa => {
            let mean = r.vec(Some(d))?;
            let degree = r.scalar()? as usize;
            let mut stages = Vec::new();
            for m in (2..=d).rev() {
                let e = r.vec(Some(m))?;
                let e_perp = r.mat(Some((m - 1, m)))?;
                let coeffs = r.mat(None)?;
                let alpha_scale = r.scalar()?;
                stages.push(PpaStage {
                    e,
                    e_perp,
                    coeffs,
                    alpha_scale,
                });
            }
            Model::Ppa(PpaModel::from_parts(mean, stages, degree)?)
        }
        Method::Drr => {
            let pca = r.pca(d)?;
            let mut regs = Vec::with_capacity(d.saturating_sub(1));
            for p in 1..d {
                let kind = r.scalar()?;
                regs.push(match kind as u8 {
                    0 => None,
                    1 => {
                        let (n, cols, inputs) = r.array()?;
                        if cols != p {
                            return Err(DrrError::Corrupt(format!("kernel inputs have {cols} columns, expected {p}")));
                        }
                        let beta = r.vec(Some(n))?;
                        let params = r.vec(Some(3))?;
                        Some(Regressor::Kernel(
                            KrrModel::from_parts(inputs, p, beta, params[0], params[1], params[2])
                                .map_err(|e| DrrError::Corrupt(e.to_string()))?,
                        ))
                    }
                    2 => Some(Regressor::Linear(LinearRegressor::new(r.vec(Some(p))?))),
                    _ => return Err(DrrError::Corrupt(format!("unknown regressor tag {kind}"))),
                });
            }
            Model::Drr(DrrModel::from_parts(pca, regs).map_err(|e| DrrError::Corrupt(e.to_string()))?)
        }
    };
    if r.pos != payload.len() {
        return Err(DrrError::Corrupt(format!("{} trailing payload bytes", payload.len() - r.pos)));
    }
    Ok(model)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Serializes a model with optional metadata. Keys and values must not
/// contain newlines, and keys must not contain `=`.
pub fn to_bytes(model: &Model, metadata: &[(String, String)]) -> Result<Vec<u8>> {
    let payload = encode_payload(model);
    let mut head = format!(
        "{MAGIC}\nversion={FORMAT_VERSION}\nmethod={}\ndim={}\n",
        model.method(),
        model.dim()
    );
    for (k, v) in metadata {
        if k.contains(['\n', '=']) || v.contains('\n') {
            return Err(DrrError::InvalidParameter(format!("metadata entry {k:?} is not header-safe")));
        }
        let _ = writeln!(head, "meta.{k}={v}");
    }
    let _ = write!(
        head,
        "payload_bytes={}\nsha256={}\n\n",
        payload.len(),
        hex(&Sha256::digest(&payload))
    );
    let mut out = head.into_bytes();
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<ModelFile> {
    let mut pos = 0;
    let mut next_line = || -> Result<&str> {
        let rest = &bytes[pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| DrrError::Corrupt("header is truncated".into()))?;
        pos += end + 1;
        std::str::from_utf8(&rest[..end]).map_err(|_| DrrError::Corrupt("header is not UTF-8".into()))
    };
    if next_line()? != MAGIC {
        return Err(DrrError::Corrupt("not a model file (bad magic)".into()));
    }
    let mut version = None;
    let mut method = None;
    let mut dim = None;
    let mut payload_bytes = None;
    let mut checksum = None;
    let mut metadata = Vec::new();
    loop {
        let line = next_line()?;
        if line.is_empty() {
            break;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| DrrError::Corrupt(format!("malformed header line {line:?}")))?;
        let bad = || DrrError::Corrupt(format!("bad header value {line:?}"));
        match key {
            "version" => {
                let v: u32 = value.parse().map_err(|_| bad())?;
                if v > FORMAT_VERSION {
                    return Err(DrrError::UnsupportedVersion {
                        found: v,
                        supported: FORMAT_VERSION,
                    });
                }
                version = Some(v);
            }
            "method" => method = Some(value.parse::<Method>().map_err(|_| bad())?),
            "dim" => dim = Some(value.parse::<usize>().map_err(|_| bad())?),
            "payload_bytes" => payload_bytes = Some(value.parse::<usize>().map_err(|_| bad())?),
            "sha256" => checksum = Some(value.to_string()),
            k => match k.strip_prefix("meta.") {
                Some(m) => metadata.push((m.to_string(), value.to_string())),
                None => return Err(DrrError::Corrupt(format!("unknown header key {k:?}"))),
            },
        }
    }
    let missing = |what: &str| DrrError::Corrupt(format!("header lacks {what}"));
    version.ok_or_else(|| missing("version"))?;
    let method = method.ok_or_else(|| missing("method"))?;
    let dim = dim.filter(|&d| d > 0).ok_or_else(|| missing("a positive dim"))?;
    let len = payload_bytes.ok_or_else(|| missing("payload_bytes"))?;
    let checksum = checksum.ok_or_else(|| missing("sha256"))?;
    let payload = &bytes[pos..];
    if payload.len() != len || hex(&Sha256::digest(payload)) != checksum {
        return Err(DrrError::Corrupt(format!(
            "checksum mismatch (payload has {} bytes, header declares {len})",
            payload.len()
        )));
    }
    Ok(ModelFile {
        model: decode_payload(method, dim, payload)?,
        metadata,
    })
}

pub fn save_model(path: impl AsRef<Path>, model: &Model, metadata: &[(String, String)]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_bytes(model, metadata)?).map_err(|e| DrrError::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    let path = path.as_ref();
    from_bytes(&std::fs::read(path).map_err(|e| DrrError::io(path, e))?)
}
