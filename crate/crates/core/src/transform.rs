use std::fmt;
use std::str::FromStr;

use faer::Mat;

use crate::dataset::DataMatrix;
use crate::error::{DrrError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Pca,
    Ppa,
    Drr,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Pca => "pca",
            Method::Ppa => "ppa",
            Method::Drr => "drr",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = DrrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pca" => Ok(Method::Pca),
            "ppa" => Ok(Method::Ppa),
            "drr" => Ok(Method::Drr),
            other => Err(DrrError::InvalidParameter(format!(
                "unknown method {other:?} (expected pca, ppa or drr)"
            ))),
        }
    }
}

/// A fitted, exactly invertible map from the input domain onto `dim()`
/// transform coordinates ordered by decreasing importance.
pub trait InvertibleTransform: Send + Sync {
    fn method(&self) -> Method;

    fn dim(&self) -> usize;

    fn forward(&self, x: &DataMatrix) -> Result<DataMatrix>;

    fn inverse(&self, r: &DataMatrix) -> Result<DataMatrix>;

    /// Maps the leading `k = leading.ncols()` transform coordinates back to
    /// the input domain, discarding everything past them.
    fn inverse_truncated(&self, leading: &DataMatrix) -> Result<DataMatrix>;

    /// Forward, keep the first `k` coordinates, invert.
    fn truncate_reconstruct(&self, x: &DataMatrix, k: usize) -> Result<DataMatrix> {
        check_k(k, self.dim())?;
        let r = self.forward(x)?;
        self.inverse_truncated(&leading_columns(&r, k))
    }
}

pub(crate) fn check_k(k: usize, d: usize) -> Result<()> {
    if k == 0 || k > d {
        return Err(DrrError::InvalidParameter(format!(
            "k must lie in 1..={d}, got {k}"
        )));
    }
    Ok(())
}

pub(crate) fn leading_columns(r: &DataMatrix, k: usize) -> DataMatrix {
    DataMatrix::from_mat_unchecked(r.mat().subcols(0, k).to_owned())
}

/// Pads `leading` with zero columns up to width `d`.
pub(crate) fn zero_pad(leading: &DataMatrix, d: usize) -> Result<DataMatrix> {
    let k = leading.ncols();
    check_k(k, d)?;
    let m = leading.mat();
    Ok(DataMatrix::from_mat_unchecked(Mat::from_fn(
        leading.nrows(),
        d,
        |i, j| if j < k { m[(i, j)] } else { 0.0 },
    )))
}
