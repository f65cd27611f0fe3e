//! Dimensionality reduction via regression.
//!
//! After PCA, every score `alpha_i` (i >= 2) is replaced by the residual
//! `y_i = alpha_i - f_i(alpha_1, ..., alpha_{i-1})`, where `f_i` is a
//! regression fitted on the *PCA scores* of the training data. Because every
//! `f_i` reads only linear scores, the forward map evaluates all regressions
//! independently; the inverse rebuilds the scores one dimension at a time.
//!
//! Each elementary step only adds a function of earlier coordinates to one
//! coordinate, so its Jacobian is unit lower triangular and the full map
//! (including the orthonormal PCA rotation) has `|det J| = 1` everywhere.

use faer::Mat;
use rayon::prelude::*;

use crate::dataset::DataMatrix;
use crate::error::{DrrError, Result};
use crate::krr::{fit_with_cv, KrrModel, KrrSettings};
use crate::linalg::{lstsq_pinv, lstsq_qr, matmul_new};
use crate::pca::PcaModel;
use crate::transform::{zero_pad, InvertibleTransform, Method};

/// Which regression family plays the role of `f_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RegressorKind {
    /// Cross-validated kernel ridge regression.
    #[default]
    Kernel,
    /// Ordinary least squares without intercept. On training data this
    /// predicts ~0 because PC scores are uncorrelated, so the model collapses
    /// to PCA; it exists to verify exactly that.
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrrConfig {
    pub krr: KrrSettings,
    pub regressor: RegressorKind,
    /// First residualized dimension, 1-based (>= 2).
    pub first_residualized: usize,
    /// Last residualized dimension, 1-based; `None` means `d`.
    pub last_residualized: Option<usize>,
    /// Cross-validate only the first residualized dimension and reuse its
    /// (sigma multiplier, gamma) for the rest.
    pub share_hyperparameters: bool,
}

impl Default for DrrConfig {
    fn default() -> Self {
        Self {
            krr: KrrSettings::default(),
            regressor: RegressorKind::Kernel,
            first_residualized: 2,
            last_residualized: None,
            share_hyperparameters: false,
        }
    }
}

impl DrrConfig {
    fn residualized_range(&self, d: usize) -> Result<std::ops::RangeInclusive<usize>> {
        let last = self.last_residualized.unwrap_or(d);
        if self.first_residualized < 2 || last > d || self.first_residualized > last.max(1) + 1 {
            return Err(DrrError::InvalidParameter(format!(
                "residualized range {}..={last} must lie within 2..={d}",
                self.first_residualized
            )));
        }
        Ok(self.first_residualized..=last)
    }
}

/// Linear predictor `f(a) = coef . a`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRegressor {
    coef: Vec<f64>,
}

impl LinearRegressor {
    pub fn new(coef: Vec<f64>) -> Self {
        Self { coef }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coef
    }

    fn fit(z: &[f64], p: usize, t: &[f64]) -> Result<Self> {
        let n = t.len();
        let a = Mat::from_fn(n, p, |i, j| z[i * p + j]);
        let b = Mat::from_fn(n, 1, |i, _| t[i]);
        let x = match lstsq_qr(a.as_ref(), b.as_ref()) {
            Some(x) => x,
            None => lstsq_pinv(a.as_ref(), b.as_ref())?,
        };
        Ok(Self {
            coef: x.col(0).iter().copied().collect(),
        })
    }

    fn predict_row_major(&self, q: &[f64]) -> Vec<f64> {
        q.chunks_exact(self.coef.len())
            .map(|r| r.iter().zip(&self.coef).map(|(a, b)| a * b).sum())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Regressor {
    Kernel(KrrModel),
    Linear(LinearRegressor),
}

impl Regressor {
    pub fn input_dim(&self) -> usize {
        match self {
            Regressor::Kernel(m) => m.input_dim(),
            Regressor::Linear(m) => m.coef.len(),
        }
    }

    fn predict_row_major(&self, q: &[f64]) -> Vec<f64> {
        match self {
            Regressor::Kernel(m) => m.predict_row_major(q),
            Regressor::Linear(m) => m.predict_row_major(q),
        }
    }

    fn gradient(&self, z: &[f64]) -> Vec<f64> {
        match self {
            Regressor::Kernel(m) => m.gradient(z),
            Regressor::Linear(m) => m.coef.clone(),
        }
    }
}

/// PCA plus one optional regressor per dimension `i = 2..=d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DrrModel {
    pca: PcaModel,
    /// Entry `j` predicts zero-based dimension `j + 1` from dimensions `0..=j`.
    regressors: Vec<Option<Regressor>>,
}

/// Row-major copy of the first `cols` columns of `m`.
fn leading_row_major(m: &Mat<f64>, cols: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * cols);
    for i in 0..m.nrows() {
        for j in 0..cols {
            out.push(m[(i, j)]);
        }
    }
    out
}

fn dim_seed(seed: u64, dim: usize) -> u64 {
    seed ^ (dim as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

impl DrrModel {
    pub fn fit(x: &DataMatrix, cfg: &DrrConfig) -> Result<Self> {
        let pca = PcaModel::fit(x)?;
        let d = pca.dim();
        if d == 1 {
            return Ok(Self {
                pca,
                regressors: Vec::new(),
            });
        }
        if x.nrows() < 2 {
            return Err(DrrError::InvalidParameter("DRR needs at least 2 samples".into()));
        }
        let range = cfg.residualized_range(d)?;
        if cfg.regressor == RegressorKind::Kernel {
            cfg.krr.validate()?;
            if x.nrows() < cfg.krr.folds {
                return Err(DrrError::InvalidParameter(format!(
                    "{} samples cannot be split into {} folds",
                    x.nrows(),
                    cfg.krr.folds
                )));
            }
        }
        let alpha = pca.scores(x)?.into_mat();
        let targets: Vec<Vec<f64>> = (0..d).map(|j| alpha.col(j).iter().copied().collect()).collect();

        // With shared hyperparameters the first residualized dimension's CV
        // choice, expressed relative to its median distance, is reused.
        let shared = if cfg.share_hyperparameters && cfg.regressor == RegressorKind::Kernel {
            let i = *range.start();
            if i <= d && range.start() <= range.end() {
                let p = i - 1;
                let z = leading_row_major(&alpha, p);
                let (m, _, median) =
                    fit_with_cv(&z, p, &targets[i - 1], &cfg.krr, dim_seed(cfg.krr.seed, i), None)?;
                Some((m.sigma() / median, m.gamma()))
            } else {
                None
            }
        } else {
            None
        };

        let dims: Vec<usize> = (2..=d).collect();
        let fitted: Vec<Option<Regressor>> = dims
            .par_iter()
            .map(|&i| -> Result<Option<Regressor>> {
                if !range.contains(&i) {
                    return Ok(None);
                }
                let p = i - 1;
                let z = leading_row_major(&alpha, p);
                let t = &targets[i - 1];
                Ok(Some(match cfg.regressor {
                    RegressorKind::Linear => Regressor::Linear(LinearRegressor::fit(&z, p, t)?),
                    RegressorKind::Kernel => {
                        let (m, cv, _) = fit_with_cv(&z, p, t, &cfg.krr, dim_seed(cfg.krr.seed, i), shared)?;
                        if let Some(cv) = cv {
                            log::debug!(
                                "dim {i}: sigma={:.4e} gamma={:.1e} cv_mse={:.4e}",
                                cv.sigma,
                                cv.gamma,
                                cv.cv_mse
                            );
                        }
                        Regressor::Kernel(m)
                    }
                }))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            pca,
            regressors: fitted,
        })
    }

    /// Assembles a model from a PCA stage and explicit regressors.
    pub fn from_parts(pca: PcaModel, regressors: Vec<Option<Regressor>>) -> Result<Self> {
        let d = pca.dim();
        if regressors.len() != d.saturating_sub(1) {
            return Err(DrrError::InvalidParameter(format!(
                "{} regressors for dimension {d}",
                regressors.len()
            )));
        }
        for (j, r) in regressors.iter().enumerate() {
            if let Some(r) = r {
                if r.input_dim() != j + 1 {
                    return Err(DrrError::InvalidParameter(format!(
                        "regressor for dimension {} takes {} inputs, expected {}",
                        j + 2,
                        r.input_dim(),
                        j + 1
                    )));
                }
            }
        }
        Ok(Self { pca, regressors })
    }

    /// Same PCA, every regressor replaced by the zero function.
    pub fn with_zero_regressors(&self) -> Self {
        let regressors = (1..self.dim())
            .map(|p| Some(Regressor::Kernel(KrrModel::zero(p, 1.0))))
            .collect();
        Self {
            pca: self.pca.clone(),
            regressors,
        }
    }

    pub fn pca(&self) -> &PcaModel {
        &self.pca
    }

    pub fn regressors(&self) -> &[Option<Regressor>] {
        &self.regressors
    }

    pub fn dim(&self) -> usize {
        self.pca.dim()
    }

    fn predict_dim(&self, alpha: &Mat<f64>, j: usize) -> Option<Vec<f64>> {
        self.regressors[j - 1]
            .as_ref()
            .map(|r| r.predict_row_major(&leading_row_major(alpha, j)))
    }

    fn forward_impl(&self, x: &DataMatrix, parallel: bool) -> Result<DataMatrix> {
        let mut alpha = self.pca.scores(x)?.into_mat();
        let d = self.dim();
        let preds: Vec<Option<Vec<f64>>> = if parallel {
            (1..d).into_par_iter().map(|j| self.predict_dim(&alpha, j)).collect()
        } else {
            (1..d).map(|j| self.predict_dim(&alpha, j)).collect()
        };
        for (j, pred) in (1..d).zip(preds) {
            if let Some(pred) = pred {
                for (i, v) in pred.into_iter().enumerate() {
                    alpha[(i, j)] -= v;
                }
            }
        }
        Ok(DataMatrix::from_mat_unchecked(alpha))
    }

    /// Forward transform with the `d - 1` regressions evaluated concurrently.
    pub fn forward(&self, x: &DataMatrix) -> Result<DataMatrix> {
        self.forward_impl(x, true)
    }

    pub fn forward_sequential(&self, x: &DataMatrix) -> Result<DataMatrix> {
        self.forward_impl(x, false)
    }

    /// Rebuilds PCA scores dimension by dimension, then un-rotates.
    pub fn inverse(&self, r: &DataMatrix) -> Result<DataMatrix> {
        r.check_cols(self.dim())?;
        let mut alpha = r.mat().clone();
        for j in 1..self.dim() {
            if let Some(pred) = self.predict_dim(&alpha, j) {
                for (i, v) in pred.into_iter().enumerate() {
                    alpha[(i, j)] += v;
                }
            }
        }
        self.pca.reconstruct(&DataMatrix::from_mat_unchecked(alpha))
    }

    /// Central finite-difference Jacobian of the full map at `x`, with step
    /// `eps * (1 + |x_j|)` per coordinate.
    pub fn jacobian_fd(&self, x: &[f64], eps: f64) -> Result<Mat<f64>> {
        let d = self.dim();
        if x.len() != d {
            return Err(DrrError::DimensionMismatch {
                expected: d,
                got: x.len(),
            });
        }
        if !(eps > 0.0) {
            return Err(DrrError::InvalidParameter("finite-difference step must be positive".into()));
        }
        let steps: Vec<f64> = x.iter().map(|v| eps * (1.0 + v.abs())).collect();
        let probes = Mat::from_fn(2 * d, d, |r, c| {
            let j = r / 2;
            let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
            x[c] + if c == j { sign * steps[j] } else { 0.0 }
        });
        let out = self.forward_sequential(&DataMatrix::new(probes)?)?;
        let o = out.mat();
        Ok(Mat::from_fn(d, d, |i, j| {
            (o[(2 * j, i)] - o[(2 * j + 1, i)]) / (2.0 * steps[j])
        }))
    }

    /// Closed-form Jacobian: unit lower-triangular regression part times `V`.
    pub fn jacobian_analytic(&self, x: &[f64]) -> Result<Mat<f64>> {
        let d = self.dim();
        let a = self.pca.scores(&DataMatrix::from_rows(&[x.to_vec()])?)?;
        let alpha = a.row(0);
        let mut lower = Mat::<f64>::identity(d, d);
        for j in 1..d {
            if let Some(r) = &self.regressors[j - 1] {
                let g = r.gradient(&alpha[..j]);
                for (k, gk) in g.into_iter().enumerate() {
                    lower[(j, k)] = -gk;
                }
            }
        }
        Ok(matmul_new(lower.as_ref(), self.pca.basis().as_ref()))
    }
}

impl InvertibleTransform for DrrModel {
    fn method(&self) -> Method {
        Method::Drr
    }

    fn dim(&self) -> usize {
        self.pca.dim()
    }

    fn forward(&self, x: &DataMatrix) -> Result<DataMatrix> {
        DrrModel::forward(self, x)
    }

    fn inverse(&self, r: &DataMatrix) -> Result<DataMatrix> {
        DrrModel::inverse(self, r)
    }

    /// Trailing residuals are set to zero, so the regressions fill in the
    /// discarded scores from the reconstructed leading ones.
    fn inverse_truncated(&self, leading: &DataMatrix) -> Result<DataMatrix> {
        DrrModel::inverse(self, &zero_pad(leading, self.dim())?)
    }
}
