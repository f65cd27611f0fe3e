//! Evaluation protocols: reconstruction error curves, LDA classification of
//! reconstructed data, and linear retrieval from leading features.

use std::io::Write;

use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::DataMatrix;
use crate::error::{DrrError, Result};
use crate::linalg::{lstsq_pinv, lstsq_qr, matmul_new, orthonormal_columns, spd_solve};
use crate::transform::{check_k, leading_columns, InvertibleTransform};

/// Mean absolute error over all entries.
pub fn mae(a: &DataMatrix, b: &DataMatrix) -> f64 {
    entry_mean(a, b, |d| d.abs())
}

/// Mean squared error over all entries.
pub fn mse(a: &DataMatrix, b: &DataMatrix) -> f64 {
    entry_mean(a, b, |d| d * d)
}

fn entry_mean(a: &DataMatrix, b: &DataMatrix, f: impl Fn(f64) -> f64) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += f(a.get(i, j) - b.get(i, j));
        }
    }
    s / (a.nrows() * a.ncols()) as f64
}

/// Truncation error of one method at every `k = 1..=d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionCurve {
    pub method: String,
    pub mae: Vec<f64>,
    pub mse: Vec<f64>,
}

impl ReconstructionCurve {
    pub fn len(&self) -> usize {
        self.mae.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mae.is_empty()
    }

    /// `100 * MAE / MAE_reference` per k.
    pub fn relative_mae(&self, reference: &ReconstructionCurve) -> Result<Vec<f64>> {
        relative(&self.mae, &reference.mae)
    }

    pub fn relative_mse(&self, reference: &ReconstructionCurve) -> Result<Vec<f64>> {
        relative(&self.mse, &reference.mse)
    }
}

fn relative(a: &[f64], reference: &[f64]) -> Result<Vec<f64>> {
    if a.len() != reference.len() {
        return Err(DrrError::DimensionMismatch {
            expected: reference.len(),
            got: a.len(),
        });
    }
    // a zero reference error (k = d) is reported as 100 when matched exactly
    Ok(a.iter()
        .zip(reference)
        .map(|(&v, &r)| if r > 0.0 { 100.0 * v / r } else if v == 0.0 { 100.0 } else { f64::INFINITY })
        .collect())
}

pub fn reconstruction_curve(model: &dyn InvertibleTransform, x: &DataMatrix) -> Result<ReconstructionCurve> {
    let r = model.forward(x)?;
    let mut curve = ReconstructionCurve {
        method: model.method().to_string(),
        mae: Vec::with_capacity(model.dim()),
        mse: Vec::with_capacity(model.dim()),
    };
    for k in 1..=model.dim() {
        let rec = model.inverse_truncated(&leading_columns(&r, k))?;
        curve.mae.push(mae(&rec, x));
        curve.mse.push(mse(&rec, x));
    }
    Ok(curve)
}

/// Linear discriminant analysis with a shared, ridge-regularized covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    /// `C x d`.
    pub means: Mat<f64>,
    /// Pooled within-class covariance after regularization.
    pub covariance: Mat<f64>,
    pub priors: Vec<f64>,
    /// `C x d`, `Sigma^-1 mu_c` per row.
    weights: Mat<f64>,
    bias: Vec<f64>,
}

pub const DEFAULT_LDA_RIDGE: f64 = 1e-6;

impl LdaModel {
    /// `labels` must be class indices in `0..C` with every class present at
    /// least twice. `ridge` adds `ridge * trace(Sigma) / d` to the diagonal.
    pub fn fit(x: &DataMatrix, labels: &[usize], ridge: f64) -> Result<Self> {
        let (n, d) = (x.nrows(), x.ncols());
        if labels.len() != n {
            return Err(DrrError::InvalidParameter(format!("{} labels for {n} samples", labels.len())));
        }
        if !(ridge >= 0.0 && ridge.is_finite()) {
            return Err(DrrError::InvalidParameter("LDA ridge must be non-negative".into()));
        }
        let c = labels.iter().max().map_or(0, |m| m + 1);
        let mut counts = vec![0usize; c];
        labels.iter().for_each(|&l| counts[l] += 1);
        if c < 2 || counts.iter().any(|&k| k < 2) {
            return Err(DrrError::InvalidParameter(format!(
                "LDA needs at least 2 classes with at least 2 samples each, got counts {counts:?}"
            )));
        }
        let mut means = Mat::<f64>::zeros(c, d);
        for (i, &l) in labels.iter().enumerate() {
            for j in 0..d {
                means[(l, j)] += x.get(i, j);
            }
        }
        for l in 0..c {
            for j in 0..d {
                means[(l, j)] /= counts[l] as f64;
            }
        }
        let dev = Mat::from_fn(n, d, |i, j| x.get(i, j) - means[(labels[i], j)]);
        let mut cov = matmul_new(dev.transpose(), dev.as_ref());
        let denom = (n - c).max(1) as f64;
        let trace: f64 = (0..d).map(|j| cov[(j, j)]).sum::<f64>() / denom;
        for j in 0..d {
            for i in 0..d {
                cov[(i, j)] /= denom;
            }
            cov[(j, j)] += ridge * trace / d as f64;
        }
        let weights = spd_solve(cov.as_ref(), means.transpose())
            .ok_or(DrrError::SingularCovariance)?
            .transpose()
            .to_owned();
        let priors: Vec<f64> = counts.iter().map(|&k| k as f64 / n as f64).collect();
        let bias = (0..c)
            .map(|l| {
                let quad: f64 = (0..d).map(|j| weights[(l, j)] * means[(l, j)]).sum();
                -0.5 * quad + priors[l].ln()
            })
            .collect();
        Ok(Self {
            means,
            covariance: cov,
            priors,
            weights,
            bias,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.priors.len()
    }

    /// Class index with the largest discriminant (lowest index on ties).
    pub fn predict(&self, x: &DataMatrix) -> Result<Vec<usize>> {
        x.check_cols(self.means.ncols())?;
        let scores = matmul_new(x.mat().as_ref(), self.weights.transpose());
        Ok((0..x.nrows())
            .map(|i| {
                let mut best = 0;
                let mut best_v = f64::NEG_INFINITY;
                for l in 0..self.n_classes() {
                    let v = scores[(i, l)] + self.bias[l];
                    if v > best_v {
                        best = l;
                        best_v = v;
                    }
                }
                best
            })
            .collect())
    }
}

/// Fraction of mismatched labels.
pub fn classification_error(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(DrrError::InvalidParameter(format!(
            "cannot compare {} predictions with {} labels",
            pred.len(),
            truth.len()
        )));
    }
    let wrong = pred.iter().zip(truth).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / pred.len() as f64)
}

/// Multi-output least squares with intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsModel {
    /// `k x q`.
    pub coef: Mat<f64>,
    pub intercept: Vec<f64>,
}

impl OlsModel {
    pub fn fit(f: &DataMatrix, y: &DataMatrix) -> Result<Self> {
        let (n, k) = (f.nrows(), f.ncols());
        if y.nrows() != n {
            return Err(DrrError::InvalidParameter(format!("{} target rows for {n} samples", y.nrows())));
        }
        if n <= k {
            return Err(DrrError::InvalidParameter(format!("OLS needs more samples than features ({n} <= {k})")));
        }
        let a = Mat::from_fn(n, k + 1, |i, j| if j == 0 { 1.0 } else { f.get(i, j - 1) });
        let sol = match lstsq_qr(a.as_ref(), y.mat().as_ref()) {
            Some(s) => s,
            None => {
                log::warn!("OLS design is rank deficient; using the pseudo-inverse");
                lstsq_pinv(a.as_ref(), y.mat().as_ref())?
            }
        };
        Ok(Self {
            intercept: sol.row(0).iter().copied().collect(),
            coef: sol.subrows(1, k).to_owned(),
        })
    }

    pub fn predict(&self, f: &DataMatrix) -> Result<DataMatrix> {
        f.check_cols(self.coef.nrows())?;
        let mut y = matmul_new(f.mat().as_ref(), self.coef.as_ref());
        for j in 0..y.ncols() {
            for i in 0..y.nrows() {
                y[(i, j)] += self.intercept[j];
            }
        }
        Ok(DataMatrix::from_mat_unchecked(y))
    }
}

pub fn retrieval_mae(model: &OlsModel, f_test: &DataMatrix, y_test: &DataMatrix) -> Result<f64> {
    let pred = model.predict(f_test)?;
    y_test.check_cols(pred.ncols())?;
    if y_test.nrows() != pred.nrows() {
        return Err(DrrError::InvalidParameter("feature and target row counts differ".into()));
    }
    Ok(mae(&pred, y_test))
}

/// Reconstructs train and test data from `k` coordinates, fits LDA on the
/// reconstructed training set and reports the test error, for each `k`.
pub fn classification_curve(
    model: &dyn InvertibleTransform,
    train: (&DataMatrix, &[usize]),
    test: (&DataMatrix, &[usize]),
    ks: &[usize],
    ridge: f64,
) -> Result<Vec<(usize, f64)>> {
    let (rtr, rte) = (model.forward(train.0)?, model.forward(test.0)?);
    ks.iter()
        .map(|&k| {
            check_k(k, model.dim())?;
            let xtr = model.inverse_truncated(&leading_columns(&rtr, k))?;
            let xte = model.inverse_truncated(&leading_columns(&rte, k))?;
            let lda = LdaModel::fit(&xtr, train.1, ridge)?;
            Ok((k, classification_error(&lda.predict(&xte)?, test.1)?))
        })
        .collect()
}

/// OLS retrieval of `y` from the leading `k` transform coordinates, for
/// each `k`.
pub fn retrieval_curve(
    model: &dyn InvertibleTransform,
    train: (&DataMatrix, &DataMatrix),
    test: (&DataMatrix, &DataMatrix),
    ks: &[usize],
) -> Result<Vec<(usize, f64)>> {
    let (rtr, rte) = (model.forward(train.0)?, model.forward(test.0)?);
    ks.iter()
        .map(|&k| {
            check_k(k, model.dim())?;
            let ols = OlsModel::fit(&leading_columns(&rtr, k), train.1)?;
            Ok((k, retrieval_mae(&ols, &leading_columns(&rte, k), test.1)?))
        })
        .collect()
}

/// Synthetic stand-in for a spectra-to-parameters retrieval task.
///
/// Independent Gaussian latents `z` with decreasing scales drive sources
/// `u_1 = z_1`, `u_m = z_m + c * s_m * ((z_{m-1} / s_{m-1})^2 - 1)`, which are
/// embedded linearly in the ambient space with isotropic noise. Targets are
/// random linear combinations of the standardized latents plus a small
/// smooth nonlinearity, so they are linear in `z` but not in `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRetrieval {
    pub n_train: usize,
    pub n_test: usize,
    pub ambient_dim: usize,
    pub n_latent: usize,
    pub n_targets: usize,
    pub coupling: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SyntheticRetrieval {
    fn default() -> Self {
        Self {
            n_train: 4000,
            n_test: 4000,
            ambient_dim: 40,
            n_latent: 6,
            n_targets: 8,
            coupling: 0.7,
            noise_std: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalData {
    pub x_train: DataMatrix,
    pub y_train: DataMatrix,
    pub x_test: DataMatrix,
    pub y_test: DataMatrix,
}

impl SyntheticRetrieval {
    pub fn latent_scales(&self) -> Vec<f64> {
        (0..self.n_latent).map(|m| 4.0 * 0.6f64.powi(m as i32)).collect()
    }

    pub fn generate(&self) -> Result<RetrievalData> {
        if self.n_latent == 0 || self.ambient_dim < self.n_latent || self.n_targets == 0 {
            return Err(DrrError::InvalidParameter(
                "need 1 <= n_latent <= ambient_dim and at least one target".into(),
            ));
        }
        if self.n_train < 2 || self.n_test < 1 || !(self.noise_std >= 0.0) || !self.coupling.is_finite() {
            return Err(DrrError::InvalidParameter("invalid synthetic retrieval settings".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };
        let (p, m, q) = (self.ambient_dim, self.n_latent, self.n_targets);
        let embed = orthonormal_columns(Mat::from_fn(p, m, |_, _| gauss()).as_ref());
        let w = Mat::from_fn(q, m, |_, _| gauss());
        let s = self.latent_scales();

        let mut sample = |n: usize| -> (DataMatrix, DataMatrix) {
            let mut x = Mat::<f64>::zeros(n, p);
            let mut y = Mat::<f64>::zeros(n, q);
            for i in 0..n {
                let z: Vec<f64> = s.iter().map(|sc| sc * gauss()).collect();
                let mut u = z.clone();
                for k in 1..m {
                    u[k] += self.coupling * s[k] * ((z[k - 1] / s[k - 1]).powi(2) - 1.0);
                }
                for r in 0..p {
                    x[(i, r)] = (0..m).map(|k| embed[(r, k)] * u[k]).sum::<f64>() + self.noise_std * gauss();
                }
                for t in 0..q {
                    let lin: f64 = (0..m).map(|k| w[(t, k)] * z[k] / s[k]).sum();
                    y[(i, t)] = lin + 0.2 * (z[t % m] / s[t % m]).tanh();
                }
            }
            (DataMatrix::from_mat_unchecked(x), DataMatrix::from_mat_unchecked(y))
        };
        let (x_train, y_train) = sample(self.n_train);
        let (x_test, y_test) = sample(self.n_test);
        Ok(RetrievalData {
            x_train,
            y_train,
            x_test,
            y_test,
        })
    }
}

/// One cell of a results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: String,
    pub seed: u64,
    pub k: usize,
    pub metric: String,
    pub value: f64,
}

pub fn write_results<W: Write>(mut w: W, rows: &[ResultRow]) -> std::io::Result<()> {
    writeln!(w, "method,seed,k,metric,value")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.method, r.seed, r.k, r.metric, r.value)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pca::PcaModel;
    use rand::Rng;

    fn gaussian(n: usize, d: usize, seed: u64) -> DataMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DataMatrix::new(Mat::from_fn(n, d, |_, j| (d - j) as f64 * rng.sample::<f64, _>(StandardNormal))).unwrap()
    }

    #[test]
    fn pca_curve_matches_tail_eigenvalues() {
        let x = gaussian(500, 5, 1);
        let m = PcaModel::fit(&x).unwrap();
        let c = reconstruction_curve(&m, &x).unwrap();
        let n = x.nrows() as f64;
        for k in 1..=5 {
            let tail: f64 = m.eigenvalues()[k..].iter().sum();
            let expected = tail * (n - 1.0) / n / 5.0;
            assert!((c.mse[k - 1] - expected).abs() <= 1e-8 * expected.max(1e-12), "k={k}");
        }
        assert!(c.mae[4] < 1e-12);
        assert!(c.mse.windows(2).all(|w| w[1] <= w[0] + 1e-10));
        assert!(c.relative_mae(&c).unwrap()[..4].iter().all(|&v| (v - 100.0).abs() < 1e-12));
    }

    #[test]
    fn lda_separated_and_chance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![if i < 20 { -5.0 } else { 5.0 } + rng.random_range(-1.0..1.0)]).collect();
        let labels: Vec<usize> = (0..40).map(|i| usize::from(i >= 20)).collect();
        let x = DataMatrix::from_rows(&rows).unwrap();
        let lda = LdaModel::fit(&x, &labels, DEFAULT_LDA_RIDGE).unwrap();
        assert_eq!(classification_error(&lda.predict(&x).unwrap(), &labels).unwrap(), 0.0);

        // identical class distributions, 3 classes
        let x = gaussian(2000, 2, 3);
        let lab: Vec<usize> = (0..2000).map(|i| i % 3).collect();
        let xt = gaussian(2000, 2, 4);
        let lda = LdaModel::fit(&x, &lab, DEFAULT_LDA_RIDGE).unwrap();
        let err = classification_error(&lda.predict(&xt).unwrap(), &lab).unwrap();
        assert!((err - 2.0 / 3.0).abs() < 0.05, "{err}");
    }

    #[test]
    fn lda_errors() {
        let x = DataMatrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0], vec![4.0, 4.0]]).unwrap();
        // collinear features: singular without a ridge
        assert!(matches!(LdaModel::fit(&x, &[0, 0, 1, 1], 0.0), Err(DrrError::SingularCovariance)));
        assert!(LdaModel::fit(&x, &[0, 0, 1, 1], 1e-3).is_ok());
        assert!(LdaModel::fit(&x, &[0, 0, 0, 1], 1e-3).is_err());
        assert!(LdaModel::fit(&x, &[0, 0, 0, 0], 1e-3).is_err());
        assert!(classification_error(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn ols_exact_and_independent() {
        let f = gaussian(300, 3, 5);
        let y = DataMatrix::new(Mat::from_fn(300, 2, |i, j| 1.0 + f.get(i, 0) * (j + 1) as f64 - 2.0 * f.get(i, 2))).unwrap();
        let m = OlsModel::fit(&f, &y).unwrap();
        assert!(retrieval_mae(&m, &f, &y).unwrap() < 1e-8);

        let y = gaussian(3000, 2, 6);
        let f = gaussian(3000, 3, 7);
        let m = OlsModel::fit(&f, &y).unwrap();
        let means = y.column_means();
        let mad: f64 = (0..2)
            .map(|j| (0..3000).map(|i| (y.get(i, j) - means[j]).abs()).sum::<f64>())
            .sum::<f64>()
            / 6000.0;
        let got = retrieval_mae(&m, &f, &y).unwrap();
        assert!((got - mad).abs() < 0.05 * mad);
        assert!(OlsModel::fit(&gaussian(3, 3, 1), &gaussian(3, 1, 1)).is_err());
    }

    #[test]
    fn ols_rank_deficient_falls_back() {
        let f = DataMatrix::new(Mat::from_fn(20, 2, |i, _| i as f64)).unwrap();
        let y = DataMatrix::new(Mat::from_fn(20, 1, |i, _| 3.0 * i as f64)).unwrap();
        let m = OlsModel::fit(&f, &y).unwrap();
        assert!(retrieval_mae(&m, &f, &y).unwrap() < 1e-8);
    }

    #[test]
    fn synthetic_task_shapes_and_determinism() {
        let spec = SyntheticRetrieval {
            n_train: 50,
            n_test: 30,
            ..SyntheticRetrieval::default()
        };
        let a = spec.generate().unwrap();
        assert_eq!((a.x_train.nrows(), a.x_train.ncols(), a.y_test.nrows(), a.y_test.ncols()), (50, 40, 30, 8));
        assert_eq!(a, spec.generate().unwrap());
        let bad = SyntheticRetrieval {
            n_latent: 50,
            ..spec
        };
        assert!(bad.generate().is_err());
    }

    #[test]
    fn results_table_format() {
        let mut out = Vec::new();
        let rows = [ResultRow {
            method: "pca".into(),
            seed: 1,
            k: 2,
            metric: "mae".into(),
            value: 0.5,
        }];
        write_results(&mut out, &rows).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "method,seed,k,metric,value\npca,1,2,mae,0.5\n");
    }
}
