//! Principal Polynomial Analysis: a deflationary sequence of univariate
//! polynomial predictions.
//!
//! Stage `i` works on the residual `x` of the previous stage (width
//! `m = d - i + 1`). It projects onto the leading principal direction `e` to
//! get the score `alpha_i`, rotates the rest onto an orthonormal complement
//! `E_perp`, and subtracts a least-squares polynomial in `alpha_i` from each
//! complement coordinate. After `d - 1` stages the one remaining coordinate
//! is `alpha_d`.

use faer::Mat;

use crate::dataset::DataMatrix;
use crate::error::{DrrError, Result};
use crate::linalg::{covariance_of_centered, lstsq_pinv, lstsq_qr, matmul_new, symmetric_eigen_desc};
use crate::transform::{check_k, InvertibleTransform, Method};

pub const DEFAULT_DEGREE: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct PpaStage {
    /// Leading unit vector, length `m`.
    pub(crate) e: Vec<f64>,
    /// `(m - 1) x m`, orthonormal rows spanning the complement of `e`.
    pub(crate) e_perp: Mat<f64>,
    /// `(m - 1) x (degree + 1)`; row `r` holds the coefficients of
    /// `c_0 + c_1 t + ... ` with `t = alpha / alpha_scale`.
    pub(crate) coeffs: Mat<f64>,
    pub(crate) alpha_scale: f64,
}

impl PpaStage {
    pub fn leading_vector(&self) -> &[f64] {
        &self.e
    }

    pub fn complement(&self) -> &Mat<f64> {
        &self.e_perp
    }

    pub fn coefficients(&self) -> &Mat<f64> {
        &self.coeffs
    }

    pub fn alpha_scale(&self) -> f64 {
        self.alpha_scale
    }

    /// Degree actually used (may be below the requested one).
    pub fn degree(&self) -> usize {
        self.coeffs.ncols() - 1
    }

    fn width(&self) -> usize {
        self.e.len()
    }

    /// `n x (degree + 1)` scaled Vandermonde matrix.
    fn vandermonde(alpha: &[f64], scale: f64, degree: usize) -> Mat<f64> {
        Mat::from_fn(alpha.len(), degree + 1, |i, j| (alpha[i] / scale).powi(j as i32))
    }

    /// Polynomial predictions, `n x (m - 1)`.
    fn predict(&self, alpha: &[f64]) -> Mat<f64> {
        let v = Self::vandermonde(alpha, self.alpha_scale, self.degree());
        matmul_new(v.as_ref(), self.coeffs.transpose())
    }

    /// One forward stage: returns the scores and the next residual.
    fn forward(&self, x: &Mat<f64>) -> (Vec<f64>, Mat<f64>) {
        let m = self.width();
        let alpha: Vec<f64> = (0..x.nrows())
            .map(|i| (0..m).map(|j| x[(i, j)] * self.e[j]).sum())
            .collect();
        let mut w = matmul_new(x.as_ref(), self.e_perp.transpose());
        w -= self.predict(&alpha);
        (alpha, w)
    }

    /// Inverse of [`Self::forward`].
    fn inverse(&self, alpha: &[f64], residual: &Mat<f64>) -> Mat<f64> {
        let mut w = self.predict(alpha);
        w += residual;
        let mut x = matmul_new(w.as_ref(), self.e_perp.as_ref());
        for i in 0..x.nrows() {
            for j in 0..x.ncols() {
                x[(i, j)] += alpha[i] * self.e[j];
            }
        }
        x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpaModel {
    mean: Vec<f64>,
    stages: Vec<PpaStage>,
    degree: usize,
}

impl PpaModel {
    pub fn fit(x: &DataMatrix, degree: usize) -> Result<Self> {
        let d = x.ncols();
        if d < 2 {
            return Err(DrrError::InvalidParameter("PPA needs at least 2 features".into()));
        }
        if degree == 0 {
            return Err(DrrError::InvalidParameter("PPA degree must be at least 1".into()));
        }
        if x.nrows() < degree + 1 {
            return Err(DrrError::InvalidParameter(format!(
                "PPA of degree {degree} needs at least {} samples, got {}",
                degree + 1,
                x.nrows()
            )));
        }
        let mean = x.column_means();
        let mut res = Mat::from_fn(x.nrows(), d, |i, j| x.get(i, j) - mean[j]);
        let mut stages = Vec::with_capacity(d - 1);
        for stage in 1..d {
            let m = res.ncols();
            let (_, dirs) = symmetric_eigen_desc(covariance_of_centered(res.as_ref()).as_ref())?;
            let e: Vec<f64> = (0..m).map(|j| dirs[(0, j)]).collect();
            let e_perp = dirs.subrows(1, m - 1).to_owned();
            let alpha: Vec<f64> = (0..res.nrows())
                .map(|i| (0..m).map(|j| res[(i, j)] * e[j]).sum())
                .collect();
            let w = matmul_new(res.as_ref(), e_perp.transpose());
            let peak = alpha.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let alpha_scale = if peak > 0.0 { peak } else { 1.0 };
            let coeffs = fit_polynomial(&alpha, alpha_scale, &w, degree, stage)?;
            let st = PpaStage {
                e,
                e_perp,
                coeffs,
                alpha_scale,
            };
            res = st.forward(&res).1;
            stages.push(st);
        }
        Ok(Self { mean, stages, degree })
    }

    pub(crate) fn from_parts(mean: Vec<f64>, stages: Vec<PpaStage>, degree: usize) -> Result<Self> {
        let d = mean.len();
        if stages.len() + 1 != d {
            return Err(DrrError::Corrupt(format!("{} PPA stages for dimension {d}", stages.len())));
        }
        for (i, s) in stages.iter().enumerate() {
            let m = d - i;
            if s.e.len() != m
                || s.e_perp.nrows() != m - 1
                || s.e_perp.ncols() != m
                || s.coeffs.nrows() != m - 1
                || s.coeffs.ncols() == 0
            {
                return Err(DrrError::Corrupt(format!("PPA stage {} has inconsistent shapes", i + 1)));
            }
        }
        Ok(Self { mean, stages, degree })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn stages(&self) -> &[PpaStage] {
        &self.stages
    }

    /// Requested polynomial degree.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Inverts stages `first..=1` starting from `scores` (at least `first`
    /// columns) and the stage-`first` residual.
    fn unwind(&self, scores: &Mat<f64>, first: usize, mut res: Mat<f64>) -> DataMatrix {
        for i in (0..first).rev() {
            let alpha: Vec<f64> = scores.col(i).iter().copied().collect();
            res = self.stages[i].inverse(&alpha, &res);
        }
        for i in 0..res.nrows() {
            for j in 0..res.ncols() {
                res[(i, j)] += self.mean[j];
            }
        }
        DataMatrix::from_mat_unchecked(res)
    }
}

fn fit_polynomial(alpha: &[f64], scale: f64, w: &Mat<f64>, degree: usize, stage: usize) -> Result<Mat<f64>> {
    for deg in (0..=degree).rev() {
        let v = PpaStage::vandermonde(alpha, scale, deg);
        if let Some(c) = lstsq_qr(v.as_ref(), w.as_ref()) {
            if deg < degree {
                log::warn!("PPA stage {stage}: polynomial degree reduced from {degree} to {deg} (rank-deficient design)");
            }
            return Ok(c.transpose().to_owned());
        }
    }
    // constant design only fails on an empty sample
    let v = PpaStage::vandermonde(alpha, scale, 0);
    Ok(lstsq_pinv(v.as_ref(), w.as_ref())?.transpose().to_owned())
}

impl InvertibleTransform for PpaModel {
    fn method(&self) -> Method {
        Method::Ppa
    }

    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn forward(&self, x: &DataMatrix) -> Result<DataMatrix> {
        x.check_cols(self.dim())?;
        let d = self.dim();
        let mut res = Mat::from_fn(x.nrows(), d, |i, j| x.get(i, j) - self.mean[j]);
        let mut out = Mat::<f64>::zeros(x.nrows(), d);
        for (s, stage) in self.stages.iter().enumerate() {
            let (alpha, next) = stage.forward(&res);
            for (i, a) in alpha.into_iter().enumerate() {
                out[(i, s)] = a;
            }
            res = next;
        }
        for i in 0..x.nrows() {
            out[(i, d - 1)] = res[(i, 0)];
        }
        Ok(DataMatrix::from_mat_unchecked(out))
    }

    fn inverse(&self, r: &DataMatrix) -> Result<DataMatrix> {
        r.check_cols(self.dim())?;
        let d = self.dim();
        let last = r.mat().subcols(d - 1, 1).to_owned();
        Ok(self.unwind(r.mat(), d - 1, last))
    }

    /// The stage-`k` residual is set to zero (its training mean), so every
    /// kept stage contributes its polynomial prediction.
    fn inverse_truncated(&self, leading: &DataMatrix) -> Result<DataMatrix> {
        let k = leading.ncols();
        let d = self.dim();
        check_k(k, d)?;
        if k == d {
            return self.inverse(leading);
        }
        Ok(self.unwind(leading.mat(), k, Mat::zeros(leading.nrows(), d - k)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pca::PcaModel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn mse(a: &DataMatrix, b: &DataMatrix) -> f64 {
        let mut s = 0.0;
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                s += (a.get(i, j) - b.get(i, j)).powi(2);
            }
        }
        s / (a.nrows() * a.ncols()) as f64
    }

    fn curved(n: usize, d: usize, seed: u64) -> DataMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let t: f64 = rng.random_range(-2.0..2.0);
                (0..d)
                    .map(|j| t.powi(j as i32 + 1) / (j + 1) as f64 + 0.05 * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        DataMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn parabola_is_captured_by_first_stage() {
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|i| {
                let t = -1.0 + 2.0 * i as f64 / 199.0;
                vec![t, t * t]
            })
            .collect();
        let x = DataMatrix::from_rows(&rows).unwrap();
        let m = PpaModel::fit(&x, 2).unwrap();
        let r = m.forward(&x).unwrap();
        assert!(r.column(1).iter().all(|v| v.abs() < 1e-10));
        assert!(m.truncate_reconstruct(&x, 1).unwrap().max_abs_diff(&x) < 1e-10);
    }

    #[test]
    fn stage_orthogonality() {
        let m = PpaModel::fit(&curved(300, 5, 1), 3).unwrap();
        for s in m.stages() {
            let e = Mat::from_fn(1, s.e.len(), |_, j| s.e[j]);
            let ee = matmul_new(s.e_perp.as_ref(), e.transpose());
            assert!(ee.col(0).iter().all(|v| v.abs() < 1e-10));
            let g = matmul_new(s.e_perp.as_ref(), s.e_perp.transpose());
            for i in 0..g.nrows() {
                for j in 0..g.ncols() {
                    let t = if i == j { 1.0 } else { 0.0 };
                    assert!((g[(i, j)] - t).abs() < 1e-10);
                }
            }
            let norm: f64 = s.e.iter().map(|v| v * v).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip() {
        let x = curved(250, 4, 2);
        let m = PpaModel::fit(&x, 3).unwrap();
        let r = m.forward(&x).unwrap();
        assert!(m.inverse(&r).unwrap().max_abs_diff(&x) < 1e-8);
        assert!(m.truncate_reconstruct(&x, 4).unwrap().max_abs_diff(&x) < 1e-8);
    }

    #[test]
    fn never_worse_than_pca_on_training_data() {
        for (seed, degree) in [(3, 1), (4, 2), (5, 3), (6, 5)] {
            let x = curved(300, 4, seed);
            let ppa = PpaModel::fit(&x, degree).unwrap();
            let pca = PcaModel::fit(&x).unwrap();
            for k in 1..=4 {
                let e_ppa = mse(&ppa.truncate_reconstruct(&x, k).unwrap(), &x);
                let e_pca = mse(&pca.truncate_reconstruct(&x, k).unwrap(), &x);
                assert!(e_ppa <= e_pca * (1.0 + 1e-10) + 1e-15, "k={k}: {e_ppa} > {e_pca}");
                if degree == 1 {
                    assert!((e_ppa - e_pca).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn gaussian_close_to_pca() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<Vec<f64>> = (0..2000)
            .map(|_| (0..4).map(|j| (4 - j) as f64 * rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let x = DataMatrix::from_rows(&rows).unwrap();
        let ppa = PpaModel::fit(&x, 3).unwrap();
        let pca = PcaModel::fit(&x).unwrap();
        for k in 1..4 {
            let a = mse(&ppa.truncate_reconstruct(&x, k).unwrap(), &x);
            let b = mse(&pca.truncate_reconstruct(&x, k).unwrap(), &x);
            assert!((a - b).abs() <= 0.1 * b);
        }
    }

    #[test]
    fn secondary_curves_are_translates() {
        let x = curved(400, 3, 7);
        let m = PpaModel::fit(&x, 3).unwrap();
        let v: Vec<f64> = (0..9).map(|i| -0.5 + i as f64 / 8.0).collect();
        let line = |a1: f64| {
            let rows: Vec<Vec<f64>> = v.iter().map(|&a2| vec![a1, a2]).collect();
            m.inverse_truncated(&DataMatrix::from_rows(&rows).unwrap()).unwrap()
        };
        let (p, q) = (line(-1.0), line(1.5));
        for i in 0..v.len() {
            for j in 0..3 {
                let dp = p.get(i, j) - p.get(0, j);
                let dq = q.get(i, j) - q.get(0, j);
                assert!((dp - dq).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn degenerate_inputs() {
        let x = curved(3, 3, 1);
        assert!(PpaModel::fit(&x, 3).is_err());
        assert!(PpaModel::fit(&x, 0).is_err());
        let one = DataMatrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(PpaModel::fit(&one, 1).is_err());
        // repeated alpha values force a lower degree
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![(i % 2) as f64, 0.0]).collect();
        let m = PpaModel::fit(&DataMatrix::from_rows(&rows).unwrap(), 4).unwrap();
        assert!(m.stages()[0].degree() < 4);
        let big = curved(50, 3, 2);
        let m = PpaModel::fit(&big, 2).unwrap();
        assert!(m.forward(&curved(5, 2, 1)).is_err());
    }
}
