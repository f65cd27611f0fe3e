//! Orthonormal PCA: stage one of DRR and PPA, and the rigid baseline.

use faer::Mat;

use crate::dataset::DataMatrix;
use crate::error::Result;
use crate::linalg::{covariance_of_centered, matmul_new, symmetric_eigen_desc};
use crate::transform::{check_k, zero_pad, InvertibleTransform, Method};

/// Mean, orthonormal basis (rows are principal directions) and the
/// descending covariance eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: Vec<f64>,
    basis: Mat<f64>,
    eigenvalues: Vec<f64>,
}

impl PcaModel {
    /// Fits on the sample covariance (N-1 normalization; N when N = 1).
    pub fn fit(x: &DataMatrix) -> Result<Self> {
        let mean = x.column_means();
        let xc = Mat::from_fn(x.nrows(), x.ncols(), |i, j| x.get(i, j) - mean[j]);
        let cov = covariance_of_centered(xc.as_ref());
        let (mut eigenvalues, basis) = symmetric_eigen_desc(cov.as_ref())?;
        for v in &mut eigenvalues {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(Self {
            mean,
            basis,
            eigenvalues,
        })
    }

    pub(crate) fn from_parts(mean: Vec<f64>, basis: Mat<f64>, eigenvalues: Vec<f64>) -> Self {
        Self {
            mean,
            basis,
            eigenvalues,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// d x d, row `i` is the i-th principal direction.
    pub fn basis(&self) -> &Mat<f64> {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Scores `(X - mean) V^T`.
    pub fn scores(&self, x: &DataMatrix) -> Result<DataMatrix> {
        x.check_cols(self.dim())?;
        let xc = Mat::from_fn(x.nrows(), x.ncols(), |i, j| x.get(i, j) - self.mean[j]);
        Ok(DataMatrix::from_mat_unchecked(matmul_new(
            xc.as_ref(),
            self.basis.transpose(),
        )))
    }

    /// `A V + mean`.
    pub fn reconstruct(&self, a: &DataMatrix) -> Result<DataMatrix> {
        a.check_cols(self.dim())?;
        let mut x = matmul_new(a.mat().as_ref(), self.basis.as_ref());
        for j in 0..x.ncols() {
            for i in 0..x.nrows() {
                x[(i, j)] += self.mean[j];
            }
        }
        Ok(DataMatrix::from_mat_unchecked(x))
    }

    /// Max-abs deviation of `V V^T` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let g = matmul_new(self.basis.as_ref(), self.basis.transpose());
        let mut worst = 0.0f64;
        for j in 0..g.ncols() {
            for i in 0..g.nrows() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }
}

impl InvertibleTransform for PcaModel {
    fn method(&self) -> Method {
        Method::Pca
    }

    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn forward(&self, x: &DataMatrix) -> Result<DataMatrix> {
        self.scores(x)
    }

    fn inverse(&self, r: &DataMatrix) -> Result<DataMatrix> {
        self.reconstruct(r)
    }

    fn inverse_truncated(&self, leading: &DataMatrix) -> Result<DataMatrix> {
        self.reconstruct(&zero_pad(leading, self.dim())?)
    }

    fn truncate_reconstruct(&self, x: &DataMatrix, k: usize) -> Result<DataMatrix> {
        check_k(k, self.dim())?;
        let mut a = self.scores(x)?.into_mat();
        for j in k..a.ncols() {
            for i in 0..a.nrows() {
                a[(i, j)] = 0.0;
            }
        }
        self.reconstruct(&DataMatrix::from_mat_unchecked(a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn line_data() -> DataMatrix {
        DataMatrix::from_rows(&[vec![-1.0, -2.0], vec![0.0, 0.0], vec![1.0, 2.0]]).unwrap()
    }

    fn gaussian(n: usize, scales: &[f64], seed: u64) -> DataMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                scales
                    .iter()
                    .map(|s| s * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        DataMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn rank_one_closed_form() {
        // columns (t, 2t), t in {-1, 0, 1}: var(t) = 1, cov = [[1,2],[2,4]]
        let m = PcaModel::fit(&line_data()).unwrap();
        assert!((m.eigenvalues()[0] - 5.0).abs() < 1e-12);
        assert!(m.eigenvalues()[1].abs() < 1e-12);
        let s5 = 5f64.sqrt();
        assert!((m.basis()[(0, 0)] - 1.0 / s5).abs() < 1e-12);
        assert!((m.basis()[(0, 1)] - 2.0 / s5).abs() < 1e-12);
        let rec = m.truncate_reconstruct(&line_data(), 1).unwrap();
        assert!(rec.max_abs_diff(&line_data()) < 1e-12);
    }

    #[test]
    fn axis_aligned_gives_permutation() {
        let x = gaussian(4000, &[1.0, 2.0], 3);
        let m = PcaModel::fit(&x).unwrap();
        let v = m.basis();
        assert!((v[(0, 1)].abs() - 1.0).abs() < 1e-2);
        assert!((v[(1, 0)].abs() - 1.0).abs() < 1e-2);
        // sign convention
        for r in 0..2 {
            let row = [v[(r, 0)], v[(r, 1)]];
            let big = if row[0].abs() > row[1].abs() { row[0] } else { row[1] };
            assert!(big > 0.0);
        }
        let rec = m.truncate_reconstruct(&x, 1).unwrap();
        let mean0 = m.mean()[0];
        for i in 0..50 {
            assert!((rec.get(i, 0) - mean0).abs() < 0.05 * 4.0);
        }
    }

    #[test]
    fn forward_examples() {
        let x = gaussian(200, &[3.0, 1.0, 0.5], 5);
        let m = PcaModel::fit(&x).unwrap();
        let mean = DataMatrix::from_rows(&[m.mean().to_vec()]).unwrap();
        let a = m.scores(&mean).unwrap();
        assert!(a.row(0).iter().all(|v| v.abs() < 1e-12));
        let along: Vec<f64> = (0..3).map(|j| m.mean()[j] + m.basis()[(0, j)]).collect();
        let a = m.scores(&DataMatrix::from_rows(&[along]).unwrap()).unwrap();
        assert!((a.get(0, 0) - 1.0).abs() < 1e-12);
        assert!(a.get(0, 1).abs() < 1e-12 && a.get(0, 2).abs() < 1e-12);
        let back = m.reconstruct(&m.scores(&x).unwrap()).unwrap();
        assert!(back.max_abs_diff(&x) < 1e-10);
    }

    #[test]
    fn isotropic_eigenvalues_similar() {
        let x = gaussian(20000, &[1.0, 1.0, 1.0], 11);
        let m = PcaModel::fit(&x).unwrap();
        let e = m.eigenvalues();
        assert!(e[0] / e[2] < 1.1, "{e:?}");
    }

    #[test]
    fn truncation_checks() {
        let x = gaussian(50, &[2.0, 1.0], 1);
        let m = PcaModel::fit(&x).unwrap();
        assert!(m.truncate_reconstruct(&x, 0).is_err());
        assert!(m.truncate_reconstruct(&x, 3).is_err());
        assert!(m.truncate_reconstruct(&x, 2).unwrap().max_abs_diff(&x) < 1e-10);
        let bad = gaussian(5, &[1.0, 1.0, 1.0], 2);
        assert!(m.scores(&bad).is_err());
    }

    #[test]
    fn single_row_has_zero_spectrum() {
        let x = DataMatrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        let m = PcaModel::fit(&x).unwrap();
        assert!(m.eigenvalues().iter().all(|&e| e == 0.0));
        assert!(m.orthonormality_error() < 1e-10);
    }
}
