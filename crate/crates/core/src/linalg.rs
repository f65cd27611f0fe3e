//! Thin helpers over `faer` shared by the model modules.

use faer::linalg::matmul::matmul;
use faer::linalg::solvers::{Solve, SolveLstsq};
use faer::{Accum, Mat, MatRef, Par, Side};

use crate::error::{DrrError, Result};

/// Eigenpairs of a symmetric matrix sorted by descending eigenvalue.
/// Returned vectors are the rows of the second output; each row's
/// largest-magnitude entry is made positive.
pub(crate) fn symmetric_eigen_desc(a: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let d = a.nrows();
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| DrrError::LinearAlgebra(format!("eigendecomposition failed: {e:?}")))?;
    let s = evd.S();
    let u = evd.U();
    let mut values = Vec::with_capacity(d);
    let mut rows = Mat::<f64>::zeros(d, d);
    for (r, c) in (0..d).rev().enumerate() {
        values.push(s[c]);
        let mut best = 0usize;
        for k in 1..d {
            if u[(k, c)].abs() > u[(best, c)].abs() {
                best = k;
            }
        }
        let sign = if u[(best, c)] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..d {
            rows[(r, k)] = sign * u[(k, c)];
        }
    }
    Ok((values, rows))
}

/// Sample covariance of the columns of an already-centered matrix.
pub(crate) fn covariance_of_centered(xc: MatRef<'_, f64>) -> Mat<f64> {
    let n = xc.nrows();
    let d = xc.ncols();
    let mut cov = Mat::<f64>::zeros(d, d);
    matmul(cov.as_mut(), Accum::Replace, xc.transpose(), xc, 1.0, Par::Seq);
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    for j in 0..d {
        for i in 0..d {
            cov[(i, j)] /= denom;
        }
    }
    // exact symmetry
    for j in 0..d {
        for i in (j + 1)..d {
            let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    cov
}

pub(crate) fn matmul_new(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    let mut out = Mat::<f64>::zeros(a.nrows(), b.ncols());
    matmul(out.as_mut(), Accum::Replace, a, b, 1.0, Par::Seq);
    out
}

const DIRECT_DISTANCE_MAX_P: usize = 8;

/// Pairwise squared Euclidean distances between the rows of two row-major
/// buffers with `p` columns.
pub(crate) fn squared_distances(a: &[f64], b: &[f64], p: usize) -> Mat<f64> {
    let m1 = a.len() / p;
    let m2 = b.len() / p;
    if p <= DIRECT_DISTANCE_MAX_P {
        // gemm is slow for very thin operands
        return Mat::from_fn(m1, m2, |i, j| {
            let (x, y) = (&a[i * p..(i + 1) * p], &b[j * p..(j + 1) * p]);
            x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum()
        });
    }
    let am = MatRef::from_row_major_slice(a, m1, p);
    let bm = MatRef::from_row_major_slice(b, m2, p);
    let mut g = Mat::<f64>::zeros(m1, m2);
    matmul(g.as_mut(), Accum::Replace, am, bm.transpose(), -2.0, Par::Seq);
    let na: Vec<f64> = a.chunks_exact(p).map(|r| r.iter().map(|v| v * v).sum()).collect();
    let nb: Vec<f64> = b.chunks_exact(p).map(|r| r.iter().map(|v| v * v).sum()).collect();
    for j in 0..m2 {
        for i in 0..m1 {
            let v = g[(i, j)] + na[i] + nb[j];
            g[(i, j)] = if v > 0.0 { v } else { 0.0 };
        }
    }
    g
}

/// Solves `a x = b` for symmetric positive-definite `a` (multiple right-hand
/// sides) with one step of iterative refinement.
pub(crate) fn spd_solve(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Option<Mat<f64>> {
    let llt = a.llt(Side::Lower).ok()?;
    // reject numerically singular systems that factor only thanks to rounding
    let l = llt.L();
    let (lo, hi) = (0..l.nrows()).fold((f64::INFINITY, 0.0f64), |(lo, hi), i| {
        let v = l[(i, i)] * l[(i, i)];
        (lo.min(v), hi.max(v))
    });
    if !(lo > hi * f64::EPSILON * a.nrows() as f64) {
        return None;
    }
    let mut x = llt.solve(b);
    let mut r = b.to_owned();
    matmul(r.as_mut(), Accum::Add, a, x.as_ref(), -1.0, Par::Seq);
    let dx = llt.solve(r.as_ref());
    x += dx;
    if x.col_iter().all(|c| c.iter().all(|v| v.is_finite())) {
        Some(x)
    } else {
        None
    }
}

/// Least-squares solve of `a x ~ b` via Householder QR. Returns `None` when
/// `a` is numerically rank deficient.
pub(crate) fn lstsq_qr(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Option<Mat<f64>> {
    let qr = a.col_piv_qr();
    let r = qr.R();
    let k = r.nrows().min(r.ncols());
    if k == 0 {
        return None;
    }
    let lead = r[(0, 0)].abs();
    let tol = lead * 1e-12 * (a.nrows().max(a.ncols()) as f64);
    if lead == 0.0 || (0..k).any(|i| r[(i, i)].abs() <= tol) || a.nrows() < a.ncols() {
        return None;
    }
    Some(qr.solve_lstsq(b))
}

/// Minimum-norm least-squares solution via the SVD pseudo-inverse.
pub(crate) fn lstsq_pinv(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Result<Mat<f64>> {
    let svd = a
        .thin_svd()
        .map_err(|e| DrrError::LinearAlgebra(format!("SVD failed: {e:?}")))?;
    let pinv = svd.pseudoinverse();
    Ok(matmul_new(pinv.as_ref(), b))
}

/// Thin `Q` factor of `a` (orthonormal columns spanning its range).
pub(crate) fn orthonormal_columns(a: MatRef<'_, f64>) -> Mat<f64> {
    a.qr().compute_thin_Q()
}

#[cfg(test)]
pub(crate) fn determinant(a: MatRef<'_, f64>) -> f64 {
    a.determinant()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distances_match_direct_formula() {
        let a = [0.0, 0.0, 1.0, 2.0, -3.0, 0.5];
        let b = [1.0, 1.0, 0.0, 0.0];
        let d = squared_distances(&a, &b, 2);
        for i in 0..3 {
            for j in 0..2 {
                let direct: f64 = (0..2).map(|k| (a[i * 2 + k] - b[j * 2 + k]).powi(2)).sum();
                assert!((d[(i, j)] - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn direct_and_gemm_distances_agree() {
        let p = DIRECT_DISTANCE_MAX_P + 3;
        let a: Vec<f64> = (0..5 * p).map(|i| (i as f64 * 0.7).sin()).collect();
        let b: Vec<f64> = (0..4 * p).map(|i| (i as f64 * 0.3).cos()).collect();
        let d = squared_distances(&a, &b, p);
        for i in 0..5 {
            for j in 0..4 {
                let direct: f64 = (0..p).map(|k| (a[i * p + k] - b[j * p + k]).powi(2)).sum();
                assert!((d[(i, j)] - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn eigen_sorted_with_sign_convention() {
        let a = Mat::from_fn(2, 2, |i, j| [[1.0, 0.0], [0.0, 4.0]][i][j]);
        let (vals, rows) = symmetric_eigen_desc(a.as_ref()).unwrap();
        assert!((vals[0] - 4.0).abs() < 1e-12 && (vals[1] - 1.0).abs() < 1e-12);
        assert!((rows[(0, 1)] - 1.0).abs() < 1e-12);
        assert!((rows[(1, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_lstsq_falls_back() {
        let a = Mat::from_fn(4, 2, |i, _| i as f64);
        let b = Mat::from_fn(4, 1, |i, _| 2.0 * i as f64);
        assert!(lstsq_qr(a.as_ref(), b.as_ref()).is_none());
        let x = lstsq_pinv(a.as_ref(), b.as_ref()).unwrap();
        assert!((x[(0, 0)] - 1.0).abs() < 1e-10 && (x[(1, 0)] - 1.0).abs() < 1e-10);
    }
}
