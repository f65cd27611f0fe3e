//! Kernel ridge regression with the squared-exponential kernel
//! `k(a, b) = exp(-|a - b|^2 / (2 sigma^2))`, solved in dual form, plus
//! seeded k-fold grid search over `(sigma, gamma)`.

use faer::{Mat, MatRef};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{DrrError, Result};
use crate::linalg::{matmul_new, spd_solve, squared_distances};

/// Rows per block when evaluating predictions, to bound the kernel buffer.
const PREDICT_BLOCK: usize = 1024;

fn row_major(z: MatRef<'_, f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(z.nrows() * z.ncols());
    for i in 0..z.nrows() {
        for j in 0..z.ncols() {
            out.push(z[(i, j)]);
        }
    }
    out
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(DrrError::InvalidParameter(format!(
            "kernel length-scale must be positive and finite, got {sigma}"
        )));
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(DrrError::InvalidParameter(format!(
            "ridge must be non-negative and finite, got {gamma}"
        )));
    }
    Ok(())
}

fn gaussian_in_place(d2: &mut Mat<f64>, sigma: f64) {
    let s = -0.5 / (sigma * sigma);
    for j in 0..d2.ncols() {
        for i in 0..d2.nrows() {
            d2[(i, j)] = (d2[(i, j)] * s).exp();
        }
    }
}

/// `K[l, m] = exp(-|z1_l - z2_m|^2 / (2 sigma^2))`.
pub fn kernel_matrix(z1: MatRef<'_, f64>, z2: MatRef<'_, f64>, sigma: f64) -> Result<Mat<f64>> {
    check_sigma(sigma)?;
    if z1.ncols() != z2.ncols() {
        return Err(DrrError::DimensionMismatch {
            expected: z1.ncols(),
            got: z2.ncols(),
        });
    }
    let p = z1.ncols();
    if p == 0 {
        return Err(DrrError::InvalidParameter("kernel inputs need at least one column".into()));
    }
    let mut k = squared_distances(&row_major(z1), &row_major(z2), p);
    gaussian_in_place(&mut k, sigma);
    Ok(k)
}

/// Training inputs (row-major), dual weights and hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct KrrModel {
    inputs: Vec<f64>,
    p: usize,
    beta: Vec<f64>,
    sigma: f64,
    gamma: f64,
    jitter: f64,
}

impl KrrModel {
    /// Solves `(K + gamma I) beta = t`.
    pub fn fit(z: MatRef<'_, f64>, t: &[f64], sigma: f64, gamma: f64) -> Result<Self> {
        Self::fit_row_major(row_major(z), z.ncols(), t, sigma, gamma)
    }

    pub(crate) fn fit_row_major(
        inputs: Vec<f64>,
        p: usize,
        t: &[f64],
        sigma: f64,
        gamma: f64,
    ) -> Result<Self> {
        check_sigma(sigma)?;
        check_gamma(gamma)?;
        if p == 0 || inputs.is_empty() || inputs.len() % p != 0 {
            return Err(DrrError::InvalidParameter("empty regression inputs".into()));
        }
        let m = inputs.len() / p;
        if t.len() != m {
            return Err(DrrError::InvalidParameter(format!(
                "{} targets for {m} inputs",
                t.len()
            )));
        }
        if inputs.iter().chain(t).any(|v| !v.is_finite()) {
            return Err(DrrError::InvalidParameter("non-finite regression data".into()));
        }
        let mut k = squared_distances(&inputs, &inputs, p);
        for i in 0..m {
            k[(i, i)] = 0.0;
        }
        gaussian_in_place(&mut k, sigma);
        let rhs = Mat::from_fn(m, 1, |i, _| t[i]);
        let (beta, jitter) = solve_regularized(&mut k, gamma, rhs.as_ref(), sigma)?;
        Ok(Self {
            inputs,
            p,
            beta: beta.col(0).iter().copied().collect(),
            sigma,
            gamma,
            jitter,
        })
    }

    pub(crate) fn from_parts(
        inputs: Vec<f64>,
        p: usize,
        beta: Vec<f64>,
        sigma: f64,
        gamma: f64,
        jitter: f64,
    ) -> Result<Self> {
        check_sigma(sigma)?;
        if p == 0 || inputs.len() != beta.len() * p || beta.is_empty() {
            return Err(DrrError::InvalidParameter("inconsistent kernel model arrays".into()));
        }
        Ok(Self {
            inputs,
            p,
            beta,
            sigma,
            gamma,
            jitter,
        })
    }

    /// A model predicting 0 everywhere (the infinite-ridge limit).
    pub fn zero(p: usize, sigma: f64) -> Self {
        Self {
            inputs: vec![0.0; p],
            p,
            beta: vec![0.0],
            sigma,
            gamma: f64::INFINITY,
            jitter: 0.0,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.p
    }

    pub fn n_train(&self) -> usize {
        self.beta.len()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Diagonal jitter that had to be added to factorize the system (0 if none).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn train_inputs(&self) -> Mat<f64> {
        Mat::from_fn(self.n_train(), self.p, |i, j| self.inputs[i * self.p + j])
    }

    pub(crate) fn train_inputs_row_major(&self) -> &[f64] {
        &self.inputs
    }

    pub fn predict(&self, z: MatRef<'_, f64>) -> Result<Vec<f64>> {
        if z.ncols() != self.p {
            return Err(DrrError::DimensionMismatch {
                expected: self.p,
                got: z.ncols(),
            });
        }
        Ok(self.predict_row_major(&row_major(z)))
    }

    /// Predictions for a row-major query buffer with `input_dim()` columns.
    pub(crate) fn predict_row_major(&self, q: &[f64]) -> Vec<f64> {
        let p = self.p;
        let mut out = Vec::with_capacity(q.len() / p);
        let beta = Mat::from_fn(self.beta.len(), 1, |i, _| self.beta[i]);
        for block in q.chunks(PREDICT_BLOCK * p) {
            let mut k = squared_distances(block, &self.inputs, p);
            gaussian_in_place(&mut k, self.sigma);
            let y = matmul_new(k.as_ref(), beta.as_ref());
            out.extend(y.col(0).iter().copied());
        }
        out
    }

    /// Gradient of the prediction with respect to the query point.
    pub fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let p = self.p;
        let inv = 1.0 / (self.sigma * self.sigma);
        let mut g = vec![0.0; p];
        for (row, b) in self.inputs.chunks_exact(p).zip(&self.beta) {
            let d2: f64 = row.iter().zip(z).map(|(a, q)| (q - a) * (q - a)).sum();
            let w = b * (-0.5 * d2 * inv).exp() * inv;
            for k in 0..p {
                g[k] -= w * (z[k] - row[k]);
            }
        }
        g
    }
}

/// Solves `(K + gamma I) X = rhs` in place of `k`'s diagonal, with a single
/// jitter retry. Returns the solution and the jitter used.
fn solve_regularized(
    k: &mut Mat<f64>,
    gamma: f64,
    rhs: MatRef<'_, f64>,
    sigma: f64,
) -> Result<(Mat<f64>, f64)> {
    let m = k.nrows();
    for i in 0..m {
        k[(i, i)] += gamma;
    }
    if let Some(x) = spd_solve(k.as_ref(), rhs) {
        return Ok((x, 0.0));
    }
    let trace: f64 = (0..m).map(|i| k[(i, i)] - gamma).sum();
    let jitter = 1e-10 * trace / m as f64;
    log::warn!(
        "kernel system not positive definite (sigma={sigma}, gamma={gamma}); retrying with jitter {jitter:e}"
    );
    for i in 0..m {
        k[(i, i)] += jitter;
    }
    match spd_solve(k.as_ref(), rhs) {
        Some(x) => Ok((x, jitter)),
        None => Err(DrrError::SingularKernel { sigma, gamma }),
    }
}

/// Several targets sharing one kernel, one `(sigma, gamma)` and one
/// factorization.
#[derive(Debug, Clone, PartialEq)]
pub struct KrrMultiModel {
    inputs: Vec<f64>,
    p: usize,
    beta: Mat<f64>,
    sigma: f64,
    gamma: f64,
}

impl KrrMultiModel {
    pub fn fit(z: MatRef<'_, f64>, t: MatRef<'_, f64>, sigma: f64, gamma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        check_gamma(gamma)?;
        if t.nrows() != z.nrows() {
            return Err(DrrError::InvalidParameter(format!(
                "{} target rows for {} inputs",
                t.nrows(),
                z.nrows()
            )));
        }
        let p = z.ncols();
        let inputs = row_major(z);
        let mut k = squared_distances(&inputs, &inputs, p);
        for i in 0..z.nrows() {
            k[(i, i)] = 0.0;
        }
        gaussian_in_place(&mut k, sigma);
        let (beta, _) = solve_regularized(&mut k, gamma, t, sigma)?;
        Ok(Self {
            inputs,
            p,
            beta,
            sigma,
            gamma,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn predict(&self, z: MatRef<'_, f64>) -> Result<Mat<f64>> {
        if z.ncols() != self.p {
            return Err(DrrError::DimensionMismatch {
                expected: self.p,
                got: z.ncols(),
            });
        }
        let mut k = squared_distances(&row_major(z), &self.inputs, self.p);
        gaussian_in_place(&mut k, self.sigma);
        Ok(matmul_new(k.as_ref(), self.beta.as_ref()))
    }
}

/// Outcome of a grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub sigma: f64,
    pub gamma: f64,
    pub cv_mse: f64,
    /// `(sigma, gamma, mse)` for every grid point; infinite where the
    /// system could not be factorized.
    pub table: Vec<(f64, f64, f64)>,
}

/// Seeded k-fold cross-validation over `sigma_grid x gamma_grid`.
///
/// Folds come from one shuffled permutation of `0..N`. Ties in out-of-fold
/// MSE go to the larger gamma, then the larger sigma.
pub fn cross_validate_krr(
    z: MatRef<'_, f64>,
    t: &[f64],
    sigma_grid: &[f64],
    gamma_grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<CvResult> {
    cross_validate_row_major(&row_major(z), z.ncols(), t, sigma_grid, gamma_grid, folds, seed)
}

pub(crate) fn cross_validate_row_major(
    z: &[f64],
    p: usize,
    t: &[f64],
    sigma_grid: &[f64],
    gamma_grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<CvResult> {
    if sigma_grid.is_empty() || gamma_grid.is_empty() {
        return Err(DrrError::InvalidParameter("empty hyperparameter grid".into()));
    }
    sigma_grid.iter().try_for_each(|&s| check_sigma(s))?;
    gamma_grid.iter().try_for_each(|&g| check_gamma(g))?;
    let n = t.len();
    if p == 0 || z.len() != n * p {
        return Err(DrrError::InvalidParameter("inputs and targets disagree in length".into()));
    }
    if folds < 2 {
        return Err(DrrError::InvalidParameter(format!("need at least 2 folds, got {folds}")));
    }
    if folds > n {
        return Err(DrrError::InvalidParameter(format!("{folds} folds for {n} samples")));
    }

    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0usize; n];
    for (pos, &i) in perm.iter().enumerate() {
        fold_of[i] = pos % folds;
    }
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..folds)
        .map(|f| {
            let tr = (0..n).filter(|&i| fold_of[i] != f).collect();
            let te = (0..n).filter(|&i| fold_of[i] == f).collect();
            (tr, te)
        })
        .collect();

    let mut d2 = squared_distances(z, z, p);
    for i in 0..n {
        d2[(i, i)] = 0.0;
    }

    let per_sigma: Vec<Vec<f64>> = sigma_grid
        .par_iter()
        .map(|&sigma| {
            let mut k = d2.clone();
            gaussian_in_place(&mut k, sigma);
            let mut sse = vec![0.0f64; gamma_grid.len()];
            for (tr, te) in &splits {
                let ktr = Mat::from_fn(tr.len(), tr.len(), |a, b| k[(tr[a], tr[b])]);
                let kte = Mat::from_fn(te.len(), tr.len(), |a, b| k[(te[a], tr[b])]);
                let ttr = Mat::from_fn(tr.len(), 1, |a, _| t[tr[a]]);
                for (g, &gamma) in gamma_grid.iter().enumerate() {
                    if !sse[g].is_finite() {
                        continue;
                    }
                    let mut a = ktr.clone();
                    for i in 0..a.nrows() {
                        a[(i, i)] += gamma;
                    }
                    match spd_solve(a.as_ref(), ttr.as_ref()) {
                        Some(beta) => {
                            let pred = matmul_new(kte.as_ref(), beta.as_ref());
                            sse[g] += te
                                .iter()
                                .enumerate()
                                .map(|(r, &i)| (pred[(r, 0)] - t[i]).powi(2))
                                .sum::<f64>();
                        }
                        None => sse[g] = f64::INFINITY,
                    }
                }
            }
            sse.into_iter().map(|s| s / n as f64).collect()
        })
        .collect();

    let mut table = Vec::with_capacity(sigma_grid.len() * gamma_grid.len());
    for (s, &sigma) in sigma_grid.iter().enumerate() {
        for (g, &gamma) in gamma_grid.iter().enumerate() {
            table.push((sigma, gamma, per_sigma[s][g]));
        }
    }

    // Visit candidates from strongest to weakest smoothing so that only a
    // strictly better score displaces the incumbent.
    let mut order: Vec<usize> = (0..table.len()).collect();
    order.sort_by(|&a, &b| {
        let (sa, ga, _) = table[a];
        let (sb, gb, _) = table[b];
        gb.total_cmp(&ga).then(sb.total_cmp(&sa))
    });
    let mut best: Option<usize> = None;
    for idx in order {
        let mse = table[idx].2;
        if !mse.is_finite() {
            continue;
        }
        match best {
            None => best = Some(idx),
            Some(b) => {
                let cur = table[b].2;
                if mse < cur - 1e-12 * cur.abs() {
                    best = Some(idx);
                }
            }
        }
    }
    let b = best.ok_or(DrrError::SingularKernel {
        sigma: sigma_grid[0],
        gamma: gamma_grid[0],
    })?;
    let (sigma, gamma, cv_mse) = table[b];
    Ok(CvResult {
        sigma,
        gamma,
        cv_mse,
        table,
    })
}

/// Median pairwise Euclidean distance over at most `max_rows` rows
/// (seeded subsample). Falls back to 1 for degenerate inputs.
pub fn median_pairwise_distance(z: MatRef<'_, f64>, max_rows: usize, seed: u64) -> f64 {
    median_distance_row_major(&row_major(z), z.ncols(), max_rows, seed)
}

pub(crate) fn median_distance_row_major(z: &[f64], p: usize, max_rows: usize, seed: u64) -> f64 {
    let n = z.len() / p;
    let idx: Vec<usize> = if n > max_rows {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        perm.truncate(max_rows);
        perm
    } else {
        (0..n).collect()
    };
    let mut d = Vec::with_capacity(idx.len() * idx.len().saturating_sub(1) / 2);
    for a in 0..idx.len() {
        let ra = &z[idx[a] * p..(idx[a] + 1) * p];
        for &ib in &idx[a + 1..] {
            let rb = &z[ib * p..(ib + 1) * p];
            d.push(ra.iter().zip(rb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    if *m > 0.0 && m.is_finite() {
        *m
    } else {
        1.0
    }
}

/// Hyperparameter search and sample-size caps for a cross-validated fit.
#[derive(Debug, Clone, PartialEq)]
pub struct KrrSettings {
    /// Multiples of the median pairwise distance tried as sigma.
    pub sigma_multipliers: Vec<f64>,
    pub gammas: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
    /// Fit on a seeded subsample when N exceeds this.
    pub max_train: usize,
    /// Cross-validate on at most this many of the fit rows.
    pub cv_max: usize,
}

impl Default for KrrSettings {
    fn default() -> Self {
        Self {
            sigma_multipliers: vec![0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0],
            gammas: vec![1e-6, 1e-4, 1e-2, 1.0, 1e2],
            folds: 5,
            seed: 0,
            max_train: 2000,
            cv_max: 1000,
        }
    }
}

impl KrrSettings {
    pub fn validate(&self) -> Result<()> {
        if self.sigma_multipliers.is_empty() || self.gammas.is_empty() {
            return Err(DrrError::InvalidParameter("empty hyperparameter grid".into()));
        }
        if self.sigma_multipliers.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(DrrError::InvalidParameter("sigma multipliers must be positive".into()));
        }
        self.gammas.iter().try_for_each(|&g| check_gamma(g))?;
        if self.folds < 2 {
            return Err(DrrError::InvalidParameter("folds must be at least 2".into()));
        }
        if self.max_train == 0 || self.cv_max < self.folds {
            return Err(DrrError::InvalidParameter(
                "max_train must be positive and cv_max at least the fold count".into(),
            ));
        }
        Ok(())
    }
}

/// Selects `(sigma, gamma)` by cross-validation and fits the final model,
/// honouring the subsample caps. `fixed = (multiplier, gamma)` skips the
/// search: sigma becomes `multiplier` times the median distance.
/// Also returns the median distance.
pub(crate) fn fit_with_cv(
    z: &[f64],
    p: usize,
    t: &[f64],
    settings: &KrrSettings,
    seed: u64,
    fixed: Option<(f64, f64)>,
) -> Result<(KrrModel, Option<CvResult>, f64)> {
    let n = t.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    if n > settings.max_train || n > settings.cv_max {
        perm.shuffle(&mut rng);
    }
    let fit_idx: Vec<usize> = perm.iter().copied().take(settings.max_train).collect();
    let gather = |idx: &[usize]| -> (Vec<f64>, Vec<f64>) {
        let mut zz = Vec::with_capacity(idx.len() * p);
        let mut tt = Vec::with_capacity(idx.len());
        for &i in idx {
            zz.extend_from_slice(&z[i * p..(i + 1) * p]);
            tt.push(t[i]);
        }
        (zz, tt)
    };
    let (zf, tf) = gather(&fit_idx);
    let median = median_distance_row_major(&zf, p, 1000, seed ^ 0x9e37_79b9_7f4a_7c15);

    let (sigma, gamma, cv) = match fixed {
        Some((mult, gamma)) => (mult * median, gamma, None),
        None => {
            let cv_idx: Vec<usize> = fit_idx.iter().copied().take(settings.cv_max).collect();
            let (zc, tc) = gather(&cv_idx);
            let sigmas: Vec<f64> = settings.sigma_multipliers.iter().map(|m| m * median).collect();
            let folds = settings.folds.min(cv_idx.len());
            let cv = cross_validate_row_major(&zc, p, &tc, &sigmas, &settings.gammas, folds, seed)?;
            (cv.sigma, cv.gamma, Some(cv))
        }
    };
    let model = KrrModel::fit_row_major(zf, p, &tf, sigma, gamma)?;
    Ok((model, cv, median))
}
