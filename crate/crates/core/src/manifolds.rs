//! Curved, noisy 2-D manifolds in 3-D with optional tilt, and the latent
//! grid metrics used to compare PCA, PPA and DRR on them.
//!
//! The surface is `g(u, v)`: `u` is the angle along a backbone circle of
//! radius `R1` in the `z = 0` plane; `v` is the angle along a secondary arc
//! of radius `R2` that starts on the backbone and lives in the backbone's
//! normal plane. With `tilt != 0` that normal frame is rotated about the
//! backbone tangent by `tilt * u`, so the secondary arcs turn as `u` grows.

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::DataMatrix;
use crate::drr::DrrConfig;
use crate::error::{DrrError, Result};
use crate::persistence::Model;
use crate::transform::{check_k, InvertibleTransform, Method};

pub const GRID_U: usize = 17;
pub const GRID_V: usize = 13;

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldSpec {
    pub n_samples: usize,
    /// Radians of secondary-arc rotation per radian of backbone angle.
    pub tilt: f64,
    pub noise_std: f64,
    pub r1: f64,
    pub r2: f64,
    /// Backbone angle range.
    pub u_range: (f64, f64),
    /// Secondary arc angle range.
    pub v_range: (f64, f64),
    pub seed: u64,
}

impl Default for ManifoldSpec {
    fn default() -> Self {
        Self {
            n_samples: 10_000,
            tilt: 0.0,
            noise_std: 0.05,
            r1: 1.0,
            r2: 0.6,
            u_range: (-0.5 * std::f64::consts::PI, 0.5 * std::f64::consts::PI),
            v_range: (0.0, 0.5 * std::f64::consts::PI),
            seed: 0,
        }
    }
}

/// Tilt used for the "difficult" manifold.
pub const DEFAULT_TILT: f64 = 0.9;

impl ManifoldSpec {
    pub fn easy(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn tilted(seed: u64) -> Self {
        Self {
            seed,
            tilt: DEFAULT_TILT,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok_range = |r: (f64, f64)| r.0.is_finite() && r.1.is_finite() && r.0 < r.1;
        if self.n_samples == 0 {
            return Err(DrrError::InvalidParameter("n_samples must be at least 1".into()));
        }
        if !(self.r1 > self.r2 && self.r2 > 0.0 && self.r1.is_finite()) {
            return Err(DrrError::InvalidParameter(format!(
                "radii must satisfy R1 > R2 > 0, got R1={}, R2={}",
                self.r1, self.r2
            )));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) || !self.tilt.is_finite() {
            return Err(DrrError::InvalidParameter("noise_std must be >= 0 and tilt finite".into()));
        }
        if !ok_range(self.u_range) || !ok_range(self.v_range) {
            return Err(DrrError::InvalidParameter("latent ranges must be finite with min < max".into()));
        }
        Ok(())
    }

    /// Noise-free embedding `g(u, v)`.
    pub fn embed(&self, u: f64, v: f64) -> [f64; 3] {
        let (su, cu) = u.sin_cos();
        let c = [self.r1 * cu, self.r1 * su, 0.0];
        let n = [cu, su, 0.0];
        let b = [0.0, 0.0, 1.0];
        let (n2, b2) = rotate_frame(n, b, self.tilt * u);
        let (sv, cv) = v.sin_cos();
        std::array::from_fn(|i| c[i] + self.r2 * ((cv - 1.0) * n2[i] + sv * b2[i]))
    }
}

/// Rotates the orthonormal pair `(n, b)` within its own plane, i.e. about
/// the backbone tangent, by `angle`.
fn rotate_frame(n: [f64; 3], b: [f64; 3], angle: f64) -> ([f64; 3], [f64; 3]) {
    let (s, c) = angle.sin_cos();
    let n2 = std::array::from_fn(|i| c * n[i] + s * b[i]);
    let b2 = std::array::from_fn(|i| -s * n[i] + c * b[i]);
    (n2, b2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentGrid {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

impl LatentGrid {
    /// Evenly spaced 17 x 13 grid over the manifold's latent ranges.
    pub fn for_spec(spec: &ManifoldSpec) -> Self {
        Self::with_size(spec, GRID_U, GRID_V)
    }

    pub fn with_size(spec: &ManifoldSpec, nu: usize, nv: usize) -> Self {
        Self {
            u: linspace(spec.u_range.0, spec.u_range.1, nu),
            v: linspace(spec.v_range.0, spec.v_range.1, nv),
        }
    }

    pub fn len(&self) -> usize {
        self.u.len() * self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Node `(j, l)` sits at row `j * v.len() + l`.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.u.iter().flat_map(move |&u| self.v.iter().map(move |&v| (u, v)))
    }
}

/// Samples `spec.n_samples` noisy points; returns `(X, latent)` with latent
/// columns `(u, v)`.
pub fn generate_manifold(spec: &ManifoldSpec) -> Result<(DataMatrix, DataMatrix)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_std).expect("validated noise std");
    let n = spec.n_samples;
    let mut x = Mat::<f64>::zeros(n, 3);
    let mut lat = Mat::<f64>::zeros(n, 2);
    for i in 0..n {
        let u = rng.random_range(spec.u_range.0..spec.u_range.1);
        let v = rng.random_range(spec.v_range.0..spec.v_range.1);
        let p = spec.embed(u, v);
        for j in 0..3 {
            x[(i, j)] = p[j] + if spec.noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        }
        lat[(i, 0)] = u;
        lat[(i, 1)] = v;
    }
    Ok((DataMatrix::from_mat_unchecked(x), DataMatrix::from_mat_unchecked(lat)))
}

/// Noise-free images of the grid nodes.
pub fn grid_points(spec: &ManifoldSpec, grid: &LatentGrid) -> DataMatrix {
    let rows: Vec<f64> = grid.nodes().flat_map(|(u, v)| spec.embed(u, v)).collect();
    DataMatrix::from_mat_unchecked(Mat::from_fn(grid.len(), 3, |i, j| rows[3 * i + j]))
}

fn mean_sq_dist(a: &DataMatrix, b: &DataMatrix) -> f64 {
    let mut s = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            s += (a.get(i, j) - b.get(i, j)).powi(2);
        }
    }
    s / a.nrows() as f64
}

/// Mean squared distance between the grid points and their reconstruction
/// from the leading `k` transform coordinates.
pub fn mse_dr(model: &dyn InvertibleTransform, grid_x: &DataMatrix, k: usize) -> Result<f64> {
    let rec = model.truncate_reconstruct(grid_x, k)?;
    Ok(mean_sq_dist(&rec, grid_x))
}

/// Per-axis affine map `(offset_u, gain_u, offset_v, gain_v)` from latent
/// values to transform coordinates 1 and 2.
type Affine = [f64; 4];

fn feature_error(
    model: &dyn InvertibleTransform,
    grid: &LatentGrid,
    truth: &DataMatrix,
    a: &Affine,
) -> Result<f64> {
    let coords: Vec<Vec<f64>> = grid
        .nodes()
        .map(|(u, v)| vec![a[0] + a[1] * u, a[2] + a[3] * v])
        .collect();
    let rec = model.inverse_truncated(&DataMatrix::from_rows(&coords)?)?;
    Ok(mean_sq_dist(&rec, truth))
}

/// Least-squares `y ~ offset + gain * x`.
fn affine_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let gain = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - gain * mx, gain)
}

/// Mean squared distance between the inverted latent grid and the true
/// grid images, after choosing a per-axis affine scaling of the grid.
///
/// The scaling starts from the least-squares fit of the truth's transform
/// coordinates to the latent values and is then refined by a pattern search
/// on the input-domain error. The unscaled grid is also tried, so the result
/// never exceeds the unscaled error.
pub fn mse_features(model: &dyn InvertibleTransform, grid: &LatentGrid, truth: &DataMatrix) -> Result<f64> {
    if truth.nrows() != grid.len() {
        return Err(DrrError::DimensionMismatch {
            expected: grid.len(),
            got: truth.nrows(),
        });
    }
    check_k(2, model.dim())?;
    let r = model.forward(truth)?;
    let us: Vec<f64> = grid.nodes().map(|n| n.0).collect();
    let vs: Vec<f64> = grid.nodes().map(|n| n.1).collect();
    let (o1, g1) = affine_fit(&us, &r.column(0));
    let (o2, g2) = affine_fit(&vs, &r.column(1));
    let mut best = [o1, g1, o2, g2];
    let mut best_err = feature_error(model, grid, truth, &best)?;

    let spread = |c: Vec<f64>| {
        let (lo, hi) = c.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, &v| (a.0.min(v), a.1.max(v)));
        (hi - lo).max(1e-12)
    };
    let (s1, s2) = (spread(r.column(0)), spread(r.column(1)));
    let mut step = [0.05 * s1, 0.05 * g1.abs().max(1e-12), 0.05 * s2, 0.05 * g2.abs().max(1e-12)];
    for _ in 0..100 {
        let mut improved = false;
        for p in 0..4 {
            for sign in [1.0, -1.0] {
                let mut cand = best;
                cand[p] += sign * step[p];
                let e = feature_error(model, grid, truth, &cand)?;
                if e < best_err {
                    best = cand;
                    best_err = e;
                    improved = true;
                }
            }
        }
        if !improved {
            step.iter_mut().for_each(|s| *s *= 0.5);
            if step[1] < 1e-4 * g1.abs().max(1e-12) && step[3] < 1e-4 * g2.abs().max(1e-12) {
                break;
            }
        }
    }
    let unscaled = feature_error(model, grid, truth, &[0.0, 1.0, 0.0, 1.0])?;
    Ok(best_err.min(unscaled))
}

/// One method on one manifold realization.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub tilt: f64,
    pub method: Method,
    pub seed: u64,
    pub mse_dr: f64,
    pub mse_f: Option<f64>,
    /// Relative to PCA on the untilted manifold of the same seed (= 100).
    pub rel_mse_dr: f64,
    pub rel_mse_f: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSettings {
    pub methods: Vec<Method>,
    pub drr: DrrConfig,
    pub ppa_degree: usize,
    /// Also compute the (slower) feature-grid error.
    pub features: bool,
}

/// Fits every method on the untilted manifold and, when `template.tilt` is
/// nonzero, on the tilted one, for each seed. The seed drives both the
/// sampling and the DRR cross-validation.
pub fn benchmark(template: &ManifoldSpec, seeds: &[u64], settings: &BenchmarkSettings) -> Result<Vec<BenchmarkRow>> {
    template.validate()?;
    let mut tilts = vec![0.0];
    if template.tilt != 0.0 {
        tilts.push(template.tilt);
    }
    let mut rows = Vec::new();
    for &seed in seeds {
        let mut drr = settings.drr.clone();
        drr.krr.seed = seed;
        let mut reference: Option<(f64, Option<f64>)> = None;
        for &tilt in &tilts {
            let spec = ManifoldSpec {
                tilt,
                seed,
                ..template.clone()
            };
            let (x, _) = generate_manifold(&spec)?;
            let grid = LatentGrid::for_spec(&spec);
            let truth = grid_points(&spec, &grid);
            let evaluate = |method: Method| -> Result<(f64, Option<f64>)> {
                let m = Model::fit(method, &x, &drr, settings.ppa_degree)?;
                let f = if settings.features {
                    Some(mse_features(&m, &grid, &truth)?)
                } else {
                    None
                };
                Ok((mse_dr(&m, &truth, 2)?, f))
            };
            if reference.is_none() {
                reference = Some(evaluate(Method::Pca)?);
            }
            let (ref_dr, ref_f) = reference.expect("set above");
            for &method in &settings.methods {
                let (dr, f) = if tilt == 0.0 && method == Method::Pca {
                    (ref_dr, ref_f)
                } else {
                    evaluate(method)?
                };
                log::info!("seed {seed} tilt {tilt} {method}: mse_dr {dr:.4e}");
                rows.push(BenchmarkRow {
                    tilt,
                    method,
                    seed,
                    mse_dr: dr,
                    mse_f: f,
                    rel_mse_dr: 100.0 * dr / ref_dr,
                    rel_mse_f: f.zip(ref_f).map(|(a, b)| 100.0 * a / b),
                });
            }
        }
    }
    Ok(rows)
}

/// Mean relative MSE_DR of `method` at `tilt` over the rows present.
pub fn mean_relative_mse_dr(rows: &[BenchmarkRow], method: Method, tilt: f64) -> Option<f64> {
    let v: Vec<f64> = rows
        .iter()
        .filter(|r| r.method == method && r.tilt == tilt)
        .map(|r| r.rel_mse_dr)
        .collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}
