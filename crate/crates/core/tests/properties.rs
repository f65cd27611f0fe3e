//! Randomized invariants across modules.

use drr::dataset::{center, parse_rows, split, write_csv, CsvOptions, LabeledDataset, SplitSpec, Targets};
use drr::eval::{classification_error, reconstruction_curve, LdaModel};
use drr::krr::{cross_validate_krr, kernel_matrix, KrrModel};
use drr::manifolds::{generate_manifold, mse_dr, ManifoldSpec};
use drr::persistence::{from_bytes, to_bytes};
use drr::{DataMatrix, DrrConfig, DrrModel, InvertibleTransform, KrrSettings, Model, PcaModel, PpaModel, RegressorKind};
use faer::{Mat, Side};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn matrix(n: usize, d: usize, seed: u64) -> DataMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scales: Vec<f64> = (0..d).map(|_| rng.random_range(0.2..3.0)).collect();
    let v: Vec<f64> = (0..n * d)
        .map(|i| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * scales[i % d]
        })
        .collect();
    DataMatrix::from_row_major(n, d, &v).unwrap()
}

/// Noisy quadratic dependence between the first coordinate and the rest.
fn bent(n: usize, d: usize, seed: u64) -> DataMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = Vec::with_capacity(n * d);
    for _ in 0..n {
        let a: f64 = rng.random_range(-2.0..2.0);
        v.push(a);
        for j in 1..d {
            let e: f64 = StandardNormal.sample(&mut rng);
            v.push(a * a / j as f64 - 1.0 + 0.1 * e);
        }
    }
    DataMatrix::from_row_major(n, d, &v).unwrap()
}

fn quick_drr() -> DrrConfig {
    DrrConfig {
        krr: KrrSettings {
            sigma_multipliers: vec![0.5, 1.0, 2.0],
            gammas: vec![1e-4, 1e-2, 1.0],
            folds: 3,
            cv_max: 150,
            ..KrrSettings::default()
        },
        ..DrrConfig::default()
    }
}

fn min_eigenvalue(m: &Mat<f64>) -> f64 {
    m.self_adjoint_eigenvalues(Side::Lower).unwrap().into_iter().fold(f64::INFINITY, f64::min)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn kernel_is_symmetric_psd(n in 1usize..120, p in 1usize..10, sigma in 0.05f64..5.0, seed in any::<u64>()) {
        let z = matrix(n, p, seed);
        let k = kernel_matrix(z.mat().as_ref(), z.mat().as_ref(), sigma).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert!((k[(i, j)] - k[(j, i)]).abs() <= 1e-14);
            }
        }
        prop_assert!(min_eigenvalue(&k) >= -1e-8);
    }

    #[test]
    fn training_error_grows_with_ridge(n in 10usize..80, seed in any::<u64>(), sigma in 0.3f64..3.0) {
        let z = matrix(n, 2, seed);
        let t: Vec<f64> = (0..n).map(|i| (z.get(i, 0) * 1.3).sin() + 0.3 * z.get(i, 1)).collect();
        let mut last = 0.0;
        for gamma in [1e-6, 1e-4, 1e-2, 1.0, 1e2] {
            let m = KrrModel::fit(z.mat().as_ref(), &t, sigma, gamma).unwrap();
            let pred = m.predict(z.mat().as_ref()).unwrap();
            let err = pred.iter().zip(&t).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64;
            prop_assert!(err >= last - 1e-10, "gamma {}: {} < {}", gamma, err, last);
            last = err;
        }
    }

    #[test]
    fn prediction_is_linear_in_targets(n in 5usize..60, seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let z = matrix(n, 3, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let t1: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t2: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mix: Vec<f64> = t1.iter().zip(&t2).map(|(x, y)| a * x + b * y).collect();
        let q = matrix(20, 3, seed ^ 2);
        let pred = |t: &[f64]| KrrModel::fit(z.mat().as_ref(), t, 1.0, 1e-2).unwrap().predict(q.mat().as_ref()).unwrap();
        let (p1, p2, pm) = (pred(&t1), pred(&t2), pred(&mix));
        for i in 0..20 {
            prop_assert!((pm[i] - (a * p1[i] + b * p2[i])).abs() < 1e-8);
        }
    }

    #[test]
    fn fit_residual_is_small(n in 1usize..80, seed in any::<u64>(), gamma in prop::sample::select(vec![1e-6, 1e-2, 1.0])) {
        let z = matrix(n, 2, seed);
        let t: Vec<f64> = (0..n).map(|i| z.get(i, 0).cos()).collect();
        let m = KrrModel::fit(z.mat().as_ref(), &t, 0.8, gamma).unwrap();
        let k = kernel_matrix(z.mat().as_ref(), z.mat().as_ref(), 0.8).unwrap();
        let tmax = t.iter().fold(1.0f64, |a, b| a.max(b.abs()));
        for i in 0..n {
            let r: f64 = (0..n).map(|j| k[(i, j)] * m.beta()[j]).sum::<f64>() + (gamma + m.jitter()) * m.beta()[i] - t[i];
            prop_assert!(r.abs() < 1e-8 * tmax, "row {} residual {}", i, r);
        }
    }

    #[test]
    fn cv_is_deterministic(n in 10usize..60, seed in any::<u64>()) {
        let z = matrix(n, 2, seed);
        let t: Vec<f64> = (0..n).map(|i| z.get(i, 0) * z.get(i, 1)).collect();
        let run = || cross_validate_krr(z.mat().as_ref(), &t, &[0.5, 1.0, 2.0], &[1e-4, 1e-2, 1.0], 3, seed).unwrap();
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn csv_round_trip_is_exact(n in 1usize..30, d in 1usize..6, seed in any::<u64>()) {
        let x = matrix(n, d, seed);
        let mut buf = Vec::new();
        write_csv(&mut buf, &x, None).unwrap();
        let (_, rows) = parse_rows(buf.as_slice(), &CsvOptions::default()).unwrap();
        prop_assert_eq!(DataMatrix::from_rows(&rows).unwrap(), x);
    }

    #[test]
    fn centering_is_undone_by_the_mean(n in 1usize..40, d in 1usize..6, seed in any::<u64>()) {
        let x = matrix(n, d, seed);
        let (c, mean) = center(&x);
        for i in 0..n {
            for j in 0..d {
                prop_assert!((c.get(i, j) + mean[j] - x.get(i, j)).abs() <= 4.0 * f64::EPSILON * x.get(i, j).abs().max(mean[j].abs()));
            }
        }
    }

    #[test]
    fn split_partitions_rows(n in 2usize..200, frac in 0.05f64..0.95, seed in any::<u64>()) {
        let spec = SplitSpec { train_fraction: frac, seed };
        let Ok((tr, te)) = spec.indices(n) else { return Ok(()) };
        prop_assert_eq!(tr.len(), (frac * n as f64).floor() as usize);
        let mut all: Vec<usize> = tr.iter().chain(&te).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn pca_invariants(n in 2usize..200, d in 1usize..8, seed in any::<u64>()) {
        let x = matrix(n, d, seed);
        let m = PcaModel::fit(&x).unwrap();
        prop_assert!(m.orthonormality_error() < 1e-10);
        let ev = m.eigenvalues();
        prop_assert!(ev.windows(2).all(|w| w[0] >= w[1]));
        let v = m.basis();
        for j in 0..d {
            let big = (0..d).map(|i| v[(j, i)]).fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            prop_assert!(big > 0.0);
        }
        let vars = m.scores(&x).unwrap().column_variances();
        prop_assert!(vars.windows(2).all(|w| w[0] >= w[1] - 1e-9 * vars[0].max(1.0)));
        // truncation MSE (per entry) is the tail eigenvalue sum, scaled by (N-1)/(N d)
        let curve = reconstruction_curve(&m, &x).unwrap();
        let scale = (n as f64 - 1.0) / (n * d) as f64;
        for k in 1..=d {
            let tail: f64 = ev[k..].iter().sum::<f64>() * scale;
            prop_assert!((curve.mse[k - 1] - tail).abs() <= 1e-8 * tail.max(ev[0] * scale));
        }
    }

    #[test]
    fn ppa_never_worse_than_pca(n in 20usize..200, d in 2usize..5, degree in 1usize..4, seed in any::<u64>()) {
        let x = bent(n, d, seed);
        let Ok(ppa) = PpaModel::fit(&x, degree) else { return Ok(()) };
        let pca = PcaModel::fit(&x).unwrap();
        let (cq, cp) = (reconstruction_curve(&ppa, &x).unwrap(), reconstruction_curve(&pca, &x).unwrap());
        for (q, p) in cq.mse.iter().zip(&cp.mse) {
            prop_assert!(q - p <= 1e-10 * cp.mse[0].max(f64::MIN_POSITIVE));
        }
        prop_assert!(ppa.inverse(&ppa.forward(&x).unwrap()).unwrap().max_abs_diff(&x) < 1e-8);
    }

    #[test]
    fn lda_error_ignores_label_names(n in 30usize..150, seed in any::<u64>()) {
        let x = matrix(n, 3, seed);
        let labels: Vec<usize> = (0..n).map(|i| usize::from(x.get(i, 0) > 0.0) + 2 * usize::from(x.get(i, 1) > 0.0)).collect();
        prop_assume!((0..4).all(|c| labels.iter().filter(|&&l| l == c).count() >= 2));
        let perm = [3usize, 1, 0, 2];
        let renamed: Vec<usize> = labels.iter().map(|&l| perm[l]).collect();
        let p1 = LdaModel::fit(&x, &labels, 1e-6).unwrap().predict(&x).unwrap();
        let p2 = LdaModel::fit(&x, &renamed, 1e-6).unwrap().predict(&x).unwrap();
        prop_assert_eq!(p1.iter().map(|&l| perm[l]).collect::<Vec<_>>(), p2.clone());
        prop_assert_eq!(classification_error(&p1, &labels).unwrap(), classification_error(&p2, &renamed).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn drr_forward_round_trip_and_bitwise_parallel(n in 30usize..200, d in 2usize..6, seed in any::<u64>()) {
        let x = bent(n, d, seed);
        let mut cfg = quick_drr();
        cfg.krr.seed = seed;
        let m = DrrModel::fit(&x, &cfg).unwrap();
        let r = m.forward(&x).unwrap();
        prop_assert_eq!(&r, &m.forward_sequential(&x).unwrap());
        prop_assert!(m.inverse(&r).unwrap().max_abs_diff(&x) < 1e-8);
        // energy compaction on the training set
        let (va, vy) = (m.pca().scores(&x).unwrap().column_variances(), r.column_variances());
        for i in 0..d {
            prop_assert!(vy[i] <= va[i] * 1.02 + 1e-12, "dim {}: {} > {}", i, vy[i], va[i]);
        }
    }

    #[test]
    fn linear_drr_is_pca(n in 10usize..300, d in 1usize..7, seed in any::<u64>()) {
        let x = bent(n, d, seed);
        let cfg = DrrConfig { regressor: RegressorKind::Linear, ..DrrConfig::default() };
        let m = DrrModel::fit(&x, &cfg).unwrap();
        prop_assert!(m.forward(&x).unwrap().max_abs_diff(&m.pca().scores(&x).unwrap()) < 1e-6);
    }

    #[test]
    fn persistence_is_bitwise(n in 20usize..120, d in 2usize..5, which in 0usize..3, seed in any::<u64>()) {
        let x = bent(n, d, seed);
        let model = match which {
            0 => Model::Pca(PcaModel::fit(&x).unwrap()),
            1 => Model::Ppa(PpaModel::fit(&x, 2).unwrap()),
            _ => Model::Drr(DrrModel::fit(&x, &quick_drr()).unwrap()),
        };
        let meta = vec![("seed".to_string(), seed.to_string())];
        let bytes = to_bytes(&model, &meta).unwrap();
        let back = from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back.metadata, &meta);
        prop_assert_eq!(to_bytes(&back.model, &back.metadata).unwrap(), bytes);
        prop_assert_eq!(back.model.forward(&x).unwrap(), model.forward(&x).unwrap());
    }

    #[test]
    fn manifold_generation_is_seeded(seed in any::<u64>(), tilt in 0.0f64..1.5) {
        let spec = ManifoldSpec { n_samples: 200, tilt, seed, ..ManifoldSpec::default() };
        prop_assert_eq!(generate_manifold(&spec).unwrap(), generate_manifold(&spec).unwrap());
        let (x, _) = generate_manifold(&spec).unwrap();
        let pca = PcaModel::fit(&x).unwrap();
        prop_assert!(mse_dr(&pca, &x, 1).unwrap() > 0.0);
        prop_assert!(mse_dr(&pca, &x, 3).unwrap() < 1e-20);
    }
}

#[test]
fn labeled_split_keeps_rows_aligned() {
    let x = matrix(50, 2, 9);
    let labels: Vec<usize> = (0..50).map(|i| i % 3).collect();
    let ds = LabeledDataset::new(
        DataMatrix::from_rows(&(0..50).map(|i| vec![i as f64, x.get(i, 1)]).collect::<Vec<_>>()).unwrap(),
        Targets::Classes { labels, classes: vec![0.0, 1.0, 2.0] },
    )
    .unwrap();
    let (tr, te) = split(&ds, &SplitSpec { train_fraction: 0.6, seed: 4 }).unwrap();
    for part in [tr, te] {
        let lab = part.class_labels().unwrap();
        for i in 0..part.len() {
            assert_eq!(part.data.get(i, 0) as usize % 3, lab[i]);
        }
    }
}
