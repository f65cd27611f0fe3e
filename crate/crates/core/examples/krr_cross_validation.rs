//! Kernel ridge regression on a 1-D sine: grid search over kernel width and
//! ridge, then out-of-sample predictions.

use drr::krr::{cross_validate_krr, median_pairwise_distance, KrrModel};
use drr::KrrSettings;
use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> drr::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 200;
    let z = Mat::<f64>::from_fn(n, 1, |_, _| rng.random_range(-3.0..3.0));
    let t: Vec<f64> = (0..n).map(|i| z[(i, 0)].sin() + 0.1 * rng.random_range(-1.0..1.0)).collect();

    let settings = KrrSettings::default();
    let median = median_pairwise_distance(z.as_ref(), settings.cv_max, settings.seed);
    let sigmas: Vec<f64> = settings.sigma_multipliers.iter().map(|m| m * median).collect();
    let cv = cross_validate_krr(z.as_ref(), &t, &sigmas, &settings.gammas, settings.folds, settings.seed)?;
    println!("median distance {median:.3}; chosen sigma {:.3}, gamma {:e}, CV MSE {:.4}", cv.sigma, cv.gamma, cv.cv_mse);

    let model = KrrModel::fit(z.as_ref(), &t, cv.sigma, cv.gamma)?;
    let q = Mat::from_fn(7, 1, |i, _| -3.0 + i as f64);
    let pred = model.predict(q.as_ref())?;
    for (i, p) in pred.iter().enumerate() {
        println!("f({:+.0}) = {p:+.3}   sin = {:+.3}", q[(i, 0)], q[(i, 0)].sin());
    }
    Ok(())
}
