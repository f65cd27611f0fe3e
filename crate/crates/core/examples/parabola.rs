//! One curved dimension: DRR flattens a noisy parabola into a single
//! coordinate, where PCA needs two.

use drr::eval::reconstruction_curve;
use drr::{DataMatrix, DrrConfig, DrrModel, PcaModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> drr::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rows: Vec<Vec<f64>> = (0..500)
        .map(|_| {
            let t: f64 = rng.random_range(-1.0..1.0);
            vec![t, t * t + 0.01 * rng.random_range(-1.0..1.0)]
        })
        .collect();
    let x = DataMatrix::from_rows(&rows)?;

    let drr = DrrModel::fit(&x, &DrrConfig::default())?;
    let pca = PcaModel::fit(&x)?;

    let y = drr.forward(&x)?;
    let v = y.column_variances();
    println!("DRR coordinate variances: {:.4} {:.6}", v[0], v[1]);

    let (cd, cp) = (reconstruction_curve(&drr, &x)?, reconstruction_curve(&pca, &x)?);
    println!("MSE from one coordinate: PCA {:.2e}, DRR {:.2e}", cp.mse[0], cd.mse[0]);

    let back = drr.inverse(&y)?;
    println!("round-trip max error: {:.1e}", back.max_abs_diff(&x));
    Ok(())
}
