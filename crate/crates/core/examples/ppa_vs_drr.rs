//! PPA models each secondary curve as a translate of one polynomial, so it is
//! exact on a parabolic cylinder but not once the curves rotate. DRR's
//! regressions see all leading scores and follow the rotation.

use drr::eval::reconstruction_curve;
use drr::{DataMatrix, DrrConfig, DrrModel, PcaModel, PpaModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sheet(twist: f64, seed: u64) -> drr::Result<DataMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..1500)
        .map(|_| {
            let (a, b): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let (s, c) = (twist * a).sin_cos();
            // parabola in b, rotated about the a axis by twist * a
            let (u, w) = (0.5 * b, 0.6 * b * b);
            vec![2.0 * a, c * u - s * w, s * u + c * w]
        })
        .collect();
    DataMatrix::from_rows(&rows)
}

fn main() -> drr::Result<()> {
    for twist in [0.0, 1.2] {
        let x = sheet(twist, 5)?;
        let pca = reconstruction_curve(&PcaModel::fit(&x)?, &x)?;
        let ppa = reconstruction_curve(&PpaModel::fit(&x, 2)?, &x)?;
        let drr = reconstruction_curve(&DrrModel::fit(&x, &DrrConfig::default())?, &x)?;
        println!("twist {twist}: MSE from 2 coordinates");
        println!("  PCA {:.2e}  PPA {:.2e}  DRR {:.2e}", pca.mse[1], ppa.mse[1], drr.mse[1]);
    }
    Ok(())
}
