//! The DRR map has a unit Jacobian determinant everywhere. Compare the
//! closed-form Jacobian with central finite differences at a few points.

use drr::{DataMatrix, DrrConfig, DrrModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> drr::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    // a twisted ribbon in 3-D
    let rows: Vec<Vec<f64>> = (0..600)
        .map(|_| {
            let (a, b): (f64, f64) = (rng.random_range(-2.0..2.0), rng.random_range(-0.5..0.5));
            vec![a, b * a.cos(), b * a.sin() + 0.3 * a * a]
        })
        .collect();
    let x = DataMatrix::from_rows(&rows)?;
    let model = DrrModel::fit(&x, &DrrConfig::default())?;

    println!("   point   det(J analytic)   det(J fd)   max |J_a - J_fd|");
    for i in (0..600).step_by(120) {
        let p = x.row(i);
        let ja = model.jacobian_analytic(&p)?;
        let jf = model.jacobian_fd(&p, 1e-5)?;
        let diff = (0..3)
            .flat_map(|r| (0..3).map(move |c| (r, c)))
            .map(|(r, c)| (ja[(r, c)] - jf[(r, c)]).abs())
            .fold(0.0, f64::max);
        println!("{i:8}   {:15.12}   {:9.6}   {diff:.2e}", ja.determinant(), jf.determinant());
    }
    Ok(())
}
