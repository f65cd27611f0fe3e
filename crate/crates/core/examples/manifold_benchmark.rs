//! Curved-manifold benchmark at reduced size. Relative errors are against PCA
//! on the untilted manifold of the same seed (= 100).
//!
//! Pass a sample count as the first argument to change the size
//! (default 3000; the CLI's `benchmark-manifolds` uses 10^4 and 10 seeds).

use drr::manifolds::{benchmark, mean_relative_mse_dr, BenchmarkSettings, ManifoldSpec};
use drr::{DrrConfig, Method};

fn main() -> drr::Result<()> {
    let n = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(3000);
    let template = ManifoldSpec {
        n_samples: n,
        ..ManifoldSpec::tilted(0)
    };
    let methods = vec![Method::Pca, Method::Ppa, Method::Drr];
    let settings = BenchmarkSettings {
        methods: methods.clone(),
        drr: DrrConfig::default(),
        ppa_degree: drr::ppa::DEFAULT_DEGREE,
        features: true,
    };
    let rows = benchmark(&template, &[0, 1], &settings)?;
    println!("tilt method seed  MSE_DR(rel)  MSE_F(rel)");
    for r in &rows {
        println!(
            "{:4} {:6} {:4}  {:10.1}  {:10.1}",
            r.tilt,
            r.method,
            r.seed,
            r.rel_mse_dr,
            r.rel_mse_f.unwrap_or(f64::NAN)
        );
    }
    for tilt in [0.0, template.tilt] {
        let means: Vec<String> = methods
            .iter()
            .map(|&m| format!("{m} {:.1}", mean_relative_mse_dr(&rows, m, tilt).unwrap_or(f64::NAN)))
            .collect();
        println!("tilt {tilt}: mean relative MSE_DR: {}", means.join(", "));
    }
    Ok(())
}
