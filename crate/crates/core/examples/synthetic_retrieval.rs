//! Retrieval of hidden parameters from the first k features of a 40-band
//! synthetic signal. Features past the largest k never matter, so DRR skips
//! regressing them.

use drr::eval::{retrieval_curve, SyntheticRetrieval};
use drr::{DrrConfig, DrrModel, PcaModel};

fn main() -> drr::Result<()> {
    let task = SyntheticRetrieval {
        n_train: 2000,
        n_test: 2000,
        ..SyntheticRetrieval::default()
    };
    let data = task.generate()?;
    let ks: Vec<usize> = (1..=8).collect();
    let cfg = DrrConfig {
        last_residualized: Some(8),
        ..DrrConfig::default()
    };
    let train = (&data.x_train, &data.y_train);
    let test = (&data.x_test, &data.y_test);
    let pca = retrieval_curve(&PcaModel::fit(&data.x_train)?, train, test, &ks)?;
    let drr = retrieval_curve(&DrrModel::fit(&data.x_train, &cfg)?, train, test, &ks)?;
    println!(" k   MAE(PCA)   MAE(DRR)");
    for ((k, p), (_, d)) in pca.iter().zip(&drr) {
        println!("{k:2}   {p:8.4}   {d:8.4}");
    }
    Ok(())
}
