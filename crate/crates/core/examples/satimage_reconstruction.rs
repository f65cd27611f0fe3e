//! Reconstruction error on the Statlog Landsat Satimage data (36 features).
//!
//! Usage: `cargo run --example satimage_reconstruction -- <dir>` where `<dir>`
//! holds `sat.trn` and `sat.tst` (space-separated, label last). Defaults to
//! `$SATIMAGE_DIR`, then `data/satimage`.

use std::path::PathBuf;

use drr::dataset::{load_labeled_csv, CsvOptions, LabelColumn};
use drr::eval::reconstruction_curve;
use drr::{DrrConfig, DrrModel, PcaModel, PpaModel};

fn main() -> drr::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .or_else(|| std::env::var_os("SATIMAGE_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data/satimage"));
    let (trn, tst) = (dir.join("sat.trn"), dir.join("sat.tst"));
    if !trn.is_file() || !tst.is_file() {
        eprintln!("sat.trn / sat.tst not found in {}", dir.display());
        return Ok(());
    }
    let opts = CsvOptions {
        has_header: false,
        delimiter: b' ',
    };
    let train = load_labeled_csv(&trn, &opts, LabelColumn::Last)?.data;
    let test = load_labeled_csv(&tst, &opts, LabelColumn::Last)?.data;

    let pca = reconstruction_curve(&PcaModel::fit(&train)?, &test)?;
    let ppa = reconstruction_curve(&PpaModel::fit(&train, drr::ppa::DEFAULT_DEGREE)?, &test)?;
    let drr = reconstruction_curve(&DrrModel::fit(&train, &DrrConfig::default())?, &test)?;
    let (rp, rd) = (ppa.relative_mae(&pca)?, drr.relative_mae(&pca)?);
    println!(" k   PCA MAE   PPA %   DRR %");
    for k in 0..pca.len() {
        println!("{:2}   {:7.3}   {:5.1}   {:5.1}", k + 1, pca.mae[k], rp[k], rd[k]);
    }
    Ok(())
}
