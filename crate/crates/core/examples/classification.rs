//! LDA on data reconstructed from k coordinates. The class is the sign of
//! `a * b` and a third band carries `a * b` itself: PCA drops that band at
//! k = 2, while DRR predicts it from the two leading scores, which hands the
//! linear classifier the feature it needs.

use drr::dataset::{split, LabeledDataset, SplitSpec, Targets};
use drr::eval::{classification_curve, DEFAULT_LDA_RIDGE};
use drr::{DataMatrix, DrrConfig, DrrModel, InvertibleTransform, PcaModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> drr::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut rows, mut labels) = (Vec::new(), Vec::new());
    for _ in 0..1200 {
        let (a, b): (f64, f64) = (rng.random_range(-2.0..2.0), rng.random_range(-1.5..1.5));
        let e: f64 = rng.random_range(-0.05..0.05);
        rows.push(vec![a, b, 0.5 * a * b + e, 0.1 * rng.random_range(-1.0..1.0)]);
        labels.push(usize::from(a * b > 0.0));
    }
    let ds = LabeledDataset::new(
        DataMatrix::from_rows(&rows)?,
        Targets::Classes {
            labels,
            classes: vec![0.0, 1.0],
        },
    )?;
    let (train, test) = split(&ds, &SplitSpec { train_fraction: 0.5, seed: 0 })?;
    let (ltr, lte) = (train.class_labels().unwrap_or(&[]), test.class_labels().unwrap_or(&[]));

    let ks = [1, 2, 3, 4];
    let models: [(&str, Box<dyn InvertibleTransform>); 2] = [
        ("PCA", Box::new(PcaModel::fit(&train.data)?)),
        ("DRR", Box::new(DrrModel::fit(&train.data, &DrrConfig::default())?)),
    ];
    println!("test error by number of kept coordinates");
    for (name, m) in &models {
        let curve = classification_curve(m.as_ref(), (&train.data, ltr), (&test.data, lte), &ks, DEFAULT_LDA_RIDGE)?;
        let errs: Vec<String> = curve.iter().map(|(k, e)| format!("k={k}: {e:.3}")).collect();
        println!("{name}  {}", errs.join("  "));
    }
    Ok(())
}
