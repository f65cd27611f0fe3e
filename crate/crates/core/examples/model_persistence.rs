//! Save a fitted model with metadata, load it back, and check that the loaded
//! model transforms bit-for-bit identically.

use drr::persistence::{load_model, save_model, Model};
use drr::{DataMatrix, DrrConfig, InvertibleTransform, Method};

fn main() -> drr::Result<()> {
    let rows: Vec<Vec<f64>> = (0..300)
        .map(|i| {
            let t = i as f64 / 150.0 - 1.0;
            vec![t, t.sin() * 2.0, t * t * t]
        })
        .collect();
    let x = DataMatrix::from_rows(&rows)?;
    let model = Model::fit(Method::Drr, &x, &DrrConfig::default(), drr::ppa::DEFAULT_DEGREE)?;

    let path = std::env::temp_dir().join("drr_example_model.drr");
    save_model(&path, &model, &[("source".to_string(), "model_persistence example".to_string())])?;
    let size = std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
    println!("wrote {} ({size} bytes)", path.display());

    let file = load_model(&path)?;
    println!("method {}, dim {}, metadata {:?}", file.model.method(), file.model.dim(), file.metadata);
    let same = file.model.forward(&x)? == model.forward(&x)?;
    println!("loaded model reproduces the transform exactly: {same}");
    std::fs::remove_file(&path).ok();
    Ok(())
}
