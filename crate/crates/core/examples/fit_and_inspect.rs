//! Fits every native model kind on the toy data and prints its summary and
//! held-out accuracy.

use std::path::Path;

use globe_ce::dataset::{load_dataset, split};
use globe_ce::predictors::{fit, FitParams, ModelKind, Predictor};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let toy = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy");
    let data = load_dataset(toy.join("data.csv"), toy.join("schema.json"))?;
    let (train, test) = split(&data, 0.8, 1)?;
    for kind in [
        ModelKind::Logistic,
        ModelKind::LinearSvm,
        ModelKind::Mlp,
        ModelKind::TreeEnsemble,
    ] {
        let model = fit(kind, &train, train.labels().unwrap(), &FitParams::default())?;
        let hits = test
            .rows()
            .zip(test.labels().unwrap())
            .filter(|(r, &y)| model.predict(r) == y)
            .count();
        println!(
            "== {} (test accuracy {:.3})",
            kind.as_str(),
            hits as f64 / test.len() as f64
        );
        println!("{}", model.describe(Some(data.schema())));
    }
    Ok(())
}
