//! Closed-form minimum-cost moves for a linear SVM, per input and shared.

use std::sync::Arc;

use globe_ce::dataset::Dataset;
use globe_ce::generation::{svm_optimal_delta, svm_shared_direction};
use globe_ce::predictors::{Model, Predictor};
use globe_ce::schema::{FeatureSchema, FeatureSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let schema = Arc::new(FeatureSchema::new(vec![
        FeatureSpec::continuous("income", 0.0, 10.0),
        FeatureSpec::continuous("debt", 0.0, 10.0),
    ])?);
    let (w, b) = (vec![1.0, -0.5], -4.0);
    let model = Model::linear_svm(w.clone(), b);
    let costs = [1.0, 2.0];
    let rows = vec![vec![1.0, 2.0], vec![2.5, 1.0], vec![0.5, 6.0]];

    for x in &rows {
        let (t, c) = svm_optimal_delta(&w, b, &costs, x)?;
        let moved: Vec<f64> = x.iter().zip(&t.delta).map(|(a, d)| a + d).collect();
        println!(
            "{x:?}: delta {:?}, cost {c:.3}, score after {:.2e}",
            t.delta,
            model.score(&moved)
        );
    }
    let inputs = Dataset::from_rows(schema, rows)?;
    let shared = svm_shared_direction(&w, b, &costs, &inputs)?;
    println!("shared direction {:?}", shared.delta);
    Ok(())
}
