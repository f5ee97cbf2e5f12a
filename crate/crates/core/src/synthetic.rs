//! Seeded synthetic datasets with known structure.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::Dataset;
use crate::predictors::Model;
use crate::schema::{FeatureSchema, FeatureSpec};

/// Labelled mixed dataset: `n_cat` four-valued categorical features
/// `c0..`, then `n_cont` continuous features `x0..` on `[0, 10]`.
///
/// Labels follow a noisy additive score, so a linear model fits them well.
pub fn mixed_benchmark(rows: usize, n_cat: usize, n_cont: usize, seed: u64) -> Dataset {
    let mut features: Vec<FeatureSpec> = (0..n_cat)
        .map(|i| FeatureSpec::categorical(format!("c{i}"), ["v0", "v1", "v2", "v3"]))
        .collect();
    features.extend((0..n_cont).map(|i| FeatureSpec::continuous(format!("x{i}"), 0.0, 10.0)));
    let schema = Arc::new(FeatureSchema::new(features).expect("valid schema"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let effects: Vec<[f64; 4]> = (0..n_cat)
        .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
        .collect();
    let slopes: Vec<f64> = (0..n_cont).map(|_| rng.random_range(0.1..0.4)).collect();
    let noise = Normal::new(0.0, 0.5).expect("finite");
    let mut data = Vec::with_capacity(rows);
    let mut scores = Vec::with_capacity(rows);
    for _ in 0..rows {
        let mut row = Vec::with_capacity(schema.dim());
        let mut s = 0.0;
        for e in &effects {
            let v = rng.random_range(0..4);
            let mut block = [0.0; 4];
            block[v] = 1.0;
            row.extend(block);
            s += e[v];
        }
        for &w in &slopes {
            let x: f64 = rng.random_range(0.0..10.0);
            row.push(x);
            s += w * (x - 5.0);
        }
        scores.push(s + noise.sample(&mut rng));
        data.push(row);
    }
    // threshold at the 60th percentile: a healthy affected set
    let mut sorted = scores.clone();
    sorted.sort_by(f64::total_cmp);
    let cut = sorted[(rows * 3) / 5];
    let labels = scores.iter().map(|&s| u8::from(s > cut)).collect();
    Dataset::from_rows(schema, data)
        .expect("rows match schema")
        .with_labels(labels)
        .expect("one label per row")
}

/// Two subgroups below the boundary `x0 = 150` of a linear model, with every
/// member of `B` twice as far from it as its paired member of `A`.
///
/// Features: `group` (immutable, `A`/`B`), `x0` and `x1` on `[0, 200]` with 20
/// bins. Row `i` of `A` sits at distance `d_i` in `[40, 50]`; row `i` of `B`
/// at `2 d_i`. Only `x0` enters the model.
pub fn margin_gap(per_group: usize, seed: u64) -> (Dataset, Model) {
    let schema = Arc::new(
        FeatureSchema::new(vec![
            FeatureSpec::categorical("group", ["A", "B"]).immutable(),
            FeatureSpec::continuous("x0", 0.0, 200.0).with_bins(20),
            FeatureSpec::continuous("x1", 0.0, 200.0).with_bins(20),
        ])
        .expect("valid schema"),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(2 * per_group);
    let mut far = Vec::with_capacity(per_group);
    for _ in 0..per_group {
        let d: f64 = rng.random_range(40.0..50.0);
        let x1: f64 = rng.random_range(0.0..200.0);
        rows.push(vec![1.0, 0.0, 150.0 - d, x1]);
        far.push(vec![0.0, 1.0, 150.0 - 2.0 * d, x1]);
    }
    rows.extend(far);
    let ds = Dataset::from_rows(schema, rows).expect("rows match schema");
    (ds, Model::logistic(vec![0.0, 0.0, 1.0, 0.0], -150.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictors::Predictor;

    #[test]
    fn benchmark_shape_and_determinism() {
        let a = mixed_benchmark(200, 6, 4, 1);
        assert_eq!(a.len(), 200);
        assert_eq!(a.schema().len(), 10);
        assert_eq!(a.dim(), 28);
        let ones = a.labels().unwrap().iter().filter(|&&l| l == 1).count();
        assert!((70..=90).contains(&ones));
        assert_eq!(a.as_matrix(), mixed_benchmark(200, 6, 4, 1).as_matrix());
    }

    #[test]
    fn margin_gap_geometry() {
        let (ds, model) = margin_gap(10, 5);
        for i in 0..10 {
            let (a, b) = (ds.row(i), ds.row(10 + i));
            assert_eq!(model.predict(a), 0);
            assert_eq!(model.predict(b), 0);
            assert!(((150.0 - b[2]) - 2.0 * (150.0 - a[2])).abs() < 1e-9);
        }
    }
}
