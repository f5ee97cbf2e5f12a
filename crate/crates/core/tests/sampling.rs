use globe_ce::generation::{sample_fixed_cost, GenerationConfig};
use globe_ce::schema::{FeatureSchema, FeatureSpec};
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF};

const ALPHA: f64 = 1e-4;

fn schema() -> FeatureSchema {
    let mut specs: Vec<FeatureSpec> = (0..5)
        .map(|i| FeatureSpec::continuous(format!("x{i}"), 0.0, 10.0))
        .collect();
    specs.push(FeatureSpec::continuous("fixed", 0.0, 1.0).immutable());
    FeatureSchema::new(specs).unwrap()
}

fn pool(n_f: usize, seed: u64) -> Vec<Vec<f64>> {
    let cfg = GenerationConfig {
        n_s: 5000,
        n_f,
        seed,
        ..Default::default()
    };
    sample_fixed_cost(&schema(), &cfg)
        .unwrap()
        .into_iter()
        .map(|t| t.delta)
        .collect()
}

#[test]
fn touched_features_are_uniform_over_actionable_ones() {
    for (n_f, seed) in [(1, 3), (2, 4)] {
        let deltas = pool(n_f, seed);
        assert!(deltas.iter().all(|d| d[5] == 0.0));
        let mut counts = [0.0f64; 5];
        for d in &deltas {
            assert_eq!(d.iter().filter(|&&v| v != 0.0).count(), n_f);
            for (c, v) in counts.iter_mut().zip(d) {
                if *v != 0.0 {
                    *c += 1.0;
                }
            }
        }
        let expected = (deltas.len() * n_f) as f64 / 5.0;
        let chi2: f64 = counts
            .iter()
            .map(|c| (c - expected).powi(2) / expected)
            .sum();
        let p = 1.0 - ChiSquared::new(4.0).unwrap().cdf(chi2);
        assert!(p > ALPHA, "n_f = {n_f}: counts {counts:?}, p = {p}");
    }
}

#[test]
fn signs_are_balanced() {
    let deltas = pool(1, 9);
    let n = deltas.len() as u64;
    let positive = deltas.iter().filter(|d| d.iter().any(|&v| v > 0.0)).count() as u64;
    let b = Binomial::new(0.5, n).unwrap();
    let tail = b.cdf(positive.min(n - positive));
    assert!(2.0 * tail > ALPHA, "{positive} of {n} positive");
}
