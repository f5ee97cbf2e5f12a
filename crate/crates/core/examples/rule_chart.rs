//! Categorical rules of a single translation: per-origin lower bounds, the
//! activation sequence, and the rules in force at a few scalars.

use globe_ce::gce::Translation;
use globe_ce::rules::{extract_rules, lower_bounds, rules_sequence};
use globe_ce::schema::{FeatureSchema, FeatureSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let schema = FeatureSchema::new(vec![FeatureSpec::categorical(
        "employment",
        ["none", "short", "medium", "long"],
    )])?;
    let t = Translation::manual(vec![-1.0, 0.0, 0.5, 2.0]);

    println!("lower bounds: {:?}", lower_bounds(&t.delta));
    for a in rules_sequence(&t, &schema)? {
        let f = schema.feature(a.feature);
        let v = f.values().unwrap();
        println!(
            "k > {:.3}: {} -> {}",
            a.threshold, v[a.origin], v[a.then_value]
        );
    }
    for k in [0.5, 0.75, 1.0, 3.0] {
        let rules = extract_rules(&t, k, &schema)?;
        for r in rules.iter().filter(|r| !r.is_empty()) {
            println!(
                "k = {k}: {}  |  {}",
                r.render_listed(&schema),
                r.render_negated(&schema)
            );
        }
        if rules.iter().all(|r| r.is_empty()) {
            println!("k = {k}: no rule");
        }
    }
    Ok(())
}
