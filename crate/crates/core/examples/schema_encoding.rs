//! Declaring a schema, encoding raw rows, rounding translated points and
//! the binned cost between them.

use globe_ce::gce::{cost, round_encoding};
use globe_ce::schema::{FeatureSchema, FeatureSpec, RawValue};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let schema = FeatureSchema::new(vec![
        FeatureSpec::categorical("housing", ["rent", "own", "free"]),
        FeatureSpec::continuous("savings", 0.0, 20.0).with_bins(10),
        FeatureSpec::continuous("age", 18.0, 75.0).immutable(),
    ])?;
    let x = schema.encode(&[
        RawValue::Category("rent".into()),
        RawValue::Number(3.2),
        RawValue::Number(41.0),
    ])?;
    println!("encoded: {x:?}");

    let delta = [0.0, 0.7, 0.2, 5.1, 0.0];
    for k in [0.5, 1.0, 2.0, 4.0] {
        let moved: Vec<f64> = x.iter().zip(&delta).map(|(a, d)| a + k * d).collect();
        let cf = round_encoding(&moved, &schema)?;
        println!(
            "k = {k}: {:?}, cost {}",
            schema.decode(&cf)?,
            cost(&x, &cf, &schema)?
        );
    }
    println!("{}", schema.to_json());
    Ok(())
}
