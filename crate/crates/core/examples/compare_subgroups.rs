//! Recourse gap between two subgroups where one sits twice as far from the
//! decision boundary as the other.

use globe_ce::dataset::{slice_subgroup, SubgroupDescriptor};
use globe_ce::gce::ScalarGrid;
use globe_ce::generation::{sample_fixed_cost, GenerationConfig};
use globe_ce::report::{compare_subgroups, CompareOptions};
use globe_ce::synthetic::margin_gap;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (data, model) = margin_gap(200, 3);
    let schema = data.schema();
    let a = slice_subgroup(&data, &SubgroupDescriptor::new(schema, [("group", "A")])?)?;
    let b = slice_subgroup(&data, &SubgroupDescriptor::new(schema, [("group", "B")])?)?;

    let cfg = GenerationConfig {
        n_s: 100,
        n_f: 1,
        c: 1.0,
        seed: 3,
        ..Default::default()
    };
    let pool = sample_fixed_cost(schema, &cfg)?;
    let grid = [ScalarGrid::linear(15.0, 301)?];
    let rep = compare_subgroups(
        ("A", &a),
        ("B", &b),
        &pool,
        &model,
        &grid,
        CompareOptions::default(),
    )?;
    for side in [&rep.a, &rep.b] {
        println!(
            "{}: coverage {:.1}%, average cost {:?}, median {:?}",
            side.label,
            100.0 * side.native.coverage,
            side.native.avg_cost,
            side.native.median_cost
        );
    }
    println!("gaps (B - A): {:?}", rep.native_gaps);
    println!("both under A's translation: {:?}", rep.gaps_under_a);
    Ok(())
}
