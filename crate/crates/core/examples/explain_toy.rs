//! Explains the bundled loan model: samples a pool, keeps the best
//! translation, and prints its coverage profile and cumulative rules chart.
//!
//!     cargo run --release --example explain_toy

use std::path::Path;

use globe_ce::dataset::{load_dataset, select_affected};
use globe_ce::gce::{first_flips, CubeOptions, GceStats, ScalarGrid};
use globe_ce::generation::{greedy_select, sample_fixed_cost, GenerationConfig};
use globe_ce::predictors::Model;
use globe_ce::report::{min_cost_histogram, profile_series};
use globe_ce::rules::{build_crc, CrcMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let toy = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy");
    let data = load_dataset(toy.join("data.csv"), toy.join("schema.json"))?;
    let model = Model::load(toy.join("model.json"))?;
    let affected = select_affected(&data, &model)?;
    println!("{} of {} rows are denied", affected.len(), data.len());

    let cfg = GenerationConfig {
        n_s: 200,
        seed: 7,
        ..Default::default()
    };
    let pool = sample_fixed_cost(affected.schema(), &cfg)?;
    let grid = ScalarGrid::linear(5.0, 101)?;
    let opts = CubeOptions::default();
    let sel = greedy_select(
        &pool,
        &affected,
        &model,
        std::slice::from_ref(&grid),
        1,
        opts,
    )?;
    let best = &pool[sel.chosen[0]];

    let flips = first_flips(&model, &affected, best, &grid, opts)?;
    let stats = GceStats::from_flips(&grid, flips, None);
    for p in profile_series(&stats).iter().step_by(20) {
        println!(
            "k = {:.2}: coverage {:.1}%, cost {:.2}",
            p.k,
            100.0 * p.coverage,
            p.avg_cost
        );
    }
    let hist = min_cost_histogram(&stats, 0.5)?;
    println!(
        "min-cost histogram {:?}, {} uncovered",
        hist.counts, hist.uncovered
    );

    let crc = build_crc(best, &affected, &model, 4, CrcMode::Spaced, opts)?;
    println!("{}", crc.to_markdown());
    Ok(())
}
