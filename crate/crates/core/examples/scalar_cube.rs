//! Scales a handful of translations over a grid and reads the evaluation
//! cube: per-scalar coverage, costs, and a per-translation cost-capped grid.

use globe_ce::dataset::select_affected;
use globe_ce::gce::{per_translation_cap, scale_and_evaluate, stats, ScalarGrid};
use globe_ce::generation::{sample_fixed_cost, GenerationConfig};
use globe_ce::predictors::{fit, FitParams, ModelKind};
use globe_ce::synthetic::mixed_benchmark;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = mixed_benchmark(400, 3, 3, 5);
    let model = fit(
        ModelKind::Logistic,
        &data,
        data.labels().unwrap(),
        &FitParams::default(),
    )?;
    let affected = select_affected(&data, &model)?;
    let cfg = GenerationConfig {
        n_s: 4,
        seed: 5,
        ..Default::default()
    };
    let pool = sample_fixed_cost(data.schema(), &cfg)?;
    let grid = ScalarGrid::linear(4.0, 9)?;
    let cube = scale_and_evaluate(&model, &affected, &pool, &grid)?;
    println!("cube shape {:?}", cube.shape());
    for i in 0..cube.n_translations() {
        let s = stats(&cube, i)?;
        let cov: Vec<String> = s.coverage.iter().map(|c| format!("{:.2}", c)).collect();
        println!(
            "translation {i}: coverage [{}], flip-backs {:?}",
            cov.join(" "),
            s.flip_backs
        );
        let capped = per_translation_cap(&pool[i], 3.0, data.schema(), Some(&affected), 50, true)?;
        println!("  cost-3 cap reached at k = {:.3}", capped.max());
    }
    println!(
        "input 0 at k = {}: {:?}",
        grid.values()[4],
        cube.counterfactual(0, 4, 0)
    );
    Ok(())
}
