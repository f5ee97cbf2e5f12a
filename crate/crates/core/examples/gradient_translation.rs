//! Single translations found by gradient descent on a fitted MLP, for a few
//! sparsity weights.

use globe_ce::dataset::select_affected;
use globe_ce::gce::{first_flips, CubeOptions, GceStats, ScalarGrid};
use globe_ce::generation::{gradient_descent_delta, GradientParams};
use globe_ce::predictors::{fit, FitParams, ModelKind};
use globe_ce::synthetic::mixed_benchmark;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = mixed_benchmark(600, 2, 4, 8);
    let model = fit(
        ModelKind::Mlp,
        &data,
        data.labels().unwrap(),
        &FitParams::default(),
    )?;
    let affected = select_affected(&data, &model)?;
    let grid = ScalarGrid::linear(3.0, 61)?;
    for lambda in [0.0, 0.01, 0.03] {
        let params = GradientParams {
            lambda,
            steps: 200,
            step_size: 0.5,
            seed: 8,
        };
        let t = gradient_descent_delta(&model, &affected, &params)?;
        let nonzero = t.delta.iter().filter(|&&d| d != 0.0).count();
        let flips = first_flips(&model, &affected, &t, &grid, CubeOptions::default())?;
        let s = GceStats::from_flips(&grid, flips, None);
        println!(
            "lambda {lambda}: {nonzero} nonzero coordinates, coverage {:.1}% of {}, average cost {:?}",
            100.0 * s.final_coverage(),
            affected.len(),
            s.final_avg_cost()
        );
    }
    Ok(())
}
