//! The Fast AReS baseline on a synthetic dataset, in each ground-set mode.

use globe_ce::ares::{self, AresConfig, GroundMode};
use globe_ce::dataset::select_affected;
use globe_ce::predictors::{fit, FitParams, ModelKind};
use globe_ce::synthetic::mixed_benchmark;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = mixed_benchmark(500, 4, 2, 11);
    let model = fit(
        ModelKind::Logistic,
        &data,
        data.labels().unwrap(),
        &FitParams::default(),
    )?;
    let affected = select_affected(&data, &model)?;
    for mode in [
        GroundMode::Original,
        GroundMode::RlReduction,
        GroundMode::ThenGeneration,
    ] {
        let cfg = AresConfig {
            mode,
            p: 0.15,
            eps2: 3,
            ..Default::default()
        };
        let out = ares::run(&data, &affected, &model, &cfg, None)?;
        println!(
            "{}: ground set {}, coverage {:.1}%, cost {:?}, {:.2}s",
            mode.as_str(),
            out.ground.len(),
            100.0 * out.recourse.coverage,
            out.recourse.avg_cost,
            out.timings.total()
        );
        if let Some(t) = out.recourse.triples.first() {
            println!("  {}", t.triple.render(affected.schema()));
        }
    }
    Ok(())
}
