//! GLOBE-CE, dGLOBE-CE and Fast AReS side by side on a seeded synthetic
//! dataset (2000 rows, 6 categorical and 4 continuous features).
//!
//!     cargo run --release --example desk_benchmark [seed]

use globe_ce::dataset::write_csv;
use globe_ce::pipeline::{run_config, Command, GridConfig, RunConfig};
use globe_ce::predictors::{fit, FitParams, ModelKind};
use globe_ce::synthetic::mixed_benchmark;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(1);
    let dir = std::env::temp_dir().join(format!("globe-ce-desk-{seed}"));
    std::fs::create_dir_all(&dir)?;

    let data = mixed_benchmark(2000, 6, 4, seed);
    let model = fit(
        ModelKind::Logistic,
        &data,
        data.labels().unwrap(),
        &FitParams::default(),
    )?;
    write_csv(&data, dir.join("data.csv"))?;
    data.schema()
        .clone()
        .with_label_column("label")
        .save(dir.join("schema.json"))?;
    model.save(dir.join("model.json"))?;

    let mut cfg = RunConfig::from_toml(
        "[data]\ncsv = 'data.csv'\nschema = 'schema.json'\nmodel = 'model.json'\n",
    )?;
    cfg.resolve(&dir);
    cfg.seed = Some(seed);
    cfg.out = dir.join("out");
    cfg.generation.n_s = 100;
    cfg.grid = GridConfig {
        m: 1000,
        k_max: Some(5.0),
        ..GridConfig::default()
    };
    let outcome = run_config(Command::Bench, &cfg)?;
    println!("{}", outcome.summary);
    println!("artifacts in {}", outcome.out.display());
    Ok(())
}
