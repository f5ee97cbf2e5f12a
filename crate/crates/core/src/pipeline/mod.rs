//! Config-driven runs behind the command-line subcommands.
//!
//! Every run writes its artifacts, a `manifest.json` naming the config, seed
//! and files, and a `timings.json` with wall-clock seconds per stage. All
//! files except the timing ones are byte-identical across repeated runs.

mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::ares::{self, AresConfig, AresOutcome};
use crate::dataset::{load_dataset, select_affected, slice_subgroup, split, Dataset};
use crate::error::{Error, Result};
use crate::gce::{
    first_flips, per_translation_cap, scale_and_evaluate_with, stats, CubeOptions, GceStats,
    ScalarGrid, Translation,
};
use crate::generation::{
    gradient_descent_delta, greedy_select, importance_weighted_sample, sample_fixed_cost,
    svm_shared_direction, GenerationConfig, GeneratorKind, Selection,
};
use crate::predictors::{fit, Model, Predictor};
use crate::report::{
    self, compare_subgroups, mean_translation, min_cost_histogram, profile_series, ArtifactWriter,
    CompareOptions, CostSummary,
};
use crate::rules::build_crc;
use crate::schema::FeatureSchema;

pub use config::{
    BenchConfig, Command, DataConfig, FitConfig, GridConfig, Overrides, ReportConfig, RunConfig,
    SubgroupConfig,
};

/// Exit status for a failed run: 2 for invalid configuration or input data,
/// 3 for a failure inside a pipeline stage.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Config(_)
        | Error::Schema(_)
        | Error::Load { .. }
        | Error::Parse { .. }
        | Error::Range { .. } => 2,
        _ => 3,
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub command: Command,
    pub out: PathBuf,
    /// Deterministic artifacts, in write order.
    pub artifacts: Vec<String>,
    /// One-paragraph human summary.
    pub summary: String,
}

pub const TIMINGS_FILE: &str = "timings.json";
const BENCH_TABLE: &str = "bench_table.md";

#[derive(Debug, Default, Serialize)]
struct StageTime {
    stage: String,
    seconds: f64,
}

#[derive(Debug, Default)]
struct Timer {
    stages: Vec<StageTime>,
}

impl Timer {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f().map_err(|e| e.in_stage(stage))?;
        self.record(stage, t.elapsed().as_secs_f64());
        Ok(out)
    }

    fn record(&mut self, stage: &str, seconds: f64) {
        self.stages.push(StageTime {
            stage: stage.to_string(),
            seconds,
        });
    }

    fn get(&self, stage: &str) -> f64 {
        self.stages
            .iter()
            .filter(|s| s.stage == stage)
            .map(|s| s.seconds)
            .sum()
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: u64,
    workers: usize,
    config: &'a RunConfig,
    artifacts: &'a [String],
    timing_artifacts: Vec<&'static str>,
}

/// Loads, validates and runs `command` with the config at `config_path`.
pub fn run(
    command: Command,
    config_path: impl AsRef<Path>,
    overrides: &Overrides,
) -> Result<RunOutcome> {
    let cfg = RunConfig::load(config_path, overrides)?;
    run_config(command, &cfg)
}

pub fn run_config(command: Command, cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate(command)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| {
            Error::InvalidArgument(format!("cannot start {} workers: {e}", cfg.workers))
        })?;
    pool.install(|| {
        let mut w = ArtifactWriter::new(&cfg.out)?;
        let mut timer = Timer::default();
        let summary = match command {
            Command::Explain => run_explain(cfg, &mut w, &mut timer),
            Command::Compare => run_compare(cfg, &mut w, &mut timer),
            Command::Ares => run_ares(cfg, &mut w, &mut timer),
            Command::Bench => run_bench(cfg, &mut w, &mut timer),
            Command::Fit => run_fit(cfg, &mut w, &mut timer),
            Command::InspectModel => run_inspect(cfg, &mut w),
        }?;
        let artifacts: Vec<String> = w
            .written()
            .iter()
            .filter(|n| n.as_str() != BENCH_TABLE)
            .cloned()
            .collect();
        let mut timing_artifacts = vec![TIMINGS_FILE];
        if command == Command::Bench {
            timing_artifacts.push(BENCH_TABLE);
        }
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.as_str(),
            seed: cfg.seed(),
            workers: cfg.workers,
            config: cfg,
            artifacts: &artifacts,
            timing_artifacts,
        };
        w.json("manifest.json", &manifest)?;
        let total: f64 = timer.stages.iter().map(|s| s.seconds).sum();
        w.json(
            TIMINGS_FILE,
            &serde_json::json!({ "stages": timer.stages, "total_seconds": total }),
        )?;
        let mut artifacts = artifacts;
        artifacts.push("manifest.json".into());
        Ok(RunOutcome {
            command,
            out: cfg.out.clone(),
            artifacts,
            summary,
        })
    })
}

struct Inputs {
    dataset: Dataset,
    model: Model,
    affected: Dataset,
}

fn load_inputs(cfg: &RunConfig, timer: &mut Timer) -> Result<Inputs> {
    let t = Instant::now();
    let dataset = load_dataset(&cfg.data.csv, &cfg.data.schema)?;
    let model = Model::load(cfg.data.model.as_ref().expect("validated model path"))?;
    if model.dim() != dataset.dim() {
        return Err(Error::Schema(format!(
            "model expects {} encoded columns, schema has {}",
            model.dim(),
            dataset.dim()
        )));
    }
    let mut affected = select_affected(&dataset, &model)?;
    if let Some(limit) = cfg.data.max_inputs {
        if affected.len() > limit {
            affected = affected.select(&(0..limit).collect::<Vec<_>>());
        }
    }
    timer.record("load", t.elapsed().as_secs_f64());
    if affected.is_empty() {
        return Err(
            Error::Precondition("the model predicts no row as class 0".into())
                .in_stage("select affected"),
        );
    }
    Ok(Inputs {
        dataset,
        model,
        affected,
    })
}

fn coordinate_costs(schema: &FeatureSchema) -> Vec<f64> {
    let mut c = vec![0.0; schema.dim()];
    for (i, f) in schema.features().iter().enumerate() {
        // immovable features get a prohibitive price
        let w = if f.actionable {
            f.cost_weight
        } else {
            1e6 * f.cost_weight.max(1.0)
        };
        match f.bin_width() {
            Some(bw) => c[schema.offset(i)] = w / bw,
            None => schema.span(i).for_each(|k| c[k] = w),
        }
    }
    c
}

/// Candidate translations for `config.kind`.
pub fn generate_candidates(
    config: &GenerationConfig,
    model: &Model,
    inputs: &Dataset,
) -> Result<Vec<Translation>> {
    let schema = inputs.schema();
    match config.kind {
        GeneratorKind::Uniform => sample_fixed_cost(schema, config),
        GeneratorKind::Importance => {
            let trees = model.as_trees().ok_or_else(|| {
                Error::Capability("importance sampling needs a tree ensemble".into())
            })?;
            importance_weighted_sample(schema, config, &trees.feature_importances(schema)?)
        }
        GeneratorKind::Gradient => Ok(vec![gradient_descent_delta(model, inputs, &config.into())?]),
        GeneratorKind::SvmClosedForm => {
            let lin = model.as_linear().ok_or_else(|| {
                Error::Capability("the closed-form generator needs a linear model".into())
            })?;
            let dir =
                svm_shared_direction(&lin.weights, lin.bias, &coordinate_costs(schema), inputs)?;
            Ok(vec![dir])
        }
    }
}

/// One shared grid (`k_max`) or one grid per candidate (`cap`).
pub fn grids_for(
    grid: &GridConfig,
    candidates: &[Translation],
    inputs: &Dataset,
) -> Result<Vec<ScalarGrid>> {
    match (grid.k_max, grid.cap) {
        (Some(k), None) => Ok(vec![ScalarGrid::linear(k, grid.m)?]),
        (None, Some(cap)) => candidates
            .par_iter()
            .map(|t| {
                per_translation_cap(
                    t,
                    cap,
                    inputs.schema(),
                    grid.probe.then_some(inputs),
                    grid.m,
                    grid.clamp,
                )
            })
            .collect(),
        _ => Err(Error::Config(vec![
            "grid: set exactly one of k_max or cap".into()
        ])),
    }
}

fn pick_grids(grids: &[ScalarGrid], chosen: &[usize]) -> Vec<ScalarGrid> {
    if grids.len() == 1 {
        grids.to_vec()
    } else {
        chosen.iter().map(|&i| grids[i].clone()).collect()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.3}"))
}

#[derive(Serialize)]
struct TranslationSummary<'a> {
    index: usize,
    translation: &'a Translation,
    grid_max: f64,
    coverage: f64,
    avg_cost: Option<f64>,
    uncovered: usize,
    flip_backs: Option<usize>,
    rule_chart: bool,
}

fn run_explain(cfg: &RunConfig, w: &mut ArtifactWriter, timer: &mut Timer) -> Result<String> {
    let inp = load_inputs(cfg, timer)?;
    let gen = cfg.generation();
    let opts = CubeOptions {
        clamp: cfg.grid.clamp,
    };
    let candidates = timer.time("generation", || {
        generate_candidates(&gen, &inp.model, &inp.affected)
    })?;
    let grids = timer.time("grid", || grids_for(&cfg.grid, &candidates, &inp.affected))?;
    let sel = timer.time("selection", || {
        greedy_select(&candidates, &inp.affected, &inp.model, &grids, gen.n, opts)
    })?;
    let chosen: Vec<Translation> = sel.chosen.iter().map(|&i| candidates[i].clone()).collect();
    let chosen_grids = pick_grids(&grids, &sel.chosen);
    let all_stats: Vec<GceStats> = timer.time("evaluation", || {
        let cube =
            scale_and_evaluate_with(&inp.model, &inp.affected, &chosen, &chosen_grids, opts)?;
        (0..chosen.len()).map(|i| stats(&cube, i)).collect()
    })?;

    let rc = &cfg.report;
    let t = Instant::now();
    let schema = inp.affected.schema();
    let mut summaries = Vec::new();
    for (i, (tr, st)) in chosen.iter().zip(&all_stats).enumerate() {
        w.profile(i, &profile_series(st))?;
        let hist = min_cost_histogram(st, rc.histogram_width)?;
        w.histogram(i, &hist)?;
        if st.covered_count() > 0 {
            w.json(
                &format!("mean_translation_{i}.json"),
                &mean_translation(tr, st, schema)?,
            )?;
        }
        let chart = match build_crc(
            tr,
            &inp.affected,
            &inp.model,
            rc.crc_rows,
            rc.crc_mode,
            opts,
        ) {
            Ok(c) => Some(c),
            Err(Error::Capability(_)) => None,
            Err(e) => return Err(e.in_stage("rule chart")),
        };
        if let Some(c) = &chart {
            w.crc(i, c)?;
        }
        summaries.push(TranslationSummary {
            index: i,
            translation: tr,
            grid_max: st.grid.last().copied().unwrap_or(0.0),
            coverage: st.final_coverage(),
            avg_cost: st.final_avg_cost(),
            uncovered: hist.uncovered,
            flip_backs: st.flip_backs,
            rule_chart: chart.is_some(),
        });
    }
    let union = CostSummary::union(&all_stats, rc.histogram_width)?;
    w.json(
        "summary.json",
        &serde_json::json!({
            "n_rows": inp.dataset.len(),
            "n_inputs": inp.affected.len(),
            "n_candidates": candidates.len(),
            "selection": sel,
            "union_coverage": union.coverage,
            "union_avg_cost": union.avg_cost,
            "translations": summaries,
        }),
    )?;
    timer.record("report", t.elapsed().as_secs_f64());
    let mut s = format!(
        "explain: {} affected inputs, {} candidates, {} chosen\n",
        inp.affected.len(),
        candidates.len(),
        chosen.len()
    );
    for t in &summaries {
        let _ = writeln!(
            s,
            "  translation {}: coverage {:.1}%, average cost {}",
            t.index,
            100.0 * t.coverage,
            fmt_opt(t.avg_cost)
        );
    }
    let _ = write!(
        s,
        "  union: coverage {:.1}%, average cost {}",
        100.0 * union.coverage,
        fmt_opt(union.avg_cost)
    );
    Ok(s)
}

fn run_compare(cfg: &RunConfig, w: &mut ArtifactWriter, timer: &mut Timer) -> Result<String> {
    let inp = load_inputs(cfg, timer)?;
    let schema = inp.affected.schema();
    let (ga, gb) = (&cfg.subgroups[0], &cfg.subgroups[1]);
    let (da, db) = (ga.descriptor(schema)?, gb.descriptor(schema)?);
    let a = slice_subgroup(&inp.affected, &da)?;
    let b = slice_subgroup(&inp.affected, &db)?;
    for (g, ds) in [(ga, &a), (gb, &b)] {
        if ds.is_empty() {
            return Err(Error::Precondition(format!(
                "subgroup `{}` has no affected inputs",
                g.label
            ))
            .in_stage("subgroups"));
        }
    }
    let pool_inputs = inp
        .affected
        .filter(|r| da.matches(schema, r) || db.matches(schema, r));
    let gen = cfg.generation();
    let candidates = timer.time("generation", || {
        generate_candidates(&gen, &inp.model, &pool_inputs)
    })?;
    let grids = timer.time("grid", || grids_for(&cfg.grid, &candidates, &pool_inputs))?;
    let options = CompareOptions {
        histogram_width: cfg.report.histogram_width,
        cube: CubeOptions {
            clamp: cfg.grid.clamp,
        },
    };
    let rep = timer.time("comparison", || {
        compare_subgroups(
            (&ga.label, &a),
            (&gb.label, &b),
            &candidates,
            &inp.model,
            &grids,
            options,
        )
    })?;
    let t = Instant::now();
    report::write_bias_report(w, &rep)?;
    timer.record("report", t.elapsed().as_secs_f64());
    let side = |r: &report::SubgroupReport| {
        format!(
            "  {} ({} inputs): coverage {:.1}%, average cost {}, median cost {}",
            r.label,
            r.native.n_inputs,
            100.0 * r.native.coverage,
            fmt_opt(r.native.avg_cost),
            fmt_opt(r.native.median_cost)
        )
    };
    Ok(format!(
        "compare:\n{}\n{}\n  gap ({} - {}): coverage {:+.1} points, average cost {}",
        side(&rep.a),
        side(&rep.b),
        rep.b.label,
        rep.a.label,
        100.0 * rep.native_gaps.coverage,
        fmt_opt(rep.native_gaps.avg_cost)
    ))
}

fn write_ares(
    w: &mut ArtifactWriter,
    stem: &str,
    schema: &FeatureSchema,
    out: &AresOutcome,
    config: &AresConfig,
) -> Result<()> {
    let r = &out.recourse;
    let mut text = format!(
        "# mode {}, {} triples, coverage {:.4}, average cost {}\n\n",
        config.mode.as_str(),
        r.triples.len(),
        r.coverage,
        fmt_opt(r.avg_cost)
    );
    let mut csv =
        String::from("rank,ground_index,applicable,flips,coverage,avg_cost,outer,inner,then\n");
    let n = r.n_inputs.max(1) as f64;
    for (rank, t) in r.triples.iter().enumerate() {
        let _ = writeln!(
            text,
            "{}\n  (covers {} of {} inputs, average cost {})\n",
            t.triple.render(schema),
            t.flips(),
            r.n_inputs,
            fmt_opt(t.avg_cost())
        );
        let items = |items: &[ares::Item]| {
            items
                .iter()
                .map(|&i| ares::render_item(schema, i))
                .collect::<Vec<_>>()
                .join(" and ")
        };
        let _ = writeln!(
            csv,
            "{rank},{},{},{},{},{},\"{}\",\"{}\",\"{}\"",
            t.index,
            t.applicable,
            t.flips(),
            t.flips() as f64 / n,
            t.avg_cost().map_or(String::new(), |c| c.to_string()),
            items(&t.triple.outer),
            items(&t.triple.inner),
            items(&t.triple.then)
        );
    }
    w.text(&format!("{stem}_rules.txt"), &text)?;
    w.text(&format!("{stem}_triples.csv"), &csv)?;
    w.json(
        &format!("{stem}_summary.json"),
        &serde_json::json!({
            "mode": config.mode,
            "itemsets": out.itemsets,
            "ground_set": out.ground.len(),
            "inner_iterations": out.ground.inner_iterations,
            "evaluated": out.evaluated.evaluated,
            "kept": out.evaluated.triples.len(),
            "union_coverage": out.evaluated.union_coverage(),
            "coverage": r.coverage,
            "avg_cost": r.avg_cost,
            "objective": r.objective,
            "moves": r.moves,
            "triples": r.triples.len(),
        }),
    )
}

fn record_ares(timer: &mut Timer, prefix: &str, out: &AresOutcome) {
    let t = &out.timings;
    for (name, s) in [
        ("mining", t.mining),
        ("ground_set", t.ground_set),
        ("evaluation", t.evaluation),
        ("selection", t.selection),
        ("optimization", t.optimization),
    ] {
        timer.record(&format!("{prefix}.{name}"), s);
    }
}

fn run_ares(cfg: &RunConfig, w: &mut ArtifactWriter, timer: &mut Timer) -> Result<String> {
    let inp = load_inputs(cfg, timer)?;
    let out = ares::run(&inp.dataset, &inp.affected, &inp.model, &cfg.ares, None)?;
    record_ares(timer, "ares", &out);
    write_ares(w, "ares", inp.affected.schema(), &out, &cfg.ares)?;
    Ok(format!(
        "ares ({}): {} itemsets, ground set {}, {} triples chosen, coverage {:.1}%, average cost {}",
        cfg.ares.mode.as_str(),
        out.itemsets,
        out.ground.len(),
        out.recourse.triples.len(),
        100.0 * out.recourse.coverage,
        fmt_opt(out.recourse.avg_cost)
    ))
}

struct BenchRow {
    method: String,
    coverage: f64,
    avg_cost: Option<f64>,
    seconds: f64,
}

fn run_bench(cfg: &RunConfig, w: &mut ArtifactWriter, timer: &mut Timer) -> Result<String> {
    let inp = load_inputs(cfg, timer)?;
    let gen = cfg.generation();
    let opts = CubeOptions {
        clamp: cfg.grid.clamp,
    };
    let candidates = timer.time("globe_ce.generation", || {
        generate_candidates(&gen, &inp.model, &inp.affected)
    })?;
    let grids = timer.time("globe_ce.grid", || {
        grids_for(&cfg.grid, &candidates, &inp.affected)
    })?;
    let shared = timer.get("globe_ce.generation") + timer.get("globe_ce.grid");
    let mut rows = Vec::new();
    let mut details = Vec::new();
    for (label, n) in [("GLOBE-CE", 1), ("dGLOBE-CE", cfg.bench.multi_n)] {
        let stage = if n == 1 { "globe_ce" } else { "dglobe_ce" };
        let (sel, st): (Selection, Vec<GceStats>) =
            timer.time(&format!("{stage}.select_evaluate"), || {
                let sel = greedy_select(&candidates, &inp.affected, &inp.model, &grids, n, opts)?;
                let chosen_grids = pick_grids(&grids, &sel.chosen);
                let st = sel
                    .chosen
                    .iter()
                    .enumerate()
                    .map(|(j, &i)| {
                        let g = if chosen_grids.len() == 1 {
                            &chosen_grids[0]
                        } else {
                            &chosen_grids[j]
                        };
                        first_flips(&inp.model, &inp.affected, &candidates[i], g, opts)
                            .map(|f| GceStats::from_flips(g, f, None))
                    })
                    .collect::<Result<_>>()?;
                Ok((sel, st))
            })?;
        let union = CostSummary::union(&st, cfg.report.histogram_width)?;
        rows.push(BenchRow {
            method: label.to_string(),
            coverage: union.coverage,
            avg_cost: union.avg_cost,
            seconds: shared + timer.get(&format!("{stage}.select_evaluate")),
        });
        details.push(serde_json::json!({
            "method": label,
            "chosen": sel.chosen,
            "translations": sel.chosen.iter().map(|&i| &candidates[i]).collect::<Vec<_>>(),
            "coverage": union.coverage,
            "avg_cost": union.avg_cost,
        }));
    }
    for &mode in &cfg.bench.ares_modes {
        let acfg = AresConfig {
            mode,
            ..cfg.ares.clone()
        };
        let out = ares::run(&inp.dataset, &inp.affected, &inp.model, &acfg, None)
            .map_err(|e| e.in_stage(format!("Fast AReS ({})", mode.as_str())))?;
        let prefix = format!("ares_{}", mode.as_str());
        record_ares(timer, &prefix, &out);
        write_ares(w, &prefix, inp.affected.schema(), &out, &acfg)?;
        rows.push(BenchRow {
            method: format!("Fast AReS ({})", mode.as_str()),
            coverage: out.recourse.coverage,
            avg_cost: out.recourse.avg_cost,
            seconds: out.timings.total(),
        });
    }
    let mut csv = String::from("method,n_inputs,coverage,avg_cost\n");
    let mut table = String::from("| Method | Cov. | Cost | Time (s) |\n|---|---|---|---|\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            r.method,
            inp.affected.len(),
            r.coverage,
            r.avg_cost.map_or(String::new(), |c| c.to_string())
        );
        let _ = writeln!(
            table,
            "| {} | {:.1}% | {} | {:.3} |",
            r.method,
            100.0 * r.coverage,
            r.avg_cost.map_or("-".into(), |c| format!("{c:.2}")),
            r.seconds
        );
    }
    w.text("bench.csv", &csv)?;
    w.json("bench_details.json", &details)?;
    w.text(BENCH_TABLE, &table)?;
    Ok(format!(
        "bench on {} affected inputs:\n{}",
        inp.affected.len(),
        table.trim_end()
    ))
}

fn run_fit(cfg: &RunConfig, w: &mut ArtifactWriter, timer: &mut Timer) -> Result<String> {
    let t = Instant::now();
    let dataset = load_dataset(&cfg.data.csv, &cfg.data.schema)?;
    if dataset.labels().is_none() {
        return Err(Error::Schema("dataset has no label column".into()));
    }
    timer.record("load", t.elapsed().as_secs_f64());
    let (train, test) = split(&dataset, cfg.fit.train_fraction, cfg.seed())?;
    let params = crate::predictors::FitParams {
        seed: cfg.seed(),
        ..cfg.fit.params.clone()
    };
    let model = timer.time("fit", || {
        fit(
            cfg.fit.kind,
            &train,
            train.labels().expect("labels"),
            &params,
        )
    })?;
    let accuracy = |ds: &Dataset| -> Option<f64> {
        let labels = ds.labels()?;
        (!ds.is_empty()).then(|| {
            ds.rows()
                .zip(labels)
                .filter(|(r, &l)| model.predict(r) == l)
                .count() as f64
                / ds.len() as f64
        })
    };
    let (train_acc, test_acc) = (accuracy(&train), accuracy(&test));
    w.text("model.json", &model.to_json())?;
    w.json(
        "fit_report.json",
        &serde_json::json!({
            "kind": cfg.fit.kind,
            "n_train": train.len(),
            "n_test": test.len(),
            "train_accuracy": train_acc,
            "test_accuracy": test_acc,
        }),
    )?;
    Ok(format!(
        "fit {}: {} training rows, training accuracy {}, test accuracy {}",
        cfg.fit.kind.as_str(),
        train.len(),
        fmt_opt(train_acc),
        fmt_opt(test_acc)
    ))
}

fn run_inspect(cfg: &RunConfig, w: &mut ArtifactWriter) -> Result<String> {
    let schema = FeatureSchema::load(&cfg.data.schema)?;
    let model = Model::load(cfg.data.model.as_ref().expect("validated model path"))?;
    let text = model.describe(Some(&schema));
    w.text("model_summary.txt", &text)?;
    Ok(text.trim_end().to_string())
}
