//! One pass/fail line per acceptance criterion, with pinned tolerances.
//!
//! Lines go straight to stderr so they show up without `--nocapture`.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use globe_ce::ares::{
    evaluate_ground_set, generate_ground_set, mine_itemsets, select_top, EvaluatedSet, GroundMode,
    GroundParams, ThenSource,
};
use globe_ce::dataset::{select_affected, write_csv, Dataset};
use globe_ce::gce::{
    first_flips, scale_and_evaluate_with, stats, CubeOptions, GceStats, ScalarGrid, Translation,
};
use globe_ce::generation::{greedy_select, sample_fixed_cost, svm_optimal_delta, GenerationConfig};
use globe_ce::pipeline::{self, run_config, Command, GridConfig, Overrides, RunConfig};
use globe_ce::predictors::{fit, FitParams, Model, ModelKind, Predictor};
use globe_ce::report::{compare_subgroups, profile_series, CompareOptions};
use globe_ce::rules::{extract_rules, lower_bounds, rules_sequence};
use globe_ce::schema::{FeatureSchema, FeatureSpec};
use globe_ce::synthetic::{margin_gap, mixed_benchmark};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn oracle_argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

/// Categorical rules against brute-force rounding.
fn c1_rule_extraction_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut checks, mut mismatches) = (0usize, 0usize);
    for _ in 0..1000 {
        let n_feat = rng.random_range(1..=4);
        let specs: Vec<FeatureSpec> = (0..n_feat)
            .map(|f| {
                let n = rng.random_range(2..=8);
                FeatureSpec::categorical(format!("f{f}"), (0..n).map(|v| v.to_string()))
            })
            .collect();
        let schema = FeatureSchema::new(specs).unwrap();
        // half the blocks on a coarse lattice to provoke exact ties
        let coarse = rng.random_bool(0.5);
        let delta: Vec<f64> = (0..schema.dim())
            .map(|_| {
                if coarse {
                    rng.random_range(-4..=4) as f64 * 0.5
                } else {
                    rng.random_range(-2.0..2.0)
                }
            })
            .collect();
        let t = Translation::manual(delta.clone());
        let mut scalars: Vec<f64> = (0..40).map(|_| rng.random_range(0.0..5.0)).collect();
        let finite: Vec<f64> = (0..schema.len())
            .flat_map(|i| lower_bounds(&delta[schema.span(i)]))
            .filter(|k| k.is_finite())
            .collect();
        while scalars.len() < 50 {
            scalars.push(if finite.is_empty() {
                rng.random_range(0.0..5.0)
            } else {
                finite[rng.random_range(0..finite.len())]
            });
        }
        for &k in &scalars {
            let rules = extract_rules(&t, k, &schema).unwrap();
            for rule in &rules {
                let block = &delta[schema.span(rule.feature)];
                for origin in 0..block.len() {
                    let v: Vec<f64> = block
                        .iter()
                        .enumerate()
                        .map(|(c, &d)| f64::from(u8::from(c == origin)) + k * d)
                        .collect();
                    let lands = oracle_argmax(&v);
                    let listed = rule.if_set.contains(&origin);
                    checks += 1;
                    if (lands != origin) != listed || (listed && lands != rule.then_value) {
                        mismatches += 1;
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        mismatches == 0 && secs < 10.0,
        format!("{checks} origin checks, {mismatches} mismatches, {secs:.2}s (limit 10s)"),
    )
}

/// The four-valued worked example, strings included.
fn c2_worked_example() -> Outcome {
    let schema =
        FeatureSchema::new(vec![FeatureSpec::categorical("f", ["1", "2", "3", "4"])]).unwrap();
    let t = Translation::manual(vec![0.0, -1.0, 1.0, 0.5]);
    let mut problems = Vec::new();
    let lb = lower_bounds(&t.delta);
    if lb != [1.0, 0.5, f64::INFINITY, 2.0] {
        problems.push(format!("lower bounds {lb:?}"));
    }
    let seq: Vec<(f64, usize, usize)> = rules_sequence(&t, &schema)
        .unwrap()
        .iter()
        .map(|a| (a.threshold, a.origin, a.then_value))
        .collect();
    if seq != [(0.5, 1, 2), (1.0, 0, 2), (2.0, 3, 2)] {
        problems.push(format!("sequence {seq:?}"));
    }
    let expected = [
        (0.75, "If 2, Then 3", "If Not (1 or 3 or 4), Then 3"),
        (1.0, "If 2, Then 3", "If Not (1 or 3 or 4), Then 3"),
        (1.5, "If 1 or 2, Then 3", "If Not (3 or 4), Then 3"),
        (3.0, "If 1 or 2 or 4, Then 3", "If Not 3, Then 3"),
    ];
    for (k, listed, negated) in expected {
        let r = &extract_rules(&t, k, &schema).unwrap()[0];
        if r.render_listed(&schema) != listed || r.render_negated(&schema) != negated {
            problems.push(format!(
                "k={k}: `{}` / `{}`",
                r.render_listed(&schema),
                r.render_negated(&schema)
            ));
        }
    }
    if !extract_rules(&t, 0.5, &schema).unwrap()[0].is_empty() {
        problems.push("rule present at k=0.5".into());
    }
    check(
        problems.is_empty(),
        if problems.is_empty() {
            "lower bounds [1, 0.5, inf, 2]; rules and alternative forms match the table".into()
        } else {
            problems.join("; ")
        },
    )
}

fn weighted_norm(c: &[f64], v: &[f64]) -> f64 {
    c.iter()
        .zip(v)
        .map(|(c, v)| (c * v) * (c * v))
        .sum::<f64>()
        .sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

/// Closed-form linear minimum cost, and the sampled pipeline against it.
///
/// Costs here are the weighted l2 norm `|C delta|`, not the binned cost.
fn c3_svm_optimality() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (mut closed_bad, mut beaten, mut sampled_bad, mut worst_ratio) = (0, 0, 0, 0.0f64);
    let mut sampled_instances = 0;
    for inst in 0..100 {
        let d = 1 + inst % 10;
        let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0) + 0.1).collect();
        let c: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..2.0)).collect();
        let b: f64 = rng.random_range(-1.0..1.0);
        let cinv_w: Vec<f64> = w.iter().zip(&c).map(|(w, c)| w / c).collect();
        let norm = cinv_w.iter().map(|v| v * v).sum::<f64>().sqrt();
        let unit: Vec<f64> = w.iter().zip(&c).map(|(w, c)| w / (c * c) / norm).collect();
        let w2 = dot(
            &w,
            &w.iter()
                .zip(&c)
                .map(|(w, c)| w / (c * c))
                .collect::<Vec<_>>(),
        );
        // inputs at known optimal cost t below the boundary
        let inputs: Vec<(Vec<f64>, f64)> = (0..20)
            .map(|_| {
                let z: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                let s = (dot(&w, &z) + b) / w2;
                let t: f64 = rng.random_range(0.5..2.0);
                let x = z
                    .iter()
                    .zip(&w)
                    .zip(&c)
                    .zip(&unit)
                    .map(|(((z, w), c), u)| z - s * w / (c * c) - t * u)
                    .collect();
                (x, t)
            })
            .collect();

        let (x0, t0) = &inputs[0];
        let y0 = dot(&w, x0) + b;
        let (delta, cost) = svm_optimal_delta(&w, b, &c, x0).unwrap();
        let formula = -y0 / norm;
        let landed: Vec<f64> = x0.iter().zip(&delta.delta).map(|(x, d)| x + d).collect();
        if (cost - formula).abs() > 1e-9
            || (cost - t0).abs() > 1e-9
            || (weighted_norm(&c, &delta.delta) - cost).abs() > 1e-9
            || (dot(&w, &landed) + b).abs() > 1e-9
        {
            closed_bad += 1;
        }
        let ww = dot(&w, &w);
        for _ in 0..10_000 {
            let z: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
            let s = (dot(&w, &z) + b) / ww;
            let step: Vec<f64> = z
                .iter()
                .zip(&w)
                .zip(x0)
                .map(|((z, w), x)| z - s * w - x)
                .collect();
            if weighted_norm(&c, &step) < cost - 1e-9 {
                beaten += 1;
            }
        }

        if d > 5 {
            continue;
        }
        sampled_instances += 1;
        let schema = Arc::new(
            FeatureSchema::new(
                (0..d)
                    .map(|i| {
                        FeatureSpec::continuous(format!("x{i}"), -50.0, 50.0)
                            .with_bins(100)
                            .with_weight(c[i])
                    })
                    .collect(),
            )
            .unwrap(),
        );
        let ds = Dataset::from_rows(
            schema.clone(),
            inputs.iter().map(|(x, _)| x.clone()).collect(),
        )
        .unwrap();
        let model = Model::linear_svm(w.clone(), b);
        let matched = inputs.iter().map(|(_, t)| *t).fold(0.0, f64::max);
        let cfg = GenerationConfig {
            n_s: 1000,
            n_f: d,
            c: matched,
            seed: inst as u64,
            ..Default::default()
        };
        let pool: Vec<Translation> = sample_fixed_cost(&schema, &cfg)
            .unwrap()
            .into_iter()
            .map(|mut t| {
                let s = matched / weighted_norm(&c, &t.delta);
                t.delta.iter_mut().for_each(|v| *v *= s);
                t
            })
            .collect();
        // full coverage under this cap implies a direction within 18% of optimal
        let grid = ScalarGrid::linear(1.18, 1000).unwrap();
        let sel = greedy_select(
            &pool,
            &ds,
            &model,
            std::slice::from_ref(&grid),
            1,
            CubeOptions::default(),
        )
        .unwrap();
        let chosen = &pool[sel.chosen[0]];
        let flips = first_flips(&model, &ds, chosen, &grid, CubeOptions::default()).unwrap();
        let mut ok = true;
        for (f, (_, t)) in flips.iter().zip(&inputs) {
            match f {
                Some(f) => {
                    let ratio = f.scalar * matched / t;
                    worst_ratio = worst_ratio.max(ratio);
                    ok &= ratio <= 1.2;
                }
                None => ok = false,
            }
        }
        if !ok {
            sampled_bad += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        closed_bad == 0 && beaten == 0 && sampled_bad == 0 && secs < 60.0,
        format!(
            "closed form off in {closed_bad}/100, beaten by {beaten} of 1e6 boundary points; \
             sampled: {sampled_bad}/{sampled_instances} instances fail 100% coverage within 1.2x \
             (worst ratio {worst_ratio:.4}); {secs:.1}s (limit 60s)"
        ),
    )
}

fn random_mixed_schema(rng: &mut ChaCha8Rng) -> FeatureSchema {
    let n = rng.random_range(2..=5);
    let specs = (0..n)
        .map(|i| {
            if rng.random_bool(0.5) {
                let v = rng.random_range(2..=5);
                FeatureSpec::categorical(format!("c{i}"), (0..v).map(|j| format!("v{j}")))
            } else {
                FeatureSpec::continuous(format!("x{i}"), 0.0, 10.0)
                    .with_weight(rng.random_range(0.5..2.0))
            }
        })
        .collect();
    FeatureSchema::new(specs).unwrap()
}

fn random_row(schema: &FeatureSchema, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut row = Vec::with_capacity(schema.dim());
    for f in schema.features() {
        match f.values() {
            Some(values) => {
                let hot = rng.random_range(0..values.len());
                row.extend((0..values.len()).map(|j| f64::from(u8::from(j == hot))));
            }
            None => row.push(rng.random_range(0.0..10.0)),
        }
    }
    row
}

/// Slow element-by-element reference: same operations in feature order.
fn reference_entry(
    schema: &FeatureSchema,
    model: &Model,
    x: &[f64],
    delta: &[f64],
    k: f64,
    clamp: bool,
) -> (u8, f64) {
    let mut cf = vec![0.0; x.len()];
    let mut cost = 0.0;
    for (i, f) in schema.features().iter().enumerate() {
        let span = schema.span(i);
        let moved: Vec<f64> = span.clone().map(|c| x[c] + k * delta[c]).collect();
        match f.values() {
            Some(_) => {
                let to = oracle_argmax(&moved);
                let from = oracle_argmax(&x[span.clone()]);
                for (j, c) in span.enumerate() {
                    cf[c] = if j == to { 1.0 } else { 0.0 };
                }
                cost += if to != from { f.cost_weight } else { 0.0 };
            }
            None => {
                let (min, max) = (0.0, 10.0);
                let v = if clamp {
                    moved[0].clamp(min, max)
                } else {
                    moved[0]
                };
                cf[span.start] = v;
                let bin = |v: f64| {
                    let raw = ((v - min) / 1.0).floor() as i64;
                    if (min..=max).contains(&v) {
                        raw.clamp(0, 9)
                    } else {
                        raw
                    }
                };
                cost += f.cost_weight * (bin(x[span.start]) - bin(v)).unsigned_abs() as f64;
            }
        }
    }
    (model.predict(&cf), cost)
}

/// Cube shape, zero slice, monotone coverage and bitwise agreement.
fn c4_cube_contracts() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut problems = Vec::new();

    // shape on the n=3, m=1000, |X|=200 configuration
    let data = mixed_benchmark(600, 3, 2, 4);
    let model = fit(
        ModelKind::Logistic,
        &data,
        data.labels().unwrap(),
        &FitParams::default(),
    )
    .unwrap();
    let aff = select_affected(&data, &model).unwrap();
    let inputs = aff.select(&(0..200).collect::<Vec<_>>());
    let pool = sample_fixed_cost(
        inputs.schema(),
        &GenerationConfig {
            n_s: 3,
            seed: 4,
            ..Default::default()
        },
    )
    .unwrap();
    let grid = ScalarGrid::linear(5.0, 1000).unwrap();
    let cube = scale_and_evaluate_with(
        &model,
        &inputs,
        &pool,
        std::slice::from_ref(&grid),
        CubeOptions::default(),
    )
    .unwrap();
    if cube.shape() != Some((3, 1000, 200)) {
        problems.push(format!("shape {:?}", cube.shape()));
    }
    for i in 0..3 {
        if cube.prediction_slice(i, 0).iter().any(|&p| p != 0)
            || cube.cost_slice(i, 0).iter().any(|&c| c != 0.0)
        {
            problems.push(format!("k=0 slice of translation {i} not all zero"));
        }
        let st = stats(&cube, i).unwrap();
        if st.coverage.windows(2).any(|w| w[1] < w[0]) {
            problems.push(format!("coverage of translation {i} decreases"));
        }
    }

    let mut compared = 0usize;
    let mut instances = 0;
    while instances < 50 {
        let schema = Arc::new(random_mixed_schema(&mut rng));
        let rows: Vec<Vec<f64>> = (0..5).map(|_| random_row(&schema, &mut rng)).collect();
        let w: Vec<f64> = (0..schema.dim())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let top = rows.iter().map(|r| dot(&w, r)).fold(f64::MIN, f64::max);
        let model = Model::logistic(w, -top - rng.random_range(0.1..1.0));
        let inputs = Dataset::from_rows(schema.clone(), rows.clone()).unwrap();
        let translations: Vec<Translation> = (0..3)
            .map(|_| {
                Translation::manual(
                    (0..schema.dim())
                        .map(|_| {
                            if rng.random_bool(0.4) {
                                0.0
                            } else {
                                rng.random_range(-3.0..3.0)
                            }
                        })
                        .collect(),
                )
            })
            .collect();
        let clamp = rng.random_bool(0.5);
        let grids: Vec<ScalarGrid> = (0..3)
            .map(|_| ScalarGrid::linear(rng.random_range(1.0..6.0), 40).unwrap())
            .collect();
        let cube = scale_and_evaluate_with(
            &model,
            &inputs,
            &translations,
            &grids,
            CubeOptions { clamp },
        )
        .unwrap();
        instances += 1;
        for (i, t) in translations.iter().enumerate() {
            for (j, &k) in grids[i].values().iter().enumerate() {
                for (x, row) in rows.iter().enumerate() {
                    let (p, c) = reference_entry(&schema, &model, row, &t.delta, k, clamp);
                    compared += 1;
                    if p != cube.prediction(i, j, x) || c.to_bits() != cube.cost(i, j, x).to_bits()
                    {
                        problems.push(format!(
                            "instance {instances}: entry ({i}, {j}, {x}) differs"
                        ));
                    }
                }
            }
        }
    }
    check(
        problems.is_empty(),
        if problems.is_empty() {
            format!("shape 3x1000x200, zero k=0 slices, monotone coverage; {compared} entries bitwise equal to the reference")
        } else {
            problems.into_iter().take(5).collect::<Vec<_>>().join("; ")
        },
    )
}

/// Ground-set reduction equivalence and the r / r' / s postconditions.
fn c5_ares_stage_one() -> Outcome {
    let mut problems = Vec::new();
    let mut worst_fraction = 0.0f64;
    for seed in 0..20u64 {
        let data = mixed_benchmark(300, 4, 1, 500 + seed);
        let model = fit(
            ModelKind::Logistic,
            &data,
            data.labels().unwrap(),
            &FitParams::default(),
        )
        .unwrap();
        let rl = mine_itemsets(&data, 0.15, 2).unwrap();
        let params = |mode| GroundParams {
            mode,
            eps2: 3,
            q: None,
            then_source: ThenSource::Positives,
        };
        let og = generate_ground_set(&rl, &rl, data.schema(), &params(GroundMode::Original), None)
            .unwrap();
        let red = generate_ground_set(
            &rl,
            &rl,
            data.schema(),
            &params(GroundMode::RlReduction),
            None,
        )
        .unwrap();
        if og.triples != red.triples {
            problems.push(format!(
                "seed {seed}: ground sets differ ({} vs {})",
                og.len(),
                red.len()
            ));
        }
        let alpha = red.rl_used as f64 / red.rl_total as f64;
        let bound = alpha * alpha * og.inner_iterations as f64;
        if red.inner_iterations as f64 > bound {
            problems.push(format!(
                "seed {seed}: {} iterations above bound {bound:.0}",
                red.inner_iterations
            ));
        }
        worst_fraction =
            worst_fraction.max(red.inner_iterations as f64 / og.inner_iterations as f64);

        let inputs = select_affected(&data, &model).unwrap();
        let full = evaluate_ground_set(&og, &inputs, &model, None, None).unwrap();
        let r = og.len() / 3;
        let prefix = evaluate_ground_set(&og, &inputs, &model, Some(r), None).unwrap();
        if prefix.triples[..] != full.triples[..r] {
            problems.push(format!("seed {seed}: r-prefix differs"));
        }
        let scanned = evaluate_ground_set(&og, &inputs, &model, None, Some(og.len())).unwrap();
        if indexes(&scanned) != scan_oracle(&full, inputs.len()) {
            problems.push(format!("seed {seed}: r' scan differs"));
        }
        let s = 25;
        let top = select_top(&full, s).unwrap();
        let mut order: Vec<usize> = (0..full.triples.len()).collect();
        order.sort_by(|&a, &b| full.triples[b].flips().cmp(&full.triples[a].flips()));
        order.truncate(s);
        let want: Vec<usize> = order.iter().map(|&i| full.triples[i].index).collect();
        if indexes(&top) != want {
            problems.push(format!("seed {seed}: top-s differs"));
        }
    }
    check(
        problems.is_empty(),
        if problems.is_empty() {
            format!("20/20 identical ground sets, iterations at most {:.3} of original (within alpha^2); r, r', s match oracles", worst_fraction)
        } else {
            problems.into_iter().take(5).collect::<Vec<_>>().join("; ")
        },
    )
}

fn indexes(set: &EvaluatedSet) -> Vec<usize> {
    set.triples.iter().map(|t| t.index).collect()
}

fn scan_oracle(full: &EvaluatedSet, n: usize) -> Vec<usize> {
    let mut hit = vec![false; n];
    let mut keep = Vec::new();
    for t in &full.triples {
        let fresh: Vec<usize> = t.flipped.iter().map(|f| f.0).filter(|&x| !hit[x]).collect();
        if !fresh.is_empty() {
            keep.push(t.index);
            fresh.into_iter().for_each(|x| hit[x] = true);
        }
    }
    keep
}

fn write_benchmark(dir: &Path, seed: u64) -> RunConfig {
    let data = mixed_benchmark(2000, 6, 4, seed);
    let model = fit(
        ModelKind::Logistic,
        &data,
        data.labels().unwrap(),
        &FitParams::default(),
    )
    .unwrap();
    write_csv(&data, dir.join("data.csv")).unwrap();
    data.schema()
        .clone()
        .with_label_column("label")
        .save(dir.join("schema.json"))
        .unwrap();
    model.save(dir.join("model.json")).unwrap();
    let mut cfg = RunConfig::from_toml(
        "[data]\ncsv = 'data.csv'\nschema = 'schema.json'\nmodel = 'model.json'\n",
    )
    .unwrap();
    cfg.resolve(dir);
    cfg.seed = Some(seed);
    cfg.out = dir.join("out");
    cfg.generation.n_s = 100;
    cfg.grid = GridConfig {
        m: 1000,
        k_max: Some(5.0),
        ..GridConfig::default()
    };
    cfg
}

fn stage_seconds(timings: &serde_json::Value, prefix: &str) -> f64 {
    timings["stages"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|s| s["stage"].as_str().unwrap().starts_with(prefix))
        .map(|s| s["seconds"].as_f64().unwrap())
        .sum()
}

/// Desk-scale ordering of GLOBE-CE against Fast AReS.
fn c6_desk_benchmark() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_benchmark(dir.path(), 1);
    run_config(Command::Bench, &cfg).unwrap();
    let out = dir.path().join("out");
    let csv = std::fs::read_to_string(out.join("bench.csv")).unwrap();
    let rows: BTreeMap<String, (f64, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (
                f[0].to_string(),
                (f[2].parse().unwrap(), f[3].parse().unwrap_or(f64::NAN)),
            )
        })
        .collect();
    let (g_cov, g_cost) = rows["GLOBE-CE"];
    let (a_cov, a_cost) = rows["Fast AReS (then_generation)"];
    let timings: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("timings.json")).unwrap()).unwrap();
    let g_time = stage_seconds(&timings, "globe_ce.");
    let a_time = stage_seconds(&timings, "ares_then_generation.");

    // best operating point on the coverage-cost profile reaching the AReS coverage
    let details: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("bench_details.json")).unwrap())
            .unwrap();
    let chosen: Translation =
        serde_json::from_value(details[0]["translations"][0].clone()).unwrap();
    let data = mixed_benchmark(2000, 6, 4, 1);
    let model = Model::load(dir.path().join("model.json")).unwrap();
    let aff = select_affected(&data, &model).unwrap();
    let grid = ScalarGrid::linear(5.0, 1000).unwrap();
    let st = GceStats::from_flips(
        &grid,
        first_flips(&model, &aff, &chosen, &grid, CubeOptions::default()).unwrap(),
        None,
    );
    let matched = profile_series(&st)
        .into_iter()
        .find(|p| p.coverage >= a_cov);

    let cov_ok = g_cov >= a_cov;
    let cost_ok = matched.as_ref().is_some_and(|p| p.avg_cost <= a_cost);
    let speed_ok = a_time >= 5.0 * g_time;
    let limits_ok = g_time < 5.0 && a_time < 120.0;
    check(
        cov_ok && cost_ok && speed_ok && limits_ok,
        format!(
            "coverage {:.1}% vs {:.1}% [{}]; cost at matched coverage {} vs {a_cost:.2} (full-grid {g_cost:.2}) [{}]; \
             time {g_time:.2}s vs {a_time:.2}s, ratio {:.2} (need 5) [{}]; stage limits [{}]",
            100.0 * g_cov,
            100.0 * a_cov,
            ok(cov_ok),
            matched.map_or("none".into(), |p| format!("{:.2} at k={:.3}", p.avg_cost, p.k)),
            ok(cost_ok),
            a_time / g_time,
            ok(speed_ok),
            ok(limits_ok),
        ),
    )
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "fail"
    }
}

/// Greedy union coverage never falls below the single best translation.
fn c7_diverse_dominance() -> Outcome {
    let mut worst_gain = f64::INFINITY;
    let mut bad = 0;
    for seed in 0..10u64 {
        let data = mixed_benchmark(600, 6, 4, 700 + seed);
        let model = fit(
            ModelKind::Logistic,
            &data,
            data.labels().unwrap(),
            &FitParams::default(),
        )
        .unwrap();
        let aff = select_affected(&data, &model).unwrap();
        let pool = sample_fixed_cost(
            aff.schema(),
            &GenerationConfig {
                n_s: 60,
                seed,
                ..Default::default()
            },
        )
        .unwrap();
        let grid = [ScalarGrid::linear(5.0, 200).unwrap()];
        let one = greedy_select(&pool, &aff, &model, &grid, 1, CubeOptions::default()).unwrap();
        let three = greedy_select(&pool, &aff, &model, &grid, 3, CubeOptions::default()).unwrap();
        let gain = three.union_coverage - one.union_coverage;
        worst_gain = worst_gain.min(gain);
        if gain < 0.0 || three.chosen[0] != one.chosen[0] {
            bad += 1;
        }
    }
    check(
        bad == 0,
        format!(
            "10 instances, {bad} violations; smallest union gain {:.1} points",
            100.0 * worst_gain
        ),
    )
}

/// Planted margin gap: B's minimum costs dominate A's.
///
/// Uses the sampling protocol grid (cost 2, `0 <= k <= 5`); an input left
/// uncovered within it counts as infinitely costly.
fn c8_bias_report() -> Outcome {
    let mut correct = 0;
    let mut failures = Vec::new();
    for seed in 0..100u64 {
        let (ds, model) = margin_gap(40, seed);
        let a = ds.filter(|r| r[0] == 1.0);
        let b = ds.filter(|r| r[1] == 1.0);
        let pool = sample_fixed_cost(
            ds.schema(),
            &GenerationConfig {
                n_s: 50,
                seed,
                ..Default::default()
            },
        )
        .unwrap();
        let grid = [ScalarGrid::linear(5.0, 1000).unwrap()];
        let report = compare_subgroups(
            ("A", &a),
            ("B", &b),
            &pool,
            &model,
            &grid,
            CompareOptions::default(),
        )
        .unwrap();
        let sorted = |s: &globe_ce::report::CostSummary| {
            let mut v: Vec<f64> = s
                .min_costs
                .iter()
                .map(|c| c.unwrap_or(f64::INFINITY))
                .collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let (ca, cb) = (sorted(&report.a.native), sorted(&report.b.native));
        let dominates = ca.iter().zip(&cb).all(|(x, y)| y >= x) && ca != cb;
        let gaps = &report.native_gaps;
        let sign = gaps.coverage < 0.0 || gaps.avg_cost.is_some_and(|g| g > 0.0);
        if dominates && sign {
            correct += 1;
        } else {
            failures.push(seed);
        }
    }
    check(
        correct == 100,
        format!("gap sign and per-input dominance correct in {correct}/100 seeds (failing seeds {failures:?})"),
    )
}

/// Every subcommand twice on the toy config, artifacts compared byte for byte.
fn c9_determinism() -> Outcome {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy/config.toml");
    let mut compared = 0;
    let mut problems = Vec::new();
    for command in [
        Command::Explain,
        Command::Compare,
        Command::Ares,
        Command::Bench,
        Command::Fit,
        Command::InspectModel,
    ] {
        let runs: Vec<(tempfile::TempDir, pipeline::RunOutcome)> = (0..2)
            .map(|_| {
                let dir = tempfile::tempdir().unwrap();
                let overrides = Overrides {
                    out: Some(dir.path().to_path_buf()),
                    ..Default::default()
                };
                let outcome = pipeline::run(command, &config, &overrides).unwrap();
                (dir, outcome)
            })
            .collect();
        let manifest: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(runs[0].0.path().join("manifest.json")).unwrap(),
        )
        .unwrap();
        let timing: Vec<&str> = manifest["timing_artifacts"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_str().unwrap())
            .collect();
        for name in manifest["artifacts"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_str().unwrap())
        {
            if timing.contains(&name) {
                continue;
            }
            let x = std::fs::read(runs[0].0.path().join(name)).unwrap();
            let y = std::fs::read(runs[1].0.path().join(name)).unwrap();
            compared += 1;
            if x != y {
                problems.push(format!("{}: {name}", command.as_str()));
            }
        }
        // the manifest embeds the output path, so compare it with that field dropped
        let strip = |dir: &Path| {
            let mut m: serde_json::Value =
                serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap())
                    .unwrap();
            m["config"]["out"] = serde_json::Value::Null;
            m
        };
        if strip(runs[0].0.path()) != strip(runs[1].0.path()) {
            problems.push(format!("{}: manifest.json", command.as_str()));
        }
        if runs[0].1.artifacts != runs[1].1.artifacts {
            problems.push(format!("{}: artifact lists differ", command.as_str()));
        }
    }
    check(
        problems.is_empty(),
        if problems.is_empty() {
            format!("6 subcommands x 2 runs, {compared} artifacts byte-identical")
        } else {
            problems.join("; ")
        },
    )
}

type Criterion = (&'static str, fn() -> Outcome);

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        (
            "1 categorical rule extraction exactness",
            c1_rule_extraction_exactness,
        ),
        ("2 worked scaling example", c2_worked_example),
        ("3 linear SVM optimality", c3_svm_optimality),
        ("4 evaluation cube contracts", c4_cube_contracts),
        ("5 Fast AReS stage-1 equivalence", c5_ares_stage_one),
        ("6 desk-scale benchmark ordering", c6_desk_benchmark),
        ("7 dGLOBE-CE dominance", c7_diverse_dominance),
        ("8 bias report correctness", c8_bias_report),
        ("9 determinism", c9_determinism),
    ];
    let mut failed = Vec::new();
    let mut err = std::io::stderr();
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        writeln!(err, "[{tag}] criterion {name}: {detail} ({secs:.1}s)").unwrap();
        if outcome.is_err() {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
