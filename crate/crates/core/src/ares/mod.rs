//! Fast AReS: two-level recourse sets mined from frequent itemsets.
//!
//! Rows are discretized into items (categorical value index, or continuous
//! bin index). Candidate rules are triples `If outer: If inner, Then then`,
//! where `then` reassigns the features of `inner`. The pipeline mines
//! itemsets, builds a ground set of triples, evaluates (a prefix of) it,
//! optionally keeps the best `s`, and runs a local search over subsets.

mod apriori;
mod ground;
mod optimize;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gce::Layout;
use crate::predictors::Predictor;
use crate::schema::{extended_bin, FeatureKind, FeatureSchema};

pub use apriori::{mine_transactions, Item, Itemset};
pub use ground::{
    evaluate_ground_set, generate_ground_set, select_top, EvaluatedSet, EvaluatedTriple,
    GroundParams, GroundSet,
};
pub use optimize::{apply_recourse_set, optimize, OptimizeParams, RecourseSet};

/// Item code of every feature of every row.
pub fn item_codes(dataset: &Dataset) -> Vec<Vec<usize>> {
    dataset
        .rows()
        .map(|r| row_codes(dataset.schema(), r))
        .collect()
}

pub(crate) fn row_codes(schema: &FeatureSchema, row: &[f64]) -> Vec<usize> {
    schema
        .features()
        .iter()
        .enumerate()
        .map(|(i, f)| match f.kind {
            FeatureKind::Categorical { .. } => schema.category_of(row, i),
            FeatureKind::Continuous { min, max, bins } => {
                extended_bin(row[schema.offset(i)], min, max, bins).clamp(0, bins as i64 - 1)
                    as usize
            }
        })
        .collect()
}

/// Frequent itemsets of the discretized dataset.
pub fn mine_itemsets(dataset: &Dataset, p: f64, max_len: usize) -> Result<Vec<Itemset>> {
    mine_transactions(&apriori::transactions_of(&item_codes(dataset)), p, max_len)
}

/// `If outer: If inner, Then then`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub outer: Vec<Item>,
    pub inner: Vec<Item>,
    pub then: Vec<Item>,
}

fn matches(items: &[Item], codes: &[usize]) -> bool {
    items.iter().all(|it| codes[it.feature] == it.code)
}

impl Triple {
    pub fn applies_to(&self, codes: &[usize]) -> bool {
        matches(&self.outer, codes) && matches(&self.inner, codes)
    }

    /// Distinct features across the outer and inner conditions.
    pub fn width(&self) -> usize {
        let mut f: Vec<usize> = self
            .outer
            .iter()
            .chain(&self.inner)
            .map(|i| i.feature)
            .collect();
        f.sort_unstable();
        f.dedup();
        f.len()
    }

    /// Applies the Then assignment: categorical values become one-hot,
    /// continuous values move to the midpoint of the target bin. Features
    /// already holding the target code are left untouched.
    pub fn apply(&self, schema: &FeatureSchema, row: &[f64], codes: &[usize]) -> Vec<f64> {
        let mut out = row.to_vec();
        for it in &self.then {
            if codes[it.feature] == it.code {
                continue;
            }
            let f = schema.feature(it.feature);
            let span = schema.span(it.feature);
            match f.kind {
                FeatureKind::Categorical { .. } => {
                    out[span.clone()].fill(0.0);
                    out[span.start + it.code] = 1.0;
                }
                FeatureKind::Continuous { .. } => {
                    out[span.start] = f.bin_midpoint(it.code).expect("continuous bin");
                }
            }
        }
        out
    }

    pub fn render(&self, schema: &FeatureSchema) -> String {
        let outer = if self.outer.is_empty() {
            "all".to_string()
        } else {
            render_items(schema, &self.outer)
        };
        format!(
            "If {outer}:\n  If {}, Then {}",
            render_items(schema, &self.inner),
            render_items(schema, &self.then)
        )
    }
}

pub fn render_item(schema: &FeatureSchema, item: Item) -> String {
    let f = schema.feature(item.feature);
    match &f.kind {
        FeatureKind::Categorical { values } => format!("{} = {}", f.name, values[item.code]),
        FeatureKind::Continuous { .. } => {
            let edges = f.bin_edges().expect("continuous");
            let close = if item.code + 1 == edges.len() - 1 {
                ']'
            } else {
                ')'
            };
            format!(
                "{} in [{}, {}{close}",
                f.name,
                fmt_edge(edges[item.code]),
                fmt_edge(edges[item.code + 1])
            )
        }
    }
}

fn fmt_edge(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn render_items(schema: &FeatureSchema, items: &[Item]) -> String {
    items
        .iter()
        .map(|&i| render_item(schema, i))
        .collect::<Vec<_>>()
        .join(" and ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundMode {
    /// Every valid triple of SD x RL x RL.
    Original,
    /// Drops RL items whose feature combination occurs once, then as original.
    RlReduction,
    /// Then conditions mined from rows matching the outer condition.
    #[default]
    ThenGeneration,
}

impl GroundMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GroundMode::Original => "original",
            GroundMode::RlReduction => "rl_reduction",
            GroundMode::ThenGeneration => "then_generation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThenSource {
    /// Only rows the model predicts positively.
    #[default]
    Positives,
    /// Every row matching the outer condition.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AresConfig {
    /// Apriori support threshold.
    pub p: f64,
    /// Then-generation support threshold; defaults to `1 / |dataset|`.
    pub q: Option<f64>,
    pub r: Option<usize>,
    pub r_prime: Option<usize>,
    pub s: Option<usize>,
    pub lambda: f64,
    pub eps1: usize,
    pub eps2: usize,
    pub eps3: usize,
    pub mode: GroundMode,
    pub then_source: ThenSource,
    pub max_moves: usize,
}

impl Default for AresConfig {
    fn default() -> Self {
        AresConfig {
            p: 0.1,
            q: None,
            r: None,
            r_prime: None,
            s: None,
            lambda: 0.0,
            eps1: 20,
            eps2: 7,
            eps3: 10,
            mode: GroundMode::ThenGeneration,
            then_source: ThenSource::Positives,
            max_moves: 5000,
        }
    }
}

impl AresConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.p > 0.0 && self.p <= 1.0) {
            out.push(format!("ares.p ({}) must be in (0, 1]", self.p));
        }
        if let Some(q) = self.q {
            if !(q > 0.0 && q <= 1.0) {
                out.push(format!("ares.q ({q}) must be in (0, 1]"));
            }
        }
        if self.r.is_some() && self.r_prime.is_some() {
            out.push("ares.r and ares.r_prime are mutually exclusive".into());
        }
        if self.s == Some(0) {
            out.push("ares.s must be at least 1".into());
        }
        if self.eps1 == 0 || self.eps3 == 0 {
            out.push("ares.eps1 and ares.eps3 must be at least 1".into());
        }
        if self.eps2 < 2 {
            out.push(format!("ares.eps2 ({}) must be at least 2", self.eps2));
        }
        if !(self.lambda >= 0.0) {
            out.push(format!("ares.lambda ({}) must be nonnegative", self.lambda));
        }
        out
    }
}

/// Wall-clock seconds of each pipeline stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AresTimings {
    pub mining: f64,
    pub ground_set: f64,
    pub evaluation: f64,
    pub selection: f64,
    pub optimization: f64,
}

impl AresTimings {
    pub fn total(&self) -> f64 {
        self.mining + self.ground_set + self.evaluation + self.selection + self.optimization
    }
}

#[derive(Debug, Clone)]
pub struct AresOutcome {
    pub itemsets: usize,
    pub ground: GroundSet,
    pub evaluated: EvaluatedSet,
    pub recourse: RecourseSet,
    pub timings: AresTimings,
}

/// Runs the full pipeline. Itemsets are mined on `dataset`; recourse is
/// evaluated on the affected `inputs`. `subgroups` replaces the default
/// subgroup descriptors (the mined itemsets themselves).
pub fn run(
    dataset: &Dataset,
    inputs: &Dataset,
    predictor: &dyn Predictor,
    config: &AresConfig,
    subgroups: Option<Vec<Itemset>>,
) -> Result<AresOutcome> {
    let problems = config.problems();
    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }
    let mut timings = AresTimings::default();
    let t = Instant::now();
    let rl =
        mine_itemsets(dataset, config.p, config.eps2 - 1).map_err(|e| e.in_stage("ares mining"))?;
    timings.mining = t.elapsed().as_secs_f64();
    let sd = subgroups.unwrap_or_else(|| rl.clone());

    let t = Instant::now();
    let ground = generate_ground_set(
        &sd,
        &rl,
        dataset.schema(),
        &ground::GroundParams {
            mode: config.mode,
            eps2: config.eps2,
            q: config.q,
            then_source: config.then_source,
        },
        Some((dataset, predictor)),
    )
    .map_err(|e| e.in_stage("ares ground set"))?;
    timings.ground_set = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let evaluated = evaluate_ground_set(&ground, inputs, predictor, config.r, config.r_prime)
        .map_err(|e| e.in_stage("ares evaluation"))?;
    timings.evaluation = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let evaluated = match config.s {
        Some(s) => select_top(&evaluated, s).map_err(|e| e.in_stage("ares selection"))?,
        None => evaluated,
    };
    timings.selection = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let recourse = optimize(
        &evaluated,
        &OptimizeParams {
            lambda: config.lambda,
            eps1: config.eps1,
            eps3: config.eps3,
            max_moves: config.max_moves,
        },
    )
    .map_err(|e| e.in_stage("ares optimization"))?;
    timings.optimization = t.elapsed().as_secs_f64();

    Ok(AresOutcome {
        itemsets: rl.len(),
        ground,
        evaluated,
        recourse,
        timings,
    })
}

pub(crate) fn layout(schema: &FeatureSchema) -> Layout {
    Layout::new(schema)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::schema::FeatureSpec;

    fn schema() -> FeatureSchema {
        FeatureSchema::new(vec![
            FeatureSpec::categorical("c", ["a", "b"]),
            FeatureSpec::continuous("x", 0.0, 10.0),
        ])
        .unwrap()
    }

    #[test]
    fn codes_and_apply() {
        let s = Arc::new(schema());
        let ds =
            Dataset::from_rows(s.clone(), vec![vec![1.0, 0.0, 2.5], vec![0.0, 1.0, 10.0]]).unwrap();
        assert_eq!(item_codes(&ds), vec![vec![0, 2], vec![1, 9]]);
        let t = Triple {
            outer: vec![],
            inner: vec![Item::new(0, 0), Item::new(1, 2)],
            then: vec![Item::new(0, 1), Item::new(1, 5)],
        };
        assert!(t.applies_to(&[0, 2]));
        assert_eq!(t.apply(&s, ds.row(0), &[0, 2]), vec![0.0, 1.0, 5.5]);
        assert_eq!(t.width(), 2);
        assert_eq!(
            t.render(&s),
            "If all:\n  If c = a and x in [2, 3), Then c = b and x in [5, 6)"
        );
        assert_eq!(render_item(&s, Item::new(1, 9)), "x in [9, 10]");
    }

    #[test]
    fn config_checks() {
        let bad = AresConfig {
            r: Some(5),
            r_prime: Some(5),
            p: 0.0,
            eps2: 1,
            ..Default::default()
        };
        assert_eq!(bad.problems().len(), 3);
        assert!(AresConfig::default().problems().is_empty());
    }
}
