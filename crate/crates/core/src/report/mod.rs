//! Summaries of evaluated translations: coverage-cost profiles, minimum-cost
//! histograms, mean translations and two-subgroup comparisons.

mod emit;
pub mod svg;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gce::{first_flips, CubeOptions, GceStats, ScalarGrid, Translation};
use crate::generation::greedy_select;
use crate::predictors::Predictor;
use crate::rules::extract_rules;
use crate::schema::{FeatureKind, FeatureSchema};

pub use emit::{
    histogram_csv, profile_csv, write_bias_report, write_crc, write_histogram, write_profile,
    ArtifactWriter,
};

pub const DEFAULT_HISTOGRAM_WIDTH: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub k: f64,
    pub coverage: f64,
    pub avg_cost: f64,
}

/// Coverage and average cost at every grid scalar.
pub fn profile_series(stats: &GceStats) -> Vec<ProfilePoint> {
    stats
        .grid
        .iter()
        .zip(&stats.coverage)
        .zip(&stats.avg_cost)
        .map(|((&k, &coverage), &avg_cost)| ProfilePoint {
            k,
            coverage,
            avg_cost,
        })
        .collect()
}

/// Counts of covered inputs by minimum cost in bins `[i w, (i + 1) w)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub width: f64,
    pub counts: Vec<usize>,
    pub uncovered: usize,
}

impl Histogram {
    pub fn covered(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn bin_range(&self, i: usize) -> (f64, f64) {
        (i as f64 * self.width, (i + 1) as f64 * self.width)
    }
}

pub fn min_cost_histogram(stats: &GceStats, width: f64) -> Result<Histogram> {
    histogram_of(
        &stats
            .flips
            .iter()
            .map(|f| f.map(|f| f.cost))
            .collect::<Vec<_>>(),
        width,
    )
}

fn histogram_of(costs: &[Option<f64>], width: f64) -> Result<Histogram> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "histogram bin width {width} must be positive"
        )));
    }
    let mut counts: Vec<usize> = Vec::new();
    let mut uncovered = 0;
    for c in costs {
        match c {
            Some(c) => {
                let b = (c / width).floor().max(0.0) as usize;
                if b >= counts.len() {
                    counts.resize(b + 1, 0);
                }
                counts[b] += 1;
            }
            None => uncovered += 1,
        }
    }
    Ok(Histogram {
        width,
        counts,
        uncovered,
    })
}

/// Per-feature view of a translation over its covered inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureSummary {
    /// Mean of `min_scalar * delta` over covered inputs, in raw units.
    Continuous { feature: String, mean_change: f64 },
    /// Rules in force at the median covered scalar.
    Categorical { feature: String, rules: Vec<String> },
}

/// Mean applied change of every feature at the inputs' minimum scalars.
///
/// Categorical features report their rule set at the lower median of the
/// covered scalars; features inducing no rule get an empty list.
pub fn mean_translation(
    translation: &Translation,
    stats: &GceStats,
    schema: &FeatureSchema,
) -> Result<Vec<FeatureSummary>> {
    translation.validate(schema)?;
    let mut scalars: Vec<f64> = stats.covered().map(|(_, f)| f.scalar).collect();
    if scalars.is_empty() {
        return Err(Error::Precondition("no covered inputs to summarize".into()));
    }
    let mean_k = scalars.iter().sum::<f64>() / scalars.len() as f64;
    scalars.sort_by(f64::total_cmp);
    let median_k = scalars[(scalars.len() - 1) / 2];
    let rule_sets = extract_rules(translation, median_k, schema)?;
    Ok(schema
        .features()
        .iter()
        .enumerate()
        .map(|(i, f)| match f.kind {
            FeatureKind::Continuous { .. } => FeatureSummary::Continuous {
                feature: f.name.clone(),
                mean_change: mean_k * translation.delta[schema.offset(i)],
            },
            FeatureKind::Categorical { .. } => {
                let rs = rule_sets
                    .iter()
                    .find(|r| r.feature == i)
                    .expect("categorical rule set");
                FeatureSummary::Categorical {
                    feature: f.name.clone(),
                    rules: if rs.is_empty() {
                        vec![]
                    } else {
                        vec![rs.render(schema)]
                    },
                }
            }
        })
        .collect())
}

/// Distribution of per-input minimum costs of one translation on one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSummary {
    pub n_inputs: usize,
    pub coverage: f64,
    pub avg_cost: Option<f64>,
    pub median_cost: Option<f64>,
    /// Per input; `None` when uncovered.
    pub min_costs: Vec<Option<f64>>,
    pub histogram: Histogram,
}

impl CostSummary {
    pub fn from_stats(stats: &GceStats, width: f64) -> Result<Self> {
        Self::from_min_costs(
            stats.flips.iter().map(|f| f.map(|f| f.cost)).collect(),
            width,
        )
    }

    /// Summary of the cheapest cost per input across several translations.
    pub fn union(stats: &[GceStats], width: f64) -> Result<Self> {
        let n = stats.first().map_or(0, GceStats::n_inputs);
        if stats.iter().any(|s| s.n_inputs() != n) {
            return Err(Error::InvalidArgument(
                "statistics cover different inputs".into(),
            ));
        }
        let min_costs = (0..n)
            .map(|x| {
                stats
                    .iter()
                    .filter_map(|s| s.min_cost(x))
                    .fold(None, |acc: Option<f64>, c| {
                        Some(acc.map_or(c, |a| a.min(c)))
                    })
            })
            .collect();
        Self::from_min_costs(min_costs, width)
    }

    pub fn from_min_costs(min_costs: Vec<Option<f64>>, width: f64) -> Result<Self> {
        let mut covered: Vec<f64> = min_costs.iter().flatten().copied().collect();
        let n = covered.len();
        let avg_cost = (n > 0).then(|| covered.iter().sum::<f64>() / n as f64);
        covered.sort_by(f64::total_cmp);
        let median_cost = match n {
            0 => None,
            _ if n % 2 == 1 => Some(covered[n / 2]),
            _ => Some(0.5 * (covered[n / 2 - 1] + covered[n / 2])),
        };
        Ok(CostSummary {
            n_inputs: min_costs.len(),
            coverage: if min_costs.is_empty() {
                0.0
            } else {
                n as f64 / min_costs.len() as f64
            },
            avg_cost,
            median_cost,
            histogram: histogram_of(&min_costs, width)?,
            min_costs,
        })
    }

    /// Covered minimum costs in ascending order.
    pub fn sorted_costs(&self) -> Vec<f64> {
        let mut c: Vec<f64> = self.min_costs.iter().flatten().copied().collect();
        c.sort_by(f64::total_cmp);
        c
    }
}

/// One subgroup's own best translation and its results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupReport {
    pub label: String,
    /// Position of the chosen translation in the shared pool.
    pub chosen: usize,
    pub translation: Translation,
    pub profile: Vec<ProfilePoint>,
    pub mean_translation: Vec<FeatureSummary>,
    pub native: CostSummary,
    /// The other subgroup's translation applied to this subgroup.
    pub fluid: CostSummary,
}

/// `B - A` differences; `None` when either side is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaps {
    pub coverage: f64,
    pub avg_cost: Option<f64>,
    pub median_cost: Option<f64>,
}

impl Gaps {
    fn between(a: &CostSummary, b: &CostSummary) -> Self {
        let diff = |x: Option<f64>, y: Option<f64>| Some(y? - x?);
        Gaps {
            coverage: b.coverage - a.coverage,
            avg_cost: diff(a.avg_cost, b.avg_cost),
            median_cost: diff(a.median_cost, b.median_cost),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub a: SubgroupReport,
    pub b: SubgroupReport,
    /// Each subgroup under its own translation.
    pub native_gaps: Gaps,
    /// Both subgroups under A's translation.
    pub gaps_under_a: Gaps,
    /// Both subgroups under B's translation.
    pub gaps_under_b: Gaps,
}

/// Settings shared by both sides of a subgroup comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareOptions {
    pub histogram_width: f64,
    pub cube: CubeOptions,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            histogram_width: DEFAULT_HISTOGRAM_WIDTH,
            cube: CubeOptions::default(),
        }
    }
}

/// Picks the best translation of the shared pool for each subgroup and
/// evaluates both translations on both subgroups.
///
/// `grids` holds one shared grid or one per candidate. Swapping the
/// subgroups swaps `a` and `b` and negates every gap.
pub fn compare_subgroups(
    a: (&str, &Dataset),
    b: (&str, &Dataset),
    candidates: &[Translation],
    predictor: &dyn Predictor,
    grids: &[ScalarGrid],
    options: CompareOptions,
) -> Result<BiasReport> {
    for (label, ds) in [a, b] {
        if ds.is_empty() {
            return Err(Error::Precondition(format!(
                "subgroup `{label}` has no affected inputs"
            )));
        }
    }
    let grid_of = |i: usize| {
        if grids.len() == 1 {
            &grids[0]
        } else {
            &grids[i]
        }
    };
    let pick = |ds: &Dataset| -> Result<usize> {
        Ok(greedy_select(candidates, ds, predictor, grids, 1, options.cube)?.chosen[0])
    };
    let (ia, ib) = (pick(a.1)?, pick(b.1)?);
    let eval = |i: usize, ds: &Dataset| -> Result<GceStats> {
        let grid = grid_of(i);
        let flips = first_flips(predictor, ds, &candidates[i], grid, options.cube)?;
        Ok(GceStats::from_flips(grid, flips, None))
    };
    let w = options.histogram_width;
    let side = |label: &str, ds: &Dataset, own: usize, other: usize| -> Result<SubgroupReport> {
        let stats = eval(own, ds)?;
        let mean = if stats.covered_count() > 0 {
            mean_translation(&candidates[own], &stats, ds.schema())?
        } else {
            Vec::new()
        };
        Ok(SubgroupReport {
            label: label.to_string(),
            chosen: own,
            translation: candidates[own].clone(),
            profile: profile_series(&stats),
            mean_translation: mean,
            native: CostSummary::from_stats(&stats, w)?,
            fluid: CostSummary::from_stats(&eval(other, ds)?, w)?,
        })
    };
    let ra = side(a.0, a.1, ia, ib)?;
    let rb = side(b.0, b.1, ib, ia)?;
    Ok(BiasReport {
        native_gaps: Gaps::between(&ra.native, &rb.native),
        gaps_under_a: Gaps::between(&ra.native, &rb.fluid),
        gaps_under_b: Gaps::between(&ra.fluid, &rb.native),
        a: ra,
        b: rb,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::gce::FirstFlip;
    use crate::predictors::Model;
    use crate::schema::FeatureSpec;

    fn flip(index: usize, scalar: f64, cost: f64) -> Option<FirstFlip> {
        Some(FirstFlip {
            index,
            scalar,
            cost,
        })
    }

    #[test]
    fn profile_and_histogram() {
        let grid = ScalarGrid::linear(2.0, 3).unwrap();
        let stats = GceStats::from_flips(
            &grid,
            vec![flip(1, 1.0, 1.2), None, flip(2, 2.0, 0.4)],
            None,
        );
        let p = profile_series(&stats);
        assert_eq!(p.len(), 3);
        assert_eq!(
            p[0],
            ProfilePoint {
                k: 0.0,
                coverage: 0.0,
                avg_cost: 0.0
            }
        );
        assert!(p.windows(2).all(|w| w[0].coverage <= w[1].coverage));
        let h = min_cost_histogram(&stats, 1.0).unwrap();
        assert_eq!(h.counts, vec![1, 1]);
        assert_eq!(h.uncovered, 1);
        assert_eq!(h.bin_range(1), (1.0, 2.0));
        assert!(min_cost_histogram(&stats, 0.0).is_err());
        let empty = GceStats::from_flips(&grid, vec![None, None], None);
        assert!(profile_series(&empty)
            .iter()
            .all(|p| p.coverage == 0.0 && p.avg_cost == 0.0));
    }

    #[test]
    fn mean_translation_constant_scalars() {
        let schema = FeatureSchema::new(vec![
            FeatureSpec::continuous("a", 0.0, 10.0),
            FeatureSpec::continuous("b", 0.0, 10.0),
        ])
        .unwrap();
        let grid = ScalarGrid::linear(2.0, 3).unwrap();
        let stats = GceStats::from_flips(&grid, vec![flip(2, 2.0, 1.0), flip(2, 2.0, 1.0)], None);
        let got = mean_translation(&Translation::manual(vec![1.0, 0.0]), &stats, &schema).unwrap();
        assert_eq!(
            got,
            vec![
                FeatureSummary::Continuous {
                    feature: "a".into(),
                    mean_change: 2.0
                },
                FeatureSummary::Continuous {
                    feature: "b".into(),
                    mean_change: 0.0
                },
            ]
        );
        let none = GceStats::from_flips(&grid, vec![None], None);
        assert!(mean_translation(&Translation::manual(vec![1.0, 0.0]), &none, &schema).is_err());
    }

    #[test]
    fn identical_subgroups_have_zero_gaps() {
        let schema =
            Arc::new(FeatureSchema::new(vec![FeatureSpec::continuous("a", 0.0, 10.0)]).unwrap());
        let ds = Dataset::from_rows(schema, vec![vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let model = Model::logistic(vec![1.0], -5.0);
        let pool = vec![
            Translation::manual(vec![-1.0]),
            Translation::manual(vec![1.0]),
        ];
        let grid = ScalarGrid::linear(8.0, 81).unwrap();
        let r = compare_subgroups(
            ("a", &ds),
            ("b", &ds),
            &pool,
            &model,
            &[grid],
            CompareOptions::default(),
        )
        .unwrap();
        assert_eq!(r.a.chosen, 1);
        assert_eq!(
            r.native_gaps,
            Gaps {
                coverage: 0.0,
                avg_cost: Some(0.0),
                median_cost: Some(0.0)
            }
        );
        assert_eq!(r.a.fluid.min_costs, r.b.native.min_costs);
    }
}
