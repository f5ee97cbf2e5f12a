use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{item_codes, layout, row_codes, GroundMode, Item, Itemset, ThenSource, Triple};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::predictors::Predictor;
use crate::schema::FeatureSchema;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundParams {
    pub mode: GroundMode,
    pub eps2: usize,
    pub q: Option<f64>,
    pub then_source: ThenSource,
}

/// Candidate triples in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundSet {
    pub triples: Vec<Triple>,
    pub mode: GroundMode,
    /// Innermost-loop iterations spent building the set.
    pub inner_iterations: u64,
    /// RL items left after reduction (equals |RL| outside reduction mode).
    pub rl_used: usize,
    pub rl_total: usize,
}

impl GroundSet {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }
}

fn features(items: &[Item]) -> Vec<usize> {
    items.iter().map(|i| i.feature).collect()
}

/// Outer/inner pair admissible: feature-disjoint, within width, inner actionable.
fn pair_ok(schema: &FeatureSchema, outer: &[Item], inner: &[Item], eps2: usize) -> bool {
    outer.len() + inner.len() <= eps2
        && inner.iter().all(|c| schema.feature(c.feature).actionable)
        && !outer
            .iter()
            .any(|d| inner.iter().any(|c| c.feature == d.feature))
}

/// Then admissible for inner: same features, some value differs.
fn then_ok(inner: &[Item], then: &[Item]) -> bool {
    inner.len() == then.len()
        && inner.iter().zip(then).all(|(a, b)| a.feature == b.feature)
        && inner != then
}

/// Builds the ground set from subgroup descriptors `sd` and rules `rl`.
///
/// `data` (the mining dataset and model) is needed only for Then-generation.
pub fn generate_ground_set(
    sd: &[Itemset],
    rl: &[Itemset],
    schema: &FeatureSchema,
    params: &GroundParams,
    data: Option<(&Dataset, &dyn Predictor)>,
) -> Result<GroundSet> {
    let mut triples = Vec::new();
    let mut iterations = 0u64;
    let mut rl_used = rl.len();
    match params.mode {
        GroundMode::Original => {
            for d in sd {
                for c in rl {
                    for c2 in rl {
                        iterations += 1;
                        if pair_ok(schema, &d.items, &c.items, params.eps2)
                            && then_ok(&c.items, &c2.items)
                        {
                            triples.push(Triple {
                                outer: d.items.clone(),
                                inner: c.items.clone(),
                                then: c2.items.clone(),
                            });
                        }
                    }
                }
            }
        }
        GroundMode::RlReduction => {
            let mut combos: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
            for (i, c) in rl.iter().enumerate() {
                combos.entry(features(&c.items)).or_default().push(i);
            }
            let kept: Vec<usize> = (0..rl.len())
                .filter(|&i| combos[&features(&rl[i].items)].len() > 1)
                .collect();
            rl_used = kept.len();
            for d in sd {
                for &ci in &kept {
                    let c = &rl[ci];
                    if !pair_ok(schema, &d.items, &c.items, params.eps2) {
                        continue;
                    }
                    // partners share the feature combination and keep RL order
                    for &c2i in &combos[&features(&c.items)] {
                        iterations += 1;
                        let c2 = &rl[c2i];
                        if then_ok(&c.items, &c2.items) {
                            triples.push(Triple {
                                outer: d.items.clone(),
                                inner: c.items.clone(),
                                then: c2.items.clone(),
                            });
                        }
                    }
                }
            }
        }
        GroundMode::ThenGeneration => {
            let (dataset, predictor) = data.ok_or_else(|| {
                Error::InvalidArgument("then-generation needs the dataset and model".into())
            })?;
            let n = dataset.len();
            if n == 0 {
                return Err(Error::InvalidArgument(
                    "then-generation on an empty dataset".into(),
                ));
            }
            let q = params.q.unwrap_or(1.0 / n as f64);
            if !(q >= 1.0 / n as f64 - 1e-12 && q <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "q = {q} outside [1/|X|, 1] = [{}, 1]",
                    1.0 / n as f64
                )));
            }
            let codes = item_codes(dataset);
            let source: Vec<usize> = match params.then_source {
                ThenSource::All => (0..n).collect(),
                ThenSource::Positives => (0..n)
                    .filter(|&r| predictor.predict(dataset.row(r)) == 1)
                    .collect(),
            };
            for d in sd {
                let rows: Vec<usize> = source
                    .iter()
                    .copied()
                    .filter(|&r| d.items.iter().all(|it| codes[r][it.feature] == it.code))
                    .collect();
                for c in rl {
                    if !pair_ok(schema, &d.items, &c.items, params.eps2) {
                        continue;
                    }
                    let feats = features(&c.items);
                    let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
                    for &r in &rows {
                        iterations += 1;
                        *counts
                            .entry(feats.iter().map(|&f| codes[r][f]).collect())
                            .or_default() += 1;
                    }
                    let mut thens: Vec<(Vec<usize>, usize)> = counts
                        .into_iter()
                        .filter(|&(_, k)| k as f64 / n as f64 >= q - 1e-9)
                        .collect();
                    thens.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                    for (vals, _) in thens {
                        let then: Vec<Item> = feats
                            .iter()
                            .zip(vals)
                            .map(|(&f, v)| Item::new(f, v))
                            .collect();
                        if then_ok(&c.items, &then) {
                            triples.push(Triple {
                                outer: d.items.clone(),
                                inner: c.items.clone(),
                                then,
                            });
                        }
                    }
                }
            }
        }
    }
    let mut seen = HashSet::new();
    triples.retain(|t| seen.insert(t.clone()));
    Ok(GroundSet {
        triples,
        mode: params.mode,
        inner_iterations: iterations,
        rl_used,
        rl_total: rl.len(),
    })
}

/// A triple with its effect on the affected inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedTriple {
    pub triple: Triple,
    /// Position in the ground set.
    pub index: usize,
    pub applicable: usize,
    /// Flipped inputs (positions) with the cost of the applied change.
    pub flipped: Vec<(usize, f64)>,
}

impl EvaluatedTriple {
    pub fn flips(&self) -> usize {
        self.flipped.len()
    }

    pub fn avg_cost(&self) -> Option<f64> {
        (!self.flipped.is_empty())
            .then(|| self.flipped.iter().map(|f| f.1).sum::<f64>() / self.flipped.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedSet {
    pub triples: Vec<EvaluatedTriple>,
    pub n_inputs: usize,
    /// Triples evaluated, including those not kept.
    pub evaluated: usize,
}

impl EvaluatedSet {
    /// Fraction of inputs flipped by at least one kept triple.
    pub fn union_coverage(&self) -> f64 {
        let mut hit = vec![false; self.n_inputs];
        for t in &self.triples {
            for &(x, _) in &t.flipped {
                hit[x] = true;
            }
        }
        ratio(hit.iter().filter(|&&h| h).count(), self.n_inputs)
    }
}

pub(crate) fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub(crate) fn evaluate_triple(
    triple: &Triple,
    index: usize,
    inputs: &Dataset,
    codes: &[Vec<usize>],
    predictor: &dyn Predictor,
) -> EvaluatedTriple {
    let schema = inputs.schema();
    let lay = layout(schema);
    let mut applicable = 0;
    let mut flipped = Vec::new();
    for (x, row) in inputs.rows().enumerate() {
        if !triple.applies_to(&codes[x]) {
            continue;
        }
        applicable += 1;
        let moved = triple.apply(schema, row, &codes[x]);
        if predictor.predict(&moved) == 1 {
            flipped.push((x, lay.cost(row, &moved)));
        }
    }
    EvaluatedTriple {
        triple: triple.clone(),
        index,
        applicable,
        flipped,
    }
}

/// Evaluates triples in canonical order.
///
/// With `r`, the first `r` triples are evaluated and all kept. With
/// `r_prime`, the first `r_prime` are evaluated and only those increasing
/// the running union coverage are kept. With neither, everything is
/// evaluated and kept.
pub fn evaluate_ground_set(
    ground: &GroundSet,
    inputs: &Dataset,
    predictor: &dyn Predictor,
    r: Option<usize>,
    r_prime: Option<usize>,
) -> Result<EvaluatedSet> {
    if r.is_some() && r_prime.is_some() {
        return Err(Error::InvalidArgument(
            "r and r_prime are mutually exclusive".into(),
        ));
    }
    if predictor.dim() != inputs.dim() {
        return Err(Error::Dimension {
            expected: inputs.dim(),
            got: predictor.dim(),
        });
    }
    let limit = r.or(r_prime).unwrap_or(ground.len()).min(ground.len());
    let codes: Vec<Vec<usize>> = inputs
        .rows()
        .map(|row| row_codes(inputs.schema(), row))
        .collect();
    let all: Vec<EvaluatedTriple> = ground.triples[..limit]
        .par_iter()
        .enumerate()
        .map(|(i, t)| evaluate_triple(t, i, inputs, &codes, predictor))
        .collect();
    let triples = if r_prime.is_some() {
        let mut hit = vec![false; inputs.len()];
        all.into_iter()
            .filter(|t| {
                let mut gained = false;
                for &(x, _) in &t.flipped {
                    if !hit[x] {
                        hit[x] = true;
                        gained = true;
                    }
                }
                gained
            })
            .collect()
    } else {
        all
    };
    Ok(EvaluatedSet {
        triples,
        n_inputs: inputs.len(),
        evaluated: limit,
    })
}

/// Keeps the `s` triples flipping the most inputs (stable order among ties).
pub fn select_top(set: &EvaluatedSet, s: usize) -> Result<EvaluatedSet> {
    if s == 0 {
        return Err(Error::InvalidArgument("s must be at least 1".into()));
    }
    if s >= set.triples.len() {
        return Ok(set.clone());
    }
    let mut triples = set.triples.clone();
    triples.sort_by_key(|t| std::cmp::Reverse(t.flips()));
    triples.truncate(s);
    Ok(EvaluatedSet {
        triples,
        n_inputs: set.n_inputs,
        evaluated: set.evaluated,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::ares::mine_itemsets;
    use crate::predictors::Model;
    use crate::schema::FeatureSpec;

    fn setup() -> (Dataset, Model) {
        let s = Arc::new(
            FeatureSchema::new(vec![
                FeatureSpec::categorical("a", ["0", "1", "2"]),
                FeatureSpec::categorical("b", ["0", "1"]),
                FeatureSpec::continuous("x", 0.0, 1.0),
            ])
            .unwrap(),
        );
        let mut rows = Vec::new();
        for i in 0..40 {
            let mut r = vec![0.0; 6];
            r[i % 3] = 1.0;
            r[3 + (i / 3) % 2] = 1.0;
            r[5] = (i % 10) as f64 / 10.0 + 0.05;
            rows.push(r);
        }
        let ds = Dataset::from_rows(s, rows).unwrap();
        let m = Model::logistic(vec![-1.0, 0.0, 1.0, 0.0, 0.5, 1.0], -1.2);
        (ds, m)
    }

    fn params(mode: GroundMode) -> GroundParams {
        GroundParams {
            mode,
            eps2: 3,
            q: None,
            then_source: ThenSource::Positives,
        }
    }

    #[test]
    fn reduction_matches_original() {
        let (ds, m) = setup();
        let rl = mine_itemsets(&ds, 0.05, 2).unwrap();
        let s = ds.schema();
        let og = generate_ground_set(&rl, &rl, s, &params(GroundMode::Original), None).unwrap();
        let red = generate_ground_set(&rl, &rl, s, &params(GroundMode::RlReduction), None).unwrap();
        assert_eq!(og.triples, red.triples);
        assert!(!og.is_empty());
        let alpha = red.rl_used as f64 / red.rl_total as f64;
        assert!(red.inner_iterations as f64 <= alpha * alpha * og.inner_iterations as f64);
        for t in &og.triples {
            assert!(t.width() <= 3);
            assert_ne!(t.inner, t.then);
        }
        let tg = generate_ground_set(
            &rl,
            &rl,
            s,
            &params(GroundMode::ThenGeneration),
            Some((&ds, &m)),
        )
        .unwrap();
        assert!(!tg.is_empty());
        let bad = GroundParams {
            q: Some(0.001),
            ..params(GroundMode::ThenGeneration)
        };
        assert!(generate_ground_set(&rl, &rl, s, &bad, Some((&ds, &m))).is_err());
    }

    #[test]
    fn evaluation_caps() {
        let (ds, m) = setup();
        let rl = mine_itemsets(&ds, 0.05, 2).unwrap();
        let g = generate_ground_set(&rl, &rl, ds.schema(), &params(GroundMode::Original), None)
            .unwrap();
        let aff = crate::dataset::select_affected(&ds, &m).unwrap();
        let full = evaluate_ground_set(&g, &aff, &m, None, None).unwrap();
        assert_eq!(
            evaluate_ground_set(&g, &aff, &m, Some(g.len()), None).unwrap(),
            full
        );
        assert!(evaluate_ground_set(&g, &aff, &m, Some(1), Some(1)).is_err());
        let rp = evaluate_ground_set(&g, &aff, &m, None, Some(50)).unwrap();
        let first = EvaluatedSet {
            triples: full.triples[..50].to_vec(),
            ..full.clone()
        };
        assert_eq!(rp.union_coverage(), first.union_coverage());
        assert!(rp.triples.iter().all(|t| t.flips() > 0));
        let top = select_top(&full, 1).unwrap();
        assert_eq!(
            top.triples[0].flips(),
            full.triples.iter().map(|t| t.flips()).max().unwrap()
        );
        assert_eq!(select_top(&full, full.triples.len()).unwrap(), full);
    }
}
