use serde::{Deserialize, Serialize};

use super::ground::ratio;
use super::{row_codes, EvaluatedSet, EvaluatedTriple, Item};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::predictors::Predictor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeParams {
    pub lambda: f64,
    /// Maximum number of triples.
    pub eps1: usize,
    /// Maximum number of distinct outer conditions.
    pub eps3: usize,
    /// Accepted-move budget.
    pub max_moves: usize,
}

impl Default for OptimizeParams {
    fn default() -> Self {
        OptimizeParams {
            lambda: 0.0,
            eps1: 20,
            eps3: 10,
            max_moves: 5000,
        }
    }
}

/// Chosen triples with their combined quality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecourseSet {
    pub triples: Vec<EvaluatedTriple>,
    pub objective: f64,
    pub coverage: f64,
    pub avg_cost: Option<f64>,
    pub n_inputs: usize,
    pub moves: usize,
    /// Objective of the starting singleton.
    pub initial_objective: f64,
}

impl RecourseSet {
    pub fn outer_count(&self) -> usize {
        distinct_outers(self.triples.iter().map(|t| &t.triple.outer))
    }
}

fn distinct_outers<'a>(outers: impl Iterator<Item = &'a Vec<Item>>) -> usize {
    let mut seen: Vec<&Vec<Item>> = Vec::new();
    for o in outers {
        if !seen.contains(&o) {
            seen.push(o);
        }
    }
    seen.len()
}

struct Scorer<'a> {
    v: &'a [EvaluatedTriple],
    n: usize,
    lambda: f64,
}

impl Scorer<'_> {
    /// Per-input minimum cost over the chosen triples (`INF` when uncovered).
    fn best(&self, chosen: &[usize]) -> Vec<f64> {
        let mut best = vec![f64::INFINITY; self.n];
        for &t in chosen {
            for &(x, c) in &self.v[t].flipped {
                if c < best[x] {
                    best[x] = c;
                }
            }
        }
        best
    }

    fn value(&self, best: &[f64]) -> (f64, f64, Option<f64>) {
        let (mut count, mut sum) = (0usize, 0.0);
        for &b in best {
            if b.is_finite() {
                count += 1;
                sum += b;
            }
        }
        let coverage = ratio(count, self.n);
        let avg = (count > 0).then(|| sum / count as f64);
        (coverage - self.lambda * avg.unwrap_or(0.0), coverage, avg)
    }

    /// Objective of `best` with triple `t` added, without materializing it.
    fn with(&self, best: &[f64], t: usize) -> f64 {
        let (mut count, mut sum) = (0usize, 0.0);
        for &b in best {
            if b.is_finite() {
                count += 1;
                sum += b;
            }
        }
        for &(x, c) in &self.v[t].flipped {
            let b = best[x];
            if b.is_infinite() {
                count += 1;
                sum += c;
            } else if c < b {
                sum -= b - c;
            }
        }
        let coverage = ratio(count, self.n);
        let avg = if count > 0 { sum / count as f64 } else { 0.0 };
        coverage - self.lambda * avg
    }
}

/// Local search for `coverage(R) - lambda * avg_cost(R)` subject to
/// `|R| <= eps1` and at most `eps3` distinct outer conditions.
///
/// Starts from the best singleton and repeatedly applies the first strictly
/// improving move, trying additions, then deletions, then 1-for-1 exchanges,
/// each in ground-set order.
pub fn optimize(set: &EvaluatedSet, params: &OptimizeParams) -> Result<RecourseSet> {
    if set.triples.is_empty() {
        return Err(Error::InvalidArgument("empty ground set".into()));
    }
    if params.eps1 == 0 || params.eps3 == 0 {
        return Err(Error::InvalidArgument(
            "eps1 and eps3 must be at least 1".into(),
        ));
    }
    let v = &set.triples;
    let sc = Scorer {
        v,
        n: set.n_inputs,
        lambda: params.lambda,
    };
    let feasible = |chosen: &[usize]| {
        chosen.len() <= params.eps1
            && distinct_outers(chosen.iter().map(|&i| &v[i].triple.outer)) <= params.eps3
    };
    const EPS: f64 = 1e-12;

    let empty = vec![f64::INFINITY; sc.n];
    let mut start = 0;
    let mut start_val = f64::NEG_INFINITY;
    for t in 0..v.len() {
        let val = sc.with(&empty, t);
        if val > start_val + EPS {
            start = t;
            start_val = val;
        }
    }
    let mut chosen = vec![start];
    let mut current = start_val;
    let mut moves = 0;

    'search: while moves < params.max_moves {
        let best = sc.best(&chosen);
        // additions
        if chosen.len() < params.eps1 {
            for t in 0..v.len() {
                if chosen.contains(&t) {
                    continue;
                }
                let mut trial = chosen.clone();
                trial.push(t);
                if !feasible(&trial) {
                    continue;
                }
                let val = sc.with(&best, t);
                if val > current + EPS {
                    chosen = trial;
                    current = val;
                    moves += 1;
                    continue 'search;
                }
            }
        }
        // deletions
        if chosen.len() > 1 {
            for pos in 0..chosen.len() {
                let mut trial = chosen.clone();
                trial.remove(pos);
                let (val, ..) = sc.value(&sc.best(&trial));
                if val > current + EPS {
                    chosen = trial;
                    current = val;
                    moves += 1;
                    continue 'search;
                }
            }
        }
        // exchanges
        for pos in 0..chosen.len() {
            let mut base = chosen.clone();
            base.remove(pos);
            let base_best = sc.best(&base);
            for t in 0..v.len() {
                if chosen.contains(&t) {
                    continue;
                }
                let mut trial = base.clone();
                trial.push(t);
                if !feasible(&trial) {
                    continue;
                }
                let val = sc.with(&base_best, t);
                if val > current + EPS {
                    chosen = trial;
                    current = val;
                    moves += 1;
                    continue 'search;
                }
            }
        }
        break;
    }
    chosen.sort_unstable();
    let (objective, coverage, avg_cost) = sc.value(&sc.best(&chosen));
    Ok(RecourseSet {
        triples: chosen.iter().map(|&i| v[i].clone()).collect(),
        objective,
        coverage,
        avg_cost,
        n_inputs: set.n_inputs,
        moves,
        initial_objective: start_val,
    })
}

/// Coverage and average minimum cost of `set` recomputed on `inputs`.
///
/// Each input takes the cheapest applicable triple that flips it.
pub fn apply_recourse_set(
    set: &RecourseSet,
    inputs: &Dataset,
    predictor: &dyn Predictor,
) -> Result<(f64, Option<f64>)> {
    if predictor.dim() != inputs.dim() {
        return Err(Error::Dimension {
            expected: inputs.dim(),
            got: predictor.dim(),
        });
    }
    let schema = inputs.schema();
    let lay = super::layout(schema);
    let (mut count, mut sum) = (0usize, 0.0);
    for row in inputs.rows() {
        let codes = row_codes(schema, row);
        let best = set
            .triples
            .iter()
            .filter(|t| t.triple.applies_to(&codes))
            .filter_map(|t| {
                let moved = t.triple.apply(schema, row, &codes);
                (predictor.predict(&moved) == 1).then(|| lay.cost(row, &moved))
            })
            .fold(f64::INFINITY, f64::min);
        if best.is_finite() {
            count += 1;
            sum += best;
        }
    }
    Ok((
        ratio(count, inputs.len()),
        (count > 0).then(|| sum / count as f64),
    ))
}
