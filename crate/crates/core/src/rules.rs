//! If/Then rules induced by categorical translations and the cumulative
//! rules chart built from their activation thresholds.
//!
//! For a categorical block `delta` with argmax `D` (ties to the lowest
//! index), scaling by `k` turns origin value `F` into `D` exactly when
//! `k * delta[F] + 1 < k * delta[D]`. Each origin therefore has a lower-bound
//! scalar `1 / (delta[D] - delta[F])`, and rules accumulate as `k` grows.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gce::{check_inputs, CubeOptions, Layout, Translation};
use crate::predictors::Predictor;
use crate::schema::{argmax, FeatureSchema};

/// Lower-bound activation scalar of every value in a categorical block.
///
/// The argmax and any value tied with it get `+inf`.
pub fn lower_bounds(block: &[f64]) -> Vec<f64> {
    let top = argmax(block);
    block
        .iter()
        .map(|&d| {
            let gap = block[top] - d;
            if gap > 0.0 {
                1.0 / gap
            } else {
                f64::INFINITY
            }
        })
        .collect()
}

/// True when rounding `onehot(origin) + k * block` leaves `origin`.
///
/// Equivalent to the strict threshold test, with exact float ties settled the
/// way rounding settles them.
pub fn origin_changes(block: &[f64], origin: usize, k: f64) -> bool {
    let top = argmax(block);
    if top == origin {
        return false;
    }
    let own = 1.0 + k * block[origin];
    let best = k * block[top];
    if own < best {
        return true;
    }
    own == best && block[..origin].iter().any(|&d| k * d == best)
}

/// Rules of one categorical feature at a fixed scalar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRuleSet {
    pub feature: usize,
    pub name: String,
    pub then_value: usize,
    /// Origins turned into `then_value`, ascending.
    pub if_set: Vec<usize>,
    pub lower_bounds: Vec<f64>,
}

impl FeatureRuleSet {
    pub fn is_empty(&self) -> bool {
        self.if_set.is_empty()
    }

    /// "If a or b, Then c", using the schema's value labels.
    pub fn render(&self, schema: &FeatureSchema) -> String {
        render_rule(schema, self.feature, &self.if_set, self.then_value)
    }

    /// "If a or b or d, Then c" without compressing to the negated form.
    pub fn render_listed(&self, schema: &FeatureSchema) -> String {
        let labels = labels(schema, self.feature);
        format!(
            "If {}, Then {}",
            join_or(&self.if_set, labels),
            labels[self.then_value]
        )
    }

    /// Negated form listing the values that are left alone: "If Not (c or d), Then c".
    pub fn render_negated(&self, schema: &FeatureSchema) -> String {
        let n = self.lower_bounds.len();
        let kept: Vec<usize> = (0..n).filter(|v| !self.if_set.contains(v)).collect();
        let labels = labels(schema, self.feature);
        let list = join_or(&kept, labels);
        let list = if kept.len() > 1 {
            format!("({list})")
        } else {
            list
        };
        format!("If Not {list}, Then {}", labels[self.then_value])
    }
}

fn labels(schema: &FeatureSchema, feature: usize) -> &[String] {
    schema
        .feature(feature)
        .values()
        .expect("categorical feature")
}

fn join_or(values: &[usize], labels: &[String]) -> String {
    values
        .iter()
        .map(|&v| labels[v].as_str())
        .collect::<Vec<_>>()
        .join(" or ")
}

/// Renders a rule, compressing "all values but the target" to "If Not t, Then t".
pub fn render_rule(
    schema: &FeatureSchema,
    feature: usize,
    if_set: &[usize],
    then_value: usize,
) -> String {
    let labels = labels(schema, feature);
    if if_set.len() + 1 == labels.len() && !if_set.contains(&then_value) && labels.len() > 2 {
        let t = &labels[then_value];
        return format!("If Not {t}, Then {t}");
    }
    format!(
        "If {}, Then {}",
        join_or(if_set, labels),
        labels[then_value]
    )
}

/// One rule set per categorical feature at scalar `k`.
pub fn extract_rules(
    translation: &Translation,
    k: f64,
    schema: &FeatureSchema,
) -> Result<Vec<FeatureRuleSet>> {
    translation.validate(schema)?;
    if !(k >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "scalar {k} must be nonnegative"
        )));
    }
    Ok(schema
        .features()
        .iter()
        .enumerate()
        .filter(|(_, f)| f.is_categorical())
        .map(|(i, f)| {
            let block = &translation.delta[schema.span(i)];
            FeatureRuleSet {
                feature: i,
                name: f.name.clone(),
                then_value: argmax(block),
                if_set: (0..block.len())
                    .filter(|&o| origin_changes(block, o, k))
                    .collect(),
                lower_bounds: lower_bounds(block),
            }
        })
        .collect())
}

/// A single origin value starting to map to the feature's Then value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Activation {
    pub threshold: f64,
    pub feature: usize,
    pub origin: usize,
    pub then_value: usize,
}

/// Every finite activation, ascending by threshold (then feature, then origin).
pub fn rules_sequence(
    translation: &Translation,
    schema: &FeatureSchema,
) -> Result<Vec<Activation>> {
    translation.validate(schema)?;
    let mut out = Vec::new();
    for (i, f) in schema.features().iter().enumerate() {
        if !f.is_categorical() {
            continue;
        }
        let block = &translation.delta[schema.span(i)];
        let then_value = argmax(block);
        for (origin, k) in lower_bounds(block).into_iter().enumerate() {
            if k.is_finite() {
                out.push(Activation {
                    threshold: k,
                    feature: i,
                    origin,
                    then_value,
                });
            }
        }
    }
    out.sort_by(|a, b| {
        a.threshold
            .total_cmp(&b.threshold)
            .then(a.feature.cmp(&b.feature))
            .then(a.origin.cmp(&b.origin))
    });
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrcMode {
    /// Equally spaced positions through the activation sequence.
    #[default]
    Spaced,
    /// Greedy choice of scalars by coverage, then by total cost.
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrcRow {
    /// Scalar the row is evaluated at.
    pub scalar: f64,
    /// Largest activation threshold included in the row.
    pub threshold: f64,
    pub features: Vec<String>,
    pub new_rules: Vec<String>,
    pub new_coverage: f64,
    pub new_cost: Option<f64>,
    pub coverage: f64,
    pub cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleChart {
    pub rows: Vec<CrcRow>,
    pub mode: CrcMode,
    pub n_inputs: usize,
}

fn fmt_cost(c: Option<f64>) -> String {
    c.map_or_else(|| "-".to_string(), |c| format!("{c:.2}"))
}

impl RuleChart {
    pub fn to_markdown(&self) -> String {
        let mut out = String::from(
            "| Feature(s) | New Rule Added | New Inputs Coverage | New Inputs Cost | All Inputs Coverage | All Inputs Cost |\n\
             |---|---|---|---|---|---|\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "| {} | {} | +{:.1}% | {} | {:.1}% | {} |",
                r.features.join(", "),
                r.new_rules.join("; "),
                100.0 * r.new_coverage,
                fmt_cost(r.new_cost),
                100.0 * r.coverage,
                fmt_cost(r.cost)
            );
        }
        out
    }

    /// Delimited table with numeric columns left unformatted for machine use.
    pub fn to_delimited(&self, sep: char) -> String {
        let head = [
            "features",
            "new_rule_added",
            "new_coverage",
            "new_cost",
            "all_coverage",
            "all_cost",
            "scalar",
            "threshold",
        ];
        let mut out = head.join(&sep.to_string());
        out.push('\n');
        let quote = |s: String| {
            if s.contains(sep) || s.contains('"') {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s
            }
        };
        for r in &self.rows {
            let cells = [
                quote(r.features.join("; ")),
                quote(r.new_rules.join("; ")),
                format!("{:.6}", r.new_coverage),
                r.new_cost.map_or(String::new(), |c| format!("{c:.6}")),
                format!("{:.6}", r.coverage),
                r.cost.map_or(String::new(), |c| format!("{c:.6}")),
                format!("{:.9}", r.scalar),
                format!("{:.9}", r.threshold),
            ];
            out.push_str(&cells.join(&sep.to_string()));
            out.push('\n');
        }
        out
    }
}

/// Cumulative rules chart of `translation` over `inputs`.
///
/// Each row is evaluated strictly between its last activation threshold and
/// the next distinct one, so exactly the listed rules are in force.
pub fn build_crc(
    translation: &Translation,
    inputs: &Dataset,
    predictor: &dyn Predictor,
    rows_wanted: usize,
    mode: CrcMode,
    options: CubeOptions,
) -> Result<RuleChart> {
    if rows_wanted == 0 {
        return Err(Error::InvalidArgument(
            "rule chart needs at least one row".into(),
        ));
    }
    let schema = inputs.schema();
    let seq = rules_sequence(translation, schema)?;
    if seq.is_empty() {
        return Err(Error::Capability(
            "translation induces no categorical rules; use the mean-translation summary".into(),
        ));
    }
    // candidate scalar after each activation position
    let scalars: Vec<f64> = (0..seq.len())
        .map(|p| {
            let t = seq[p].threshold;
            match seq[p + 1..].iter().find(|a| a.threshold > t) {
                Some(next) => 0.5 * (t + next.threshold),
                None => 1.5 * t,
            }
        })
        .collect();
    // activations sharing a threshold collapse into the last position
    let positions: Vec<usize> = (0..seq.len())
        .filter(|&p| p + 1 == seq.len() || seq[p + 1].threshold > seq[p].threshold)
        .collect();

    check_inputs(predictor, inputs, std::slice::from_ref(translation))?;
    let layout = Layout::new(schema);
    // per input and candidate: flipped and cost at that candidate alone
    let per_candidate: Vec<Vec<Option<f64>>> = {
        let mut buf = vec![0.0; layout.dim];
        positions
            .iter()
            .map(|&p| {
                inputs
                    .rows()
                    .map(|x| {
                        layout.round_translated(
                            x,
                            &translation.delta,
                            scalars[p],
                            options.clamp,
                            &mut buf,
                        );
                        (predictor.predict(&buf) == 1).then(|| layout.cost(x, &buf))
                    })
                    .collect()
            })
            .collect()
    };

    let chosen: Vec<usize> = match mode {
        CrcMode::Spaced => spaced(positions.len(), rows_wanted),
        CrcMode::Greedy => greedy(&per_candidate, inputs.len(), rows_wanted),
    };

    let n = inputs.len();
    let mut covered: Vec<bool> = vec![false; n];
    let (mut all_count, mut all_cost) = (0usize, 0.0);
    let mut rows = Vec::with_capacity(chosen.len());
    let mut prev_pos: Option<usize> = None;
    for &c in &chosen {
        let pos = positions[c];
        let start = prev_pos.map_or(0, |p| p + 1);
        let new: &[Activation] = &seq[start..=pos];
        prev_pos = Some(pos);

        let mut features = Vec::new();
        let mut new_rules = Vec::new();
        for a in new {
            let name = &schema.feature(a.feature).name;
            if !features.contains(name) {
                features.push(name.clone());
                let origins: Vec<usize> = new
                    .iter()
                    .filter(|b| b.feature == a.feature)
                    .map(|b| b.origin)
                    .collect();
                new_rules.push(render_rule(schema, a.feature, &origins, a.then_value));
            }
        }

        let (mut new_count, mut new_cost) = (0usize, 0.0);
        for (x, cov) in covered.iter_mut().enumerate() {
            if *cov {
                continue;
            }
            if let Some(cost) = per_candidate[c][x] {
                *cov = true;
                new_count += 1;
                new_cost += cost;
            }
        }
        all_count += new_count;
        all_cost += new_cost;
        rows.push(CrcRow {
            scalar: scalars[pos],
            threshold: seq[pos].threshold,
            features,
            new_rules,
            new_coverage: ratio(new_count, n),
            new_cost: (new_count > 0).then(|| new_cost / new_count as f64),
            coverage: ratio(all_count, n),
            cost: (all_count > 0).then(|| all_cost / all_count as f64),
        });
    }
    Ok(RuleChart {
        rows,
        mode,
        n_inputs: n,
    })
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// `r` indices spread evenly over `0..len`, always including the last.
fn spaced(len: usize, r: usize) -> Vec<usize> {
    if r >= len {
        return (0..len).collect();
    }
    if r == 1 {
        return vec![len - 1];
    }
    let mut out: Vec<usize> = (0..r)
        .map(|j| ((j * (len - 1)) as f64 / (r - 1) as f64).round() as usize)
        .collect();
    out.dedup();
    out
}

fn greedy(per_candidate: &[Vec<Option<f64>>], n: usize, r: usize) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    for _ in 0..r.min(per_candidate.len()) {
        let mut best: Option<(usize, usize, f64)> = None;
        for c in 0..per_candidate.len() {
            if chosen.contains(&c) {
                continue;
            }
            let mut trial = chosen.clone();
            trial.push(c);
            trial.sort_unstable();
            let (count, cost) = union_value(per_candidate, &trial, n);
            let better = match best {
                None => true,
                Some((_, bc, bcost)) => count > bc || (count == bc && cost < bcost),
            };
            if better {
                best = Some((c, count, cost));
            }
        }
        let (c, ..) = best.expect("candidate available");
        chosen.push(c);
    }
    chosen.sort_unstable();
    chosen
}

/// Covered count and total first-flip cost of a sorted candidate subset.
fn union_value(per_candidate: &[Vec<Option<f64>>], subset: &[usize], n: usize) -> (usize, f64) {
    let (mut count, mut total) = (0, 0.0);
    for x in 0..n {
        if let Some(c) = subset.iter().find_map(|&c| per_candidate[c][x]) {
            count += 1;
            total += c;
        }
    }
    (count, total)
}
