//! Candidate translation generators and greedy coverage selection.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gce::{
    check_inputs, covers_bounded, first_flips_unchecked, CubeOptions, Provenance, ScalarGrid,
    Translation,
};
use crate::predictors::{sigmoid, Predictor};
use crate::schema::{FeatureKind, FeatureSchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Uniform fixed-cost sampling.
    #[default]
    Uniform,
    /// Fixed-cost sampling with features drawn by tree importance.
    Importance,
    /// Proximal gradient descent on a differentiable model.
    Gradient,
    /// Closed-form minimum-cost directions of a linear model.
    SvmClosedForm,
}

impl GeneratorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GeneratorKind::Uniform => "uniform",
            GeneratorKind::Importance => "importance",
            GeneratorKind::Gradient => "gradient",
            GeneratorKind::SvmClosedForm => "svm_closed_form",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub kind: GeneratorKind,
    /// Translations kept after greedy selection.
    pub n: usize,
    /// Candidates sampled.
    pub n_s: usize,
    /// Fixed nominal cost of every sample.
    pub c: f64,
    /// Features touched per sample.
    pub n_f: usize,
    /// Sparsity exponent applied to uniform magnitudes.
    pub p: f64,
    pub seed: u64,
    pub lambda: f64,
    pub steps: usize,
    pub step_size: f64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            kind: GeneratorKind::Uniform,
            n: 1,
            n_s: 1000,
            c: 2.0,
            n_f: 2,
            p: 1.0,
            seed: 0,
            lambda: 0.0,
            steps: 200,
            step_size: 1.0,
        }
    }
}

impl GenerationConfig {
    /// Every violated constraint, empty when valid.
    pub fn problems(&self, schema: &FeatureSchema) -> Vec<String> {
        let mut out = Vec::new();
        if self.n < 1 {
            out.push("generation.n must be at least 1".into());
        }
        if self.n_s < self.n {
            out.push(format!(
                "generation.n_s ({}) must be at least n ({})",
                self.n_s, self.n
            ));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            out.push(format!("generation.c ({}) must be positive", self.c));
        }
        if self.n_f < 1 || self.n_f > schema.len() {
            out.push(format!(
                "generation.n_f ({}) must be in [1, {}]",
                self.n_f,
                schema.len()
            ));
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            out.push(format!("generation.p ({}) must be at least 1", self.p));
        }
        if !(self.lambda >= 0.0) {
            out.push(format!(
                "generation.lambda ({}) must be nonnegative",
                self.lambda
            ));
        }
        if !(self.step_size > 0.0) {
            out.push(format!(
                "generation.step_size ({}) must be positive",
                self.step_size
            ));
        }
        out
    }

    pub fn validate(&self, schema: &FeatureSchema) -> Result<()> {
        let problems = self.problems(schema);
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

/// Nominal cost used to normalize samples.
///
/// Continuous entries cost `weight * |delta| / bin width`; a categorical group
/// costs `weight * max(0, largest entry)`.
pub fn nominal_cost(delta: &[f64], schema: &FeatureSchema) -> Result<f64> {
    schema.check_dim(delta.len())?;
    Ok(schema
        .features()
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let block = &delta[schema.span(i)];
            match &f.kind {
                FeatureKind::Continuous { .. } => {
                    f.cost_weight * block[0].abs() / f.bin_width().expect("continuous")
                }
                FeatureKind::Categorical { .. } => {
                    f.cost_weight * block.iter().copied().fold(0.0, f64::max)
                }
            }
        })
        .sum())
}

fn actionable(schema: &FeatureSchema) -> Vec<usize> {
    (0..schema.len())
        .filter(|&i| schema.feature(i).actionable)
        .collect()
}

fn draw(rng: &mut ChaCha8Rng, p: f64) -> f64 {
    let u: f64 = rng.random();
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    sign * u.powf(p)
}

fn sample_with(
    schema: &FeatureSchema,
    config: &GenerationConfig,
    generator: &str,
    mut choose: impl FnMut(&mut ChaCha8Rng) -> Vec<usize>,
) -> Result<Vec<Translation>> {
    config.validate(schema)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = Vec::with_capacity(config.n_s);
    let mut delta = vec![0.0; schema.dim()];
    for s in 0..config.n_s {
        let mut attempts = 0;
        loop {
            attempts += 1;
            if attempts > 10_000 {
                return Err(Error::Precondition(
                    "sampler cannot produce a nonzero nominal cost".into(),
                ));
            }
            delta.fill(0.0);
            for f in choose(&mut rng) {
                let spec = schema.feature(f);
                let w = spec.cost_weight;
                match spec.bin_width() {
                    Some(bw) => delta[schema.offset(f)] = draw(&mut rng, config.p) * bw / w,
                    None => {
                        for c in schema.span(f) {
                            delta[c] = draw(&mut rng, config.p) / w;
                        }
                    }
                }
            }
            let nominal = nominal_cost(&delta, schema)?;
            if nominal > 1e-12 {
                let scale = config.c / nominal;
                out.push(Translation::new(
                    delta.iter().map(|v| v * scale).collect(),
                    Provenance {
                        generator: generator.into(),
                        seed: config.seed,
                        sample_index: s,
                        fixed_cost: Some(config.c),
                    },
                ));
                break;
            }
        }
    }
    Ok(out)
}

/// `n_s` translations of nominal cost `c`, each touching `n_f` actionable
/// features chosen uniformly (fewer when fewer are actionable).
pub fn sample_fixed_cost(
    schema: &FeatureSchema,
    config: &GenerationConfig,
) -> Result<Vec<Translation>> {
    let pool = actionable(schema);
    if pool.is_empty() {
        return Err(Error::Precondition("no actionable features".into()));
    }
    let amount = config.n_f.min(pool.len());
    sample_with(schema, config, GeneratorKind::Uniform.as_str(), |rng| {
        let mut chosen: Vec<usize> = index::sample(rng, pool.len(), amount)
            .into_iter()
            .map(|i| pool[i])
            .collect();
        chosen.sort_unstable();
        chosen
    })
}

/// [`sample_fixed_cost`] with features drawn with probability proportional to
/// `importances`, without replacement. Zero-importance features are never drawn.
pub fn importance_weighted_sample(
    schema: &FeatureSchema,
    config: &GenerationConfig,
    importances: &[f64],
) -> Result<Vec<Translation>> {
    if importances.len() != schema.len() {
        return Err(Error::Dimension {
            expected: schema.len(),
            got: importances.len(),
        });
    }
    if importances.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument(
            "importances must be finite and nonnegative".into(),
        ));
    }
    let pool: Vec<usize> = actionable(schema)
        .into_iter()
        .filter(|&f| importances[f] > 0.0)
        .collect();
    if pool.is_empty() {
        return Err(Error::InvalidArgument(
            "all actionable feature importances are zero".into(),
        ));
    }
    let amount = config.n_f.min(pool.len());
    sample_with(schema, config, GeneratorKind::Importance.as_str(), |rng| {
        let mut chosen: Vec<usize> =
            index::sample_weighted(rng, pool.len(), |i| importances[pool[i]], amount)
                .expect("positive weights")
                .into_iter()
                .map(|i| pool[i])
                .collect();
        chosen.sort_unstable();
        chosen
    })
}

/// Outcome of greedy coverage selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Candidate positions in pick order.
    pub chosen: Vec<usize>,
    /// Newly covered inputs contributed by each pick.
    pub gains: Vec<usize>,
    /// Inputs covered by each candidate on its own. With a single pick,
    /// candidates dropped as unable to beat the best report 0.
    pub coverage: Vec<usize>,
    /// Fraction of inputs covered by the union of the picks.
    pub union_coverage: f64,
}

impl Selection {
    pub fn translations<'a>(&self, candidates: &'a [Translation]) -> Vec<&'a Translation> {
        self.chosen.iter().map(|&i| &candidates[i]).collect()
    }
}

/// Greedy maximum coverage over the candidates' first-flip sets.
///
/// Each round picks the candidate covering the most not-yet-covered inputs;
/// ties go to the lower `sample_index`, then to the earlier position. The
/// first pick is always made; later rounds stop once nothing is gained.
/// `grids` holds one shared grid or one per candidate.
pub fn greedy_select(
    candidates: &[Translation],
    inputs: &Dataset,
    predictor: &dyn Predictor,
    grids: &[ScalarGrid],
    n: usize,
    options: CubeOptions,
) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidate translations".into()));
    }
    if n == 0 || n > candidates.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot select {n} of {} candidates",
            candidates.len()
        )));
    }
    if grids.len() != 1 && grids.len() != candidates.len() {
        return Err(Error::InvalidArgument(format!(
            "{} grids for {} candidates",
            grids.len(),
            candidates.len()
        )));
    }
    check_inputs(predictor, inputs, candidates)?;
    let grid_of = |i: usize| {
        if grids.len() == 1 {
            &grids[0]
        } else {
            &grids[i]
        }
    };
    if n == 1 {
        // only the best single candidate matters, so hopeless scans stop early
        let best = AtomicUsize::new(0);
        let scans: Vec<(Vec<bool>, usize)> = candidates
            .par_iter()
            .enumerate()
            .map(|(i, t)| {
                match covers_bounded(
                    predictor,
                    inputs,
                    t,
                    grid_of(i),
                    options,
                    best.load(Ordering::Relaxed),
                ) {
                    Some(c) => {
                        let count = c.iter().filter(|&&b| b).count();
                        best.fetch_max(count, Ordering::Relaxed);
                        (c, count)
                    }
                    None => (vec![false; inputs.len()], 0),
                }
            })
            .collect();
        let (covers, counts): (Vec<_>, Vec<_>) = scans.into_iter().unzip();
        let mut sel = greedy_cover(candidates, &covers, 1);
        sel.coverage = counts;
        return Ok(sel);
    }
    let covers: Vec<Vec<bool>> = candidates
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            first_flips_unchecked(predictor, inputs, t, grid_of(i), options)
                .into_iter()
                .map(|f| f.is_some())
                .collect()
        })
        .collect();
    Ok(greedy_cover(candidates, &covers, n))
}

pub(crate) fn greedy_cover(
    candidates: &[Translation],
    covers: &[Vec<bool>],
    n: usize,
) -> Selection {
    let n_inputs = covers.first().map_or(0, Vec::len);
    let coverage: Vec<usize> = covers
        .iter()
        .map(|c| c.iter().filter(|&&b| b).count())
        .collect();
    let mut covered = vec![false; n_inputs];
    let mut chosen = Vec::new();
    let mut gains = Vec::new();
    while chosen.len() < n {
        let mut best: Option<(usize, usize)> = None;
        for (i, cover) in covers.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            let gain = cover
                .iter()
                .zip(&covered)
                .filter(|(&c, &done)| c && !done)
                .count();
            let better = match best {
                None => true,
                Some((b, bg)) => {
                    gain > bg
                        || (gain == bg
                            && candidates[i].provenance.sample_index
                                < candidates[b].provenance.sample_index)
                }
            };
            if better {
                best = Some((i, gain));
            }
        }
        let Some((i, gain)) = best else { break };
        if gain == 0 && !chosen.is_empty() {
            break;
        }
        for (done, &c) in covered.iter_mut().zip(&covers[i]) {
            *done |= c;
        }
        chosen.push(i);
        gains.push(gain);
    }
    let total = covered.iter().filter(|&&b| b).count();
    Selection {
        chosen,
        gains,
        coverage,
        union_coverage: if n_inputs == 0 {
            0.0
        } else {
            total as f64 / n_inputs as f64
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientParams {
    pub lambda: f64,
    pub steps: usize,
    pub step_size: f64,
    pub seed: u64,
}

impl From<&GenerationConfig> for GradientParams {
    fn from(c: &GenerationConfig) -> Self {
        GradientParams {
            lambda: c.lambda,
            steps: c.steps,
            step_size: c.step_size,
            seed: c.seed,
        }
    }
}

/// Sum over categorical groups of `(group sum of v - 1)^2`.
pub fn categorical_penalty(v: &[f64], schema: &FeatureSchema) -> Result<f64> {
    schema.check_dim(v.len())?;
    Ok((0..schema.len())
        .filter(|&i| schema.feature(i).is_categorical())
        .map(|i| {
            let s: f64 = v[schema.span(i)].iter().sum::<f64>() - 1.0;
            s * s
        })
        .sum())
}

/// Per-coordinate weights of the relaxed l1 cost.
fn l1_weights(schema: &FeatureSchema) -> Vec<f64> {
    let mut r = vec![0.0; schema.dim()];
    for (i, f) in schema.features().iter().enumerate() {
        match f.bin_width() {
            Some(bw) => r[schema.offset(i)] = f.cost_weight / bw,
            // a flip moves two coordinates by one each
            None => schema.span(i).for_each(|c| r[c] = f.cost_weight / 2.0),
        }
    }
    r
}

/// Direction from proximal gradient descent on the relaxed objective
/// `mean sigmoid(-score(x + d)) + lambda * l1(d) + mean cat_penalty(x + d)`.
///
/// No rounding happens inside the loss. Non-actionable coordinates stay 0.
pub fn gradient_descent_delta(
    model: &dyn Predictor,
    inputs: &Dataset,
    params: &GradientParams,
) -> Result<Translation> {
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("no inputs".into()));
    }
    if model.dim() != inputs.dim() {
        return Err(Error::Dimension {
            expected: inputs.dim(),
            got: model.dim(),
        });
    }
    model.gradient_wrt_input(inputs.row(0))?;
    if !(params.step_size > 0.0) || !(params.lambda >= 0.0) {
        return Err(Error::InvalidArgument(
            "step size must be positive and lambda nonnegative".into(),
        ));
    }
    let schema = inputs.schema();
    let d = schema.dim();
    let r = l1_weights(schema);
    let mut frozen = vec![false; d];
    for (i, f) in schema.features().iter().enumerate() {
        if !f.actionable {
            schema.span(i).for_each(|c| frozen[c] = true);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut delta: Vec<f64> = (0..d)
        .map(|c| {
            if frozen[c] {
                0.0
            } else {
                1e-9 * (rng.random::<f64>() - 0.5)
            }
        })
        .collect();
    let n = inputs.len() as f64;
    let mut shifted = vec![0.0; d];
    for _ in 0..params.steps {
        let mut grad = vec![0.0; d];
        for x in inputs.rows() {
            for ((s, a), b) in shifted.iter_mut().zip(x).zip(&delta) {
                *s = a + b;
            }
            let score = model.score(&shifted);
            let g = model.gradient(&shifted)?;
            let coef = -sigmoid(score) * sigmoid(-score) / n;
            for (gi, v) in grad.iter_mut().zip(&g) {
                *gi += coef * v;
            }
        }
        let eta = params.step_size;
        for c in 0..d {
            if !frozen[c] {
                delta[c] -= eta * grad[c];
            }
        }
        // group sums of a one-hot x are 1, so the penalty is (sum of delta)^2,
        // applied through its exact prox so any step size stays stable
        for i in 0..schema.len() {
            let span = schema.span(i);
            if schema.feature(i).is_categorical() && !frozen[span.start] {
                let s: f64 = delta[span.clone()].iter().sum();
                let shift = 2.0 * eta * s / (1.0 + 2.0 * eta * span.len() as f64);
                span.for_each(|c| delta[c] -= shift);
            }
        }
        for c in 0..d {
            if !frozen[c] {
                let v = delta[c];
                let t = eta * params.lambda * r[c];
                delta[c] = v.signum() * (v.abs() - t).max(0.0);
            }
        }
    }
    Ok(Translation::new(
        delta,
        Provenance {
            generator: GeneratorKind::Gradient.as_str().into(),
            seed: params.seed,
            sample_index: 0,
            fixed_cost: None,
        },
    ))
}

/// Minimum weighted-l2 move of `x0` onto the hyperplane `w.x + b = 0`.
///
/// Returns `delta = -y0 C^-2 w / |C^-1 w|^2` and its cost `-y0 / |C^-1 w|`,
/// where `y0 = w.x0 + b` and `C = diag(costs)`.
pub fn svm_optimal_delta(
    w: &[f64],
    b: f64,
    costs: &[f64],
    x0: &[f64],
) -> Result<(Translation, f64)> {
    if w.len() != x0.len() || costs.len() != w.len() {
        return Err(Error::Dimension {
            expected: w.len(),
            got: if w.len() != x0.len() {
                x0.len()
            } else {
                costs.len()
            },
        });
    }
    if w.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidArgument("zero weight vector".into()));
    }
    if costs.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
        return Err(Error::InvalidArgument(
            "cost weights must be positive".into(),
        ));
    }
    let y0 = w.iter().zip(x0).map(|(a, b)| a * b).sum::<f64>() + b;
    if y0 >= 0.0 {
        return Err(Error::Precondition(format!(
            "input is not on the negative side (y0 = {y0})"
        )));
    }
    let norm2: f64 = w.iter().zip(costs).map(|(w, c)| (w / c) * (w / c)).sum();
    let delta = w
        .iter()
        .zip(costs)
        .map(|(w, c)| -y0 * w / (c * c) / norm2)
        .collect();
    let t = Translation::new(
        delta,
        Provenance {
            generator: GeneratorKind::SvmClosedForm.as_str().into(),
            seed: 0,
            sample_index: 0,
            fixed_cost: None,
        },
    );
    Ok((t, -y0 / norm2.sqrt()))
}

/// One shared direction for many inputs: the mean of their closed-form moves.
pub fn svm_shared_direction(
    w: &[f64],
    b: f64,
    costs: &[f64],
    inputs: &Dataset,
) -> Result<Translation> {
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("no inputs".into()));
    }
    let mut mean = vec![0.0; w.len()];
    for x in inputs.rows() {
        let (t, _) = svm_optimal_delta(w, b, costs, x)?;
        for (m, v) in mean.iter_mut().zip(&t.delta) {
            *m += v / inputs.len() as f64;
        }
    }
    let (mut t, _) = svm_optimal_delta(w, b, costs, inputs.row(0))?;
    t.delta = mean;
    Ok(t)
}
