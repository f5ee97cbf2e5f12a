use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Layout, ScalarGrid, Translation};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::predictors::Predictor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubeOptions {
    /// Clamp continuous coordinates to their declared range when rounding.
    pub clamp: bool,
}

impl Default for CubeOptions {
    fn default() -> Self {
        CubeOptions { clamp: true }
    }
}

/// Predictions and costs over every (translation, scalar, input) triple.
///
/// Entry `(i, j, x)` lives at `offset(i) + j * |inputs| + x`. Counterfactual
/// vectors are not stored; [`EvaluationCube::counterfactual`] recomputes them.
#[derive(Debug, Clone)]
pub struct EvaluationCube {
    inputs: Dataset,
    translations: Vec<Translation>,
    grids: Vec<ScalarGrid>,
    offsets: Vec<usize>,
    predictions: Vec<u8>,
    costs: Vec<f64>,
    options: CubeOptions,
}

impl EvaluationCube {
    pub fn n_translations(&self) -> usize {
        self.translations.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.len()
    }

    /// `(n, m, |inputs|)` when every translation shares one grid length.
    pub fn shape(&self) -> Option<(usize, usize, usize)> {
        let m = self.grids.first().map_or(0, ScalarGrid::len);
        self.grids.iter().all(|g| g.len() == m).then_some((
            self.translations.len(),
            m,
            self.inputs.len(),
        ))
    }

    pub fn grid(&self, i: usize) -> &ScalarGrid {
        &self.grids[i]
    }

    pub fn translation(&self, i: usize) -> &Translation {
        &self.translations[i]
    }

    pub fn translations(&self) -> &[Translation] {
        &self.translations
    }

    pub fn inputs(&self) -> &Dataset {
        &self.inputs
    }

    fn index(&self, i: usize, j: usize, x: usize) -> usize {
        self.offsets[i] + j * self.inputs.len() + x
    }

    pub fn prediction(&self, i: usize, j: usize, x: usize) -> u8 {
        self.predictions[self.index(i, j, x)]
    }

    pub fn cost(&self, i: usize, j: usize, x: usize) -> f64 {
        self.costs[self.index(i, j, x)]
    }

    /// Predictions of translation `i` at scalar index `j`, one per input.
    pub fn prediction_slice(&self, i: usize, j: usize) -> &[u8] {
        let s = self.index(i, j, 0);
        &self.predictions[s..s + self.inputs.len()]
    }

    pub fn cost_slice(&self, i: usize, j: usize) -> &[f64] {
        let s = self.index(i, j, 0);
        &self.costs[s..s + self.inputs.len()]
    }

    /// Recomputes `round(x + k_j * delta_i)`.
    pub fn counterfactual(&self, i: usize, j: usize, x: usize) -> Vec<f64> {
        let layout = Layout::new(self.inputs.schema());
        let mut out = vec![0.0; layout.dim];
        layout.round_translated(
            self.inputs.row(x),
            &self.translations[i].delta,
            self.grids[i].values()[j],
            self.options.clamp,
            &mut out,
        );
        out
    }
}

pub(crate) fn check_inputs(
    predictor: &dyn Predictor,
    inputs: &Dataset,
    translations: &[Translation],
) -> Result<()> {
    if predictor.dim() != inputs.dim() {
        return Err(Error::Dimension {
            expected: inputs.dim(),
            got: predictor.dim(),
        });
    }
    for t in translations {
        t.validate(inputs.schema())?;
    }
    for (x, row) in inputs.rows().enumerate() {
        if predictor.predict(row) != 0 {
            return Err(Error::Precondition(format!(
                "input row {} is already predicted 1",
                inputs.ids()[x]
            )));
        }
    }
    Ok(())
}

/// Runs every translation over one shared grid with default options.
pub fn scale_and_evaluate(
    predictor: &dyn Predictor,
    inputs: &Dataset,
    translations: &[Translation],
    grid: &ScalarGrid,
) -> Result<EvaluationCube> {
    scale_and_evaluate_with(
        predictor,
        inputs,
        translations,
        std::slice::from_ref(grid),
        CubeOptions::default(),
    )
}

/// Builds the cube. `grids` holds a single shared grid or one per translation.
pub fn scale_and_evaluate_with(
    predictor: &dyn Predictor,
    inputs: &Dataset,
    translations: &[Translation],
    grids: &[ScalarGrid],
    options: CubeOptions,
) -> Result<EvaluationCube> {
    check_inputs(predictor, inputs, translations)?;
    let grids: Vec<ScalarGrid> = match grids.len() {
        1 => vec![grids[0].clone(); translations.len()],
        n if n == translations.len() => grids.to_vec(),
        n => {
            return Err(Error::InvalidArgument(format!(
                "{n} grids for {} translations",
                translations.len()
            )))
        }
    };
    let layout = Layout::new(inputs.schema());
    let n_in = inputs.len();
    let slabs: Vec<(usize, usize)> = grids
        .iter()
        .enumerate()
        .flat_map(|(i, g)| (0..g.len()).map(move |j| (i, j)))
        .collect();
    let mut offsets = Vec::with_capacity(grids.len());
    let mut at = 0;
    for g in &grids {
        offsets.push(at);
        at += g.len() * n_in;
    }

    let results: Vec<(Vec<u8>, Vec<f64>)> = slabs
        .par_iter()
        .map(|&(i, j)| {
            let delta = &translations[i].delta;
            let active = layout.active(delta);
            let k = grids[i].values()[j];
            let mut buf = vec![0.0; layout.dim];
            let mut preds = Vec::with_capacity(n_in);
            let mut costs = Vec::with_capacity(n_in);
            for x in inputs.rows() {
                buf.copy_from_slice(x);
                layout.round_active(&active, x, delta, k, options.clamp, &mut buf);
                preds.push(predictor.predict(&buf));
                costs.push(layout.cost_active(&active, x, &buf));
            }
            (preds, costs)
        })
        .collect();
    let mut predictions = Vec::with_capacity(at);
    let mut costs = Vec::with_capacity(at);
    for (p, c) in results {
        predictions.extend(p);
        costs.extend(c);
    }
    Ok(EvaluationCube {
        inputs: inputs.clone(),
        translations: translations.to_vec(),
        grids,
        offsets,
        predictions,
        costs,
        options,
    })
}

/// First grid point at which an input flips to class 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstFlip {
    pub index: usize,
    pub scalar: f64,
    pub cost: f64,
}

/// Minimum-scalar statistics of one translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GceStats {
    pub grid: Vec<f64>,
    /// Per input, in input order; `None` when never flipped on the grid.
    pub flips: Vec<Option<FirstFlip>>,
    /// Fraction of inputs covered at each grid scalar.
    pub coverage: Vec<f64>,
    /// Mean first-flip cost over inputs covered at each grid scalar (0 when none).
    pub avg_cost: Vec<f64>,
    /// Inputs that flip and later return to class 0 on the grid; `None` when
    /// computed by the early-exit scan, which cannot see them.
    pub flip_backs: Option<usize>,
}

impl GceStats {
    pub fn from_flips(
        grid: &ScalarGrid,
        flips: Vec<Option<FirstFlip>>,
        flip_backs: Option<usize>,
    ) -> Self {
        let m = grid.len();
        let n = flips.len();
        let mut count = vec![0usize; m];
        let mut cost_sum = vec![0.0; m];
        for f in flips.iter().flatten() {
            count[f.index] += 1;
            cost_sum[f.index] += f.cost;
        }
        let mut coverage = Vec::with_capacity(m);
        let mut avg_cost = Vec::with_capacity(m);
        let (mut c, mut s) = (0usize, 0.0);
        for j in 0..m {
            c += count[j];
            s += cost_sum[j];
            coverage.push(if n == 0 { 0.0 } else { c as f64 / n as f64 });
            avg_cost.push(if c == 0 { 0.0 } else { s / c as f64 });
        }
        GceStats {
            grid: grid.values().to_vec(),
            flips,
            coverage,
            avg_cost,
            flip_backs,
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.flips.len()
    }

    pub fn min_scalar(&self, x: usize) -> Option<f64> {
        self.flips[x].map(|f| f.scalar)
    }

    pub fn min_cost(&self, x: usize) -> Option<f64> {
        self.flips[x].map(|f| f.cost)
    }

    pub fn covered(&self) -> impl Iterator<Item = (usize, FirstFlip)> + '_ {
        self.flips
            .iter()
            .enumerate()
            .filter_map(|(x, f)| f.map(|f| (x, f)))
    }

    pub fn covered_count(&self) -> usize {
        self.flips.iter().flatten().count()
    }

    /// Coverage at the largest scalar.
    pub fn final_coverage(&self) -> f64 {
        self.coverage.last().copied().unwrap_or(0.0)
    }

    /// Average cost at the largest scalar; `None` when nothing is covered.
    pub fn final_avg_cost(&self) -> Option<f64> {
        (self.covered_count() > 0).then(|| *self.avg_cost.last().expect("grid is nonempty"))
    }
}

/// Statistics of translation `i` read off the cube.
pub fn stats(cube: &EvaluationCube, i: usize) -> Result<GceStats> {
    if i >= cube.n_translations() {
        return Err(Error::InvalidArgument(format!(
            "translation index {i} out of range for {} translations",
            cube.n_translations()
        )));
    }
    let grid = cube.grid(i);
    let mut flip_backs = 0;
    let flips = (0..cube.n_inputs())
        .map(|x| {
            let first = (0..grid.len()).find(|&j| cube.prediction(i, j, x) == 1)?;
            if (first + 1..grid.len()).any(|j| cube.prediction(i, j, x) == 0) {
                flip_backs += 1;
            }
            Some(FirstFlip {
                index: first,
                scalar: grid.values()[first],
                cost: cube.cost(i, first, x),
            })
        })
        .collect();
    Ok(GceStats::from_flips(grid, flips, Some(flip_backs)))
}

/// Scans each input along the grid and stops at its first flip.
///
/// Produces the same flips as [`stats`] on a full cube without evaluating
/// scalars past the first flip.
pub fn first_flips(
    predictor: &dyn Predictor,
    inputs: &Dataset,
    translation: &Translation,
    grid: &ScalarGrid,
    options: CubeOptions,
) -> Result<Vec<Option<FirstFlip>>> {
    check_inputs(predictor, inputs, std::slice::from_ref(translation))?;
    Ok(first_flips_unchecked(
        predictor,
        inputs,
        translation,
        grid,
        options,
    ))
}

/// Which inputs flip anywhere on the grid, scanned in order. Gives up with
/// `None` as soon as fewer than `beat` inputs can still be covered.
pub(crate) fn covers_bounded(
    predictor: &dyn Predictor,
    inputs: &Dataset,
    translation: &Translation,
    grid: &ScalarGrid,
    options: CubeOptions,
    beat: usize,
) -> Option<Vec<bool>> {
    let layout = Layout::new(inputs.schema());
    let active = layout.active(&translation.delta);
    let n = inputs.len();
    let mut buf = vec![0.0; layout.dim];
    let mut out = Vec::with_capacity(n);
    let mut missed = 0;
    for x in inputs.rows() {
        buf.copy_from_slice(x);
        // inputs start at class 0, so an unchanged counterfactual cannot flip
        let hit = grid.values().iter().any(|&k| {
            layout.round_active(&active, x, &translation.delta, k, options.clamp, &mut buf)
                && predictor.predict(&buf) == 1
        });
        if !hit {
            missed += 1;
            if n - missed < beat {
                return None;
            }
        }
        out.push(hit);
    }
    Some(out)
}

pub(crate) fn first_flips_unchecked(
    predictor: &dyn Predictor,
    inputs: &Dataset,
    translation: &Translation,
    grid: &ScalarGrid,
    options: CubeOptions,
) -> Vec<Option<FirstFlip>> {
    let layout = Layout::new(inputs.schema());
    let active = layout.active(&translation.delta);
    let rows: Vec<&[f64]> = inputs.rows().collect();
    rows.par_iter()
        .map_init(
            || vec![0.0; layout.dim],
            |buf, x| {
                buf.copy_from_slice(x);
                for (j, &k) in grid.values().iter().enumerate() {
                    if layout.round_active(&active, x, &translation.delta, k, options.clamp, buf)
                        && predictor.predict(buf) == 1
                    {
                        return Some(FirstFlip {
                            index: j,
                            scalar: k,
                            cost: layout.cost_active(&active, x, buf),
                        });
                    }
                }
                None
            },
        )
        .collect()
}
