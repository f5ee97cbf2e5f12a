use serde::{Deserialize, Serialize};

use super::{Layout, Translation};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rules::lower_bounds;
use crate::schema::FeatureSchema;

/// Strictly increasing scalars starting at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ScalarGrid {
    scalars: Vec<f64>,
}

impl ScalarGrid {
    /// `m` evenly spaced scalars from 0 to `k_max` inclusive.
    pub fn linear(k_max: f64, m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 2 points, got {m}"
            )));
        }
        if !(k_max > 0.0 && k_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "grid maximum {k_max} must be positive"
            )));
        }
        let step = k_max / (m - 1) as f64;
        let mut scalars: Vec<f64> = (0..m).map(|j| j as f64 * step).collect();
        scalars[m - 1] = k_max;
        Ok(ScalarGrid { scalars })
    }

    pub fn from_values(scalars: Vec<f64>) -> Result<Self> {
        if scalars.first() != Some(&0.0) {
            return Err(Error::InvalidArgument("grid must start at 0".into()));
        }
        if scalars.iter().any(|k| !k.is_finite()) || scalars.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "grid must be finite and strictly increasing".into(),
            ));
        }
        Ok(ScalarGrid { scalars })
    }

    pub fn values(&self) -> &[f64] {
        &self.scalars
    }

    pub fn len(&self) -> usize {
        self.scalars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scalars.is_empty()
    }

    pub fn max(&self) -> f64 {
        *self.scalars.last().expect("grid is nonempty")
    }
}

impl TryFrom<Vec<f64>> for ScalarGrid {
    type Error = String;

    fn try_from(v: Vec<f64>) -> std::result::Result<Self, String> {
        ScalarGrid::from_values(v).map_err(|e| e.to_string())
    }
}

impl From<ScalarGrid> for Vec<f64> {
    fn from(g: ScalarGrid) -> Self {
        g.scalars
    }
}

/// Grid whose largest scalar keeps the translation within `cap`.
///
/// Without a probe the maximum is `cap / c` for the translation's nominal
/// cost `c`. With a probe it is the largest scalar whose worst per-input
/// cost over the probe rows stays within `cap`; categorical-only
/// translations then get the exact threshold grid from [`categorical_grid`]
/// instead of a linear one.
pub fn per_translation_cap(
    translation: &Translation,
    cap: f64,
    schema: &FeatureSchema,
    probe: Option<&Dataset>,
    m: usize,
    clamp: bool,
) -> Result<ScalarGrid> {
    if !(cap > 0.0 && cap.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "cost cap {cap} must be positive"
        )));
    }
    translation.validate(schema)?;
    let Some(probe) = probe.filter(|p| !p.is_empty()) else {
        let c = translation.provenance.fixed_cost.ok_or_else(|| {
            Error::Precondition("fallback cap needs a translation with a nominal fixed cost".into())
        })?;
        return ScalarGrid::linear(cap / c, m);
    };
    schema.check_dim(probe.dim())?;
    let layout = Layout::new(schema);
    let worst = |k: f64| worst_cost(&layout, probe, &translation.delta, k, clamp);

    if translation.is_categorical_only(schema) {
        let thresholds = merged_thresholds(&translation.delta, schema);
        let Some(&last) = thresholds.last() else {
            return ScalarGrid::linear(1.0, m);
        };
        let plateau_after_last = worst(2.0 * last);
        let k_max = if plateau_after_last <= cap {
            2.0 * last
        } else {
            match thresholds.iter().rev().find(|&&t| worst(t) <= cap) {
                Some(&t) => t,
                None => {
                    return Err(Error::Precondition(format!(
                        "translation exceeds cost cap {cap} at every scalar"
                    )))
                }
            }
        };
        return categorical_grid(translation, schema, k_max);
    }

    let mut hi = 1.0;
    let mut hi_cost = worst(hi);
    let mut saturated = false;
    while hi_cost <= cap {
        let next = worst(hi * 2.0);
        if next == hi_cost && hi >= 1e6 {
            saturated = true;
            break;
        }
        hi *= 2.0;
        hi_cost = next;
        if hi > 1e12 {
            saturated = true;
            break;
        }
    }
    let k_max = if saturated {
        if hi_cost == 0.0 {
            return ScalarGrid::linear(1.0, m);
        }
        // smallest scalar reaching the saturated cost
        let target = hi_cost;
        let (mut lo, mut up) = (0.0, hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + up);
            if worst(mid) >= target {
                up = mid;
            } else {
                lo = mid;
            }
        }
        up
    } else {
        let (mut lo, mut up) = (0.0, hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + up);
            if mid == lo || mid == up {
                break;
            }
            if worst(mid) <= cap {
                lo = mid;
            } else {
                up = mid;
            }
        }
        lo
    };
    if k_max <= 0.0 {
        return Err(Error::Precondition(format!(
            "translation exceeds cost cap {cap} at every positive scalar"
        )));
    }
    ScalarGrid::linear(k_max, m)
}

fn worst_cost(layout: &Layout, probe: &Dataset, delta: &[f64], k: f64, clamp: bool) -> f64 {
    let mut buf = vec![0.0; layout.dim];
    probe
        .rows()
        .map(|x| {
            layout.round_translated(x, delta, k, clamp, &mut buf);
            layout.cost(x, &buf)
        })
        .fold(0.0, f64::max)
}

fn merged_thresholds(delta: &[f64], schema: &FeatureSchema) -> Vec<f64> {
    let mut out: Vec<f64> = schema
        .features()
        .iter()
        .enumerate()
        .filter(|(_, f)| f.is_categorical())
        .flat_map(|(i, _)| lower_bounds(&delta[schema.span(i)]))
        .filter(|k| k.is_finite())
        .collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Exact grid for a categorical-only translation: 0, every activation
/// threshold up to `k_max`, the midpoints between consecutive ones, and
/// `k_max` itself.
///
/// Rounding is piecewise constant in `k` with breakpoints only at the
/// thresholds, so the midpoints see every distinct rounded state.
pub fn categorical_grid(
    translation: &Translation,
    schema: &FeatureSchema,
    k_max: f64,
) -> Result<ScalarGrid> {
    translation.validate(schema)?;
    if !translation.is_categorical_only(schema) {
        return Err(Error::Precondition(
            "translation moves continuous features".into(),
        ));
    }
    if !(k_max > 0.0 && k_max.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "grid maximum {k_max} must be positive"
        )));
    }
    let thresholds: Vec<f64> = merged_thresholds(&translation.delta, schema)
        .into_iter()
        .filter(|&t| t <= k_max)
        .collect();
    let mut points = vec![0.0];
    let mut prev = 0.0;
    for &t in &thresholds {
        if prev > 0.0 {
            points.push(0.5 * (prev + t));
        }
        points.push(t);
        prev = t;
    }
    if prev > 0.0 && prev < k_max {
        points.push(0.5 * (prev + k_max));
    }
    points.push(k_max);
    points.sort_by(f64::total_cmp);
    points.dedup();
    ScalarGrid::from_values(points)
}
