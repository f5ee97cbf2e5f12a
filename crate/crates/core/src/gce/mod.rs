//! Scaled translations: rounding, the binned cost model, the scalar grid and
//! the (translation x scalar x input) evaluation cube.

mod cube;
mod grid;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{argmax, extended_bin, FeatureKind, FeatureSchema};

pub(crate) use cube::{check_inputs, covers_bounded, first_flips_unchecked};
pub use cube::{
    first_flips, scale_and_evaluate, scale_and_evaluate_with, stats, CubeOptions, EvaluationCube,
    FirstFlip, GceStats,
};
pub use grid::{categorical_grid, per_translation_cap, ScalarGrid};

/// Where a translation came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub seed: u64,
    /// Position in the generator's output stream; used as the stable tie-break key.
    pub sample_index: usize,
    /// Nominal cost the direction was normalized to, when it was.
    pub fixed_cost: Option<f64>,
}

/// Direction `delta` in encoded space, applied as `round(x + k * delta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Translation {
    pub delta: Vec<f64>,
    pub provenance: Provenance,
}

impl Translation {
    pub fn new(delta: Vec<f64>, provenance: Provenance) -> Self {
        Translation { delta, provenance }
    }

    /// Translation with a bare "manual" provenance.
    pub fn manual(delta: Vec<f64>) -> Self {
        Translation {
            delta,
            provenance: Provenance {
                generator: "manual".into(),
                seed: 0,
                sample_index: 0,
                fixed_cost: None,
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.delta.len()
    }

    pub fn validate(&self, schema: &FeatureSchema) -> Result<()> {
        schema.check_dim(self.delta.len())?;
        if let Some(i) = self.delta.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "translation entry {i} is not finite"
            )));
        }
        Ok(())
    }

    /// True when every nonzero entry sits in a categorical group.
    pub fn is_categorical_only(&self, schema: &FeatureSchema) -> bool {
        schema
            .features()
            .iter()
            .enumerate()
            .filter(|(_, f)| !f.is_categorical())
            .all(|(i, _)| schema.span(i).all(|c| self.delta[c] == 0.0))
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Segment {
    Categorical {
        start: usize,
        len: usize,
        weight: f64,
    },
    Continuous {
        coord: usize,
        min: f64,
        max: f64,
        bins: usize,
        weight: f64,
    },
}

/// Flattened schema layout for the hot loops.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub segments: Vec<Segment>,
    pub dim: usize,
}

impl Layout {
    pub fn new(schema: &FeatureSchema) -> Self {
        let segments = schema
            .features()
            .iter()
            .enumerate()
            .map(|(i, f)| match f.kind {
                FeatureKind::Categorical { ref values } => Segment::Categorical {
                    start: schema.offset(i),
                    len: values.len(),
                    weight: f.cost_weight,
                },
                FeatureKind::Continuous { min, max, bins } => Segment::Continuous {
                    coord: schema.offset(i),
                    min,
                    max,
                    bins,
                    weight: f.cost_weight,
                },
            })
            .collect();
        Layout {
            segments,
            dim: schema.dim(),
        }
    }

    /// Writes `round(x + k * delta)` into `out`.
    pub fn round_translated(&self, x: &[f64], delta: &[f64], k: f64, clamp: bool, out: &mut [f64]) {
        for seg in &self.segments {
            match *seg {
                Segment::Categorical { start, len, .. } => {
                    let mut best = start;
                    let mut best_v = x[start] + k * delta[start];
                    for c in start + 1..start + len {
                        let v = x[c] + k * delta[c];
                        if v > best_v {
                            best = c;
                            best_v = v;
                        }
                    }
                    out[start..start + len].fill(0.0);
                    out[best] = 1.0;
                }
                Segment::Continuous {
                    coord, min, max, ..
                } => {
                    let v = x[coord] + k * delta[coord];
                    out[coord] = if clamp { v.clamp(min, max) } else { v };
                }
            }
        }
    }

    /// Segments with a nonzero entry in `delta`. Rounding leaves every other
    /// segment of a valid encoded input unchanged.
    pub fn active(&self, delta: &[f64]) -> Vec<usize> {
        (0..self.segments.len())
            .filter(|&s| match self.segments[s] {
                Segment::Categorical { start, len, .. } => {
                    delta[start..start + len].iter().any(|&v| v != 0.0)
                }
                Segment::Continuous { coord, .. } => delta[coord] != 0.0,
            })
            .collect()
    }

    /// [`Layout::round_translated`] restricted to `active`; `out` must already
    /// hold `x` elsewhere. Returns whether `out` changed.
    pub fn round_active(
        &self,
        active: &[usize],
        x: &[f64],
        delta: &[f64],
        k: f64,
        clamp: bool,
        out: &mut [f64],
    ) -> bool {
        let mut changed = false;
        for &s in active {
            match self.segments[s] {
                Segment::Categorical { start, len, .. } => {
                    let mut best = start;
                    let mut best_v = x[start] + k * delta[start];
                    for c in start + 1..start + len {
                        let v = x[c] + k * delta[c];
                        if v > best_v {
                            best = c;
                            best_v = v;
                        }
                    }
                    if out[best] != 1.0 {
                        out[start..start + len].fill(0.0);
                        out[best] = 1.0;
                        changed = true;
                    }
                }
                Segment::Continuous {
                    coord, min, max, ..
                } => {
                    let v = x[coord] + k * delta[coord];
                    let v = if clamp { v.clamp(min, max) } else { v };
                    if out[coord].to_bits() != v.to_bits() {
                        out[coord] = v;
                        changed = true;
                    }
                }
            }
        }
        changed
    }

    /// [`Layout::cost`] over `active` only; equal to it when `y` matches `x` elsewhere.
    pub fn cost_active(&self, active: &[usize], x: &[f64], y: &[f64]) -> f64 {
        let mut total = 0.0;
        for &s in active {
            total += self.segment_cost(s, x, y);
        }
        total
    }

    fn segment_cost(&self, s: usize, x: &[f64], y: &[f64]) -> f64 {
        match self.segments[s] {
            Segment::Categorical { start, len, weight } => {
                if argmax(&x[start..start + len]) != argmax(&y[start..start + len]) {
                    weight
                } else {
                    0.0
                }
            }
            Segment::Continuous {
                coord,
                min,
                max,
                bins,
                weight,
            } => {
                let a = extended_bin(x[coord], min, max, bins);
                let b = extended_bin(y[coord], min, max, bins);
                weight * (a - b).unsigned_abs() as f64
            }
        }
    }

    pub fn round(&self, v: &[f64], clamp: bool, out: &mut [f64]) {
        for seg in &self.segments {
            match *seg {
                Segment::Categorical { start, len, .. } => {
                    let best = start + argmax(&v[start..start + len]);
                    out[start..start + len].fill(0.0);
                    out[best] = 1.0;
                }
                Segment::Continuous {
                    coord, min, max, ..
                } => {
                    out[coord] = if clamp {
                        v[coord].clamp(min, max)
                    } else {
                        v[coord]
                    };
                }
            }
        }
    }

    pub fn cost(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut total = 0.0;
        for s in 0..self.segments.len() {
            total += self.segment_cost(s, x, y);
        }
        total
    }
}

/// One-hot each categorical group at its argmax and clamp continuous values.
pub fn round_encoding(v: &[f64], schema: &FeatureSchema) -> Result<Vec<f64>> {
    round_encoding_with(v, schema, true)
}

/// [`round_encoding`] with control over continuous clamping.
pub fn round_encoding_with(v: &[f64], schema: &FeatureSchema, clamp: bool) -> Result<Vec<f64>> {
    schema.check_dim(v.len())?;
    let mut out = vec![0.0; v.len()];
    Layout::new(schema).round(v, clamp, &mut out);
    Ok(out)
}

/// Weighted bin moves on continuous features plus weighted categorical flips.
///
/// Continuous values outside the declared range (possible only when rounding
/// does not clamp) are binned by extending the equal-width grid.
pub fn cost(x: &[f64], x_prime: &[f64], schema: &FeatureSchema) -> Result<f64> {
    schema.check_dim(x.len())?;
    schema.check_dim(x_prime.len())?;
    Ok(Layout::new(schema).cost(x, x_prime))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::FeatureSpec;

    fn mixed() -> FeatureSchema {
        FeatureSchema::new(vec![
            FeatureSpec::categorical("c", ["a", "b", "c"]),
            FeatureSpec::continuous("x", 0.0, 100.0),
        ])
        .unwrap()
    }

    #[test]
    fn round_examples() {
        let s = mixed();
        assert_eq!(
            round_encoding(&[0.2, 0.9, 0.4, 50.0], &s).unwrap(),
            vec![0.0, 1.0, 0.0, 50.0]
        );
        let onehot = [0.0, 0.0, 1.0, 12.5];
        assert_eq!(round_encoding(&onehot, &s).unwrap(), onehot.to_vec());
        assert_eq!(
            round_encoding(&[0.5, 0.5, 0.5, 120.0], &s).unwrap(),
            vec![1.0, 0.0, 0.0, 100.0]
        );
        assert_eq!(
            round_encoding_with(&[0.0, 1.0, 0.0, -20.0], &s, false).unwrap(),
            vec![0.0, 1.0, 0.0, -20.0]
        );
    }

    #[test]
    fn round_worked_example() {
        let s =
            FeatureSchema::new(vec![FeatureSpec::categorical("f", ["1", "2", "3", "4"])]).unwrap();
        let v: Vec<f64> = [0.0, 1.0, 0.0, 0.0]
            .iter()
            .zip([0.0, -1.0, 1.0, 0.5])
            .map(|(x, d)| x + d)
            .collect();
        assert_eq!(round_encoding(&v, &s).unwrap(), vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn cost_examples() {
        let s = mixed();
        let x = [1.0, 0.0, 0.0, 25.0];
        assert_eq!(cost(&x, &x, &s).unwrap(), 0.0);
        assert_eq!(cost(&x, &[1.0, 0.0, 0.0, 47.0], &s).unwrap(), 2.0);
        assert_eq!(cost(&x, &[0.0, 1.0, 0.0, 55.0], &s).unwrap(), 4.0);
        // out-of-range values keep extending the bins
        assert_eq!(cost(&x, &[1.0, 0.0, 0.0, 125.0], &s).unwrap(), 10.0);
    }

    #[test]
    fn weighted_cost() {
        let s = FeatureSchema::new(vec![
            FeatureSpec::categorical("c", ["a", "b"]).with_weight(2.5),
            FeatureSpec::continuous("x", 0.0, 1.0).with_weight(0.5),
        ])
        .unwrap();
        assert_eq!(
            cost(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.4], &s).unwrap(),
            2.5 + 0.5 * 4.0
        );
    }

    #[test]
    fn categorical_only_detection() {
        let s = mixed();
        assert!(Translation::manual(vec![0.0, 1.0, -0.5, 0.0]).is_categorical_only(&s));
        assert!(!Translation::manual(vec![0.0, 1.0, 0.0, 3.0]).is_categorical_only(&s));
        assert!(Translation::manual(vec![0.0, 1.0, f64::NAN, 0.0])
            .validate(&s)
            .is_err());
    }
}
