//! Feature schema: per-feature kinds, cost weights and the one-hot encoding layout.
//!
//! Encoded vectors concatenate the features in schema order. A categorical
//! feature with `n` values occupies `n` coordinates (one-hot); a continuous
//! feature occupies one coordinate holding the raw value.

use std::collections::HashSet;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Current version of the schema file format.
pub const SCHEMA_FORMAT_VERSION: u32 = 1;

/// Default number of equal-width bins for continuous features.
pub const DEFAULT_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Categorical {
        values: Vec<String>,
    },
    Continuous {
        min: f64,
        max: f64,
        #[serde(default = "default_bins")]
        bins: usize,
    },
}

fn default_bins() -> usize {
    DEFAULT_BINS
}

fn default_weight() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
    #[serde(default = "default_weight")]
    pub cost_weight: f64,
    #[serde(default = "default_true")]
    pub actionable: bool,
}

impl FeatureSpec {
    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        values: impl IntoIterator<Item = S>,
    ) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Categorical {
                values: values.into_iter().map(Into::into).collect(),
            },
            cost_weight: 1.0,
            actionable: true,
        }
    }

    pub fn continuous(name: impl Into<String>, min: f64, max: f64) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Continuous {
                min,
                max,
                bins: DEFAULT_BINS,
            },
            cost_weight: 1.0,
            actionable: true,
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.cost_weight = weight;
        self
    }

    pub fn with_bins(mut self, count: usize) -> Self {
        if let FeatureKind::Continuous { bins, .. } = &mut self.kind {
            *bins = count;
        }
        self
    }

    pub fn immutable(mut self) -> Self {
        self.actionable = false;
        self
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, FeatureKind::Categorical { .. })
    }

    /// Number of encoded coordinates.
    pub fn width(&self) -> usize {
        match &self.kind {
            FeatureKind::Categorical { values } => values.len(),
            FeatureKind::Continuous { .. } => 1,
        }
    }

    pub fn values(&self) -> Option<&[String]> {
        match &self.kind {
            FeatureKind::Categorical { values } => Some(values),
            FeatureKind::Continuous { .. } => None,
        }
    }

    pub fn value_index(&self, label: &str) -> Option<usize> {
        self.values()?.iter().position(|v| v == label)
    }

    pub fn bin_width(&self) -> Option<f64> {
        match self.kind {
            FeatureKind::Continuous { min, max, bins } => Some((max - min) / bins as f64),
            FeatureKind::Categorical { .. } => None,
        }
    }

    /// Bin edges `min = e_0 < e_1 < … < e_b = max`.
    pub fn bin_edges(&self) -> Option<Vec<f64>> {
        match self.kind {
            FeatureKind::Continuous { min, max, bins } => {
                let width = (max - min) / bins as f64;
                let mut edges: Vec<f64> = (0..bins).map(|i| min + width * i as f64).collect();
                edges.push(max);
                Some(edges)
            }
            FeatureKind::Categorical { .. } => None,
        }
    }

    /// Centre of bin `bin` for a continuous feature.
    pub fn bin_midpoint(&self, bin: usize) -> Option<f64> {
        match self.kind {
            FeatureKind::Continuous { min, max, bins } => {
                let width = (max - min) / bins as f64;
                Some(min + width * (bin.min(bins - 1) as f64 + 0.5))
            }
            FeatureKind::Categorical { .. } => None,
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.name.is_empty() {
            return Err("feature with empty name".into());
        }
        if !(self.cost_weight.is_finite() && self.cost_weight > 0.0) {
            return Err(format!(
                "feature `{}`: cost weight must be a positive real, got {}",
                self.name, self.cost_weight
            ));
        }
        match &self.kind {
            FeatureKind::Categorical { values } => {
                if values.len() < 2 {
                    return Err(format!(
                        "feature `{}`: categorical features need at least 2 values",
                        self.name
                    ));
                }
                let mut seen = HashSet::new();
                for v in values {
                    if !seen.insert(v.as_str()) {
                        return Err(format!(
                            "feature `{}`: duplicate value label `{}`",
                            self.name, v
                        ));
                    }
                }
            }
            FeatureKind::Continuous { min, max, bins } => {
                if !(min.is_finite() && max.is_finite() && min < max) {
                    return Err(format!(
                        "feature `{}`: need finite min < max, got [{}, {}]",
                        self.name, min, max
                    ));
                }
                if *bins == 0 {
                    return Err(format!(
                        "feature `{}`: bin count must be at least 1",
                        self.name
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Maps a continuous value to its equal-width bin in `[0, b-1]`.
///
/// Values on an interior edge belong to the upper bin; `max` maps to the last bin.
pub fn bin_index(value: f64, feature: &FeatureSpec) -> Result<usize> {
    let FeatureKind::Continuous { min, max, bins } = feature.kind else {
        return Err(Error::Capability(format!(
            "bin_index on categorical feature `{}`",
            feature.name
        )));
    };
    if !(value >= min && value <= max) {
        return Err(Error::Range {
            feature: feature.name.clone(),
            value,
            min,
            max,
        });
    }
    Ok(raw_bin(value, min, max, bins).clamp(0, bins as i64 - 1) as usize)
}

fn raw_bin(value: f64, min: f64, max: f64, bins: usize) -> i64 {
    let width = (max - min) / bins as f64;
    ((value - min) / width).floor() as i64
}

/// Bin index that keeps extending past the range instead of failing.
///
/// Inside `[min, max]` this agrees with [`bin_index`]. Used by the cost model so
/// that it stays total when rounding does not clamp.
pub(crate) fn extended_bin(value: f64, min: f64, max: f64, bins: usize) -> i64 {
    if value >= min && value <= max {
        raw_bin(value, min, max, bins).clamp(0, bins as i64 - 1)
    } else {
        raw_bin(value, min, max, bins)
    }
}

/// A raw (decoded) feature value.
#[derive(Debug, Clone, PartialEq)]
pub enum RawValue {
    Category(String),
    Number(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SchemaFile {
    format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label_column: Option<String>,
    features: Vec<FeatureSpec>,
}

/// Ordered feature list with a precomputed encoding layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSchema {
    features: Vec<FeatureSpec>,
    offsets: Vec<usize>,
    dim: usize,
    label_column: Option<String>,
}

impl FeatureSchema {
    pub fn new(features: Vec<FeatureSpec>) -> Result<Self> {
        let mut names = HashSet::new();
        for f in &features {
            f.validate().map_err(Error::Schema)?;
            if !names.insert(f.name.as_str()) {
                return Err(Error::Schema(format!(
                    "duplicate feature name `{}`",
                    f.name
                )));
            }
        }
        if features.is_empty() {
            return Err(Error::Schema("schema has no features".into()));
        }
        let mut offsets = Vec::with_capacity(features.len());
        let mut dim = 0;
        for f in &features {
            offsets.push(dim);
            dim += f.width();
        }
        Ok(FeatureSchema {
            features,
            offsets,
            dim,
            label_column: None,
        })
    }

    pub fn with_label_column(mut self, name: impl Into<String>) -> Self {
        self.label_column = Some(name.into());
        self
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        let file: SchemaFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if file.format_version != SCHEMA_FORMAT_VERSION {
            return Err(format!(
                "unsupported schema format_version {} (expected {})",
                file.format_version, SCHEMA_FORMAT_VERSION
            ));
        }
        let mut schema = FeatureSchema::new(file.features).map_err(|e| e.to_string())?;
        schema.label_column = file.label_column;
        Ok(schema)
    }

    pub fn to_json(&self) -> String {
        let file = SchemaFile {
            format_version: SCHEMA_FORMAT_VERSION,
            label_column: self.label_column.clone(),
            features: self.features.clone(),
        };
        serde_json::to_string_pretty(&file).expect("schema serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|m| Error::parse(path, m))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn feature(&self, index: usize) -> &FeatureSpec {
        &self.features[index]
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Total encoded dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label_column(&self) -> Option<&str> {
        self.label_column.as_deref()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Encoded coordinates occupied by feature `index`.
    pub fn span(&self, index: usize) -> Range<usize> {
        let start = self.offsets[index];
        start..start + self.features[index].width()
    }

    pub fn offset(&self, index: usize) -> usize {
        self.offsets[index]
    }

    /// Feature index owning encoded coordinate `coord`.
    pub fn feature_of_coord(&self, coord: usize) -> usize {
        match self.offsets.binary_search(&coord) {
            Ok(i) => i,
            Err(i) => i - 1,
        }
    }

    pub fn has_categorical(&self) -> bool {
        self.features.iter().any(FeatureSpec::is_categorical)
    }

    pub fn has_continuous(&self) -> bool {
        self.features.iter().any(|f| !f.is_categorical())
    }

    /// Categorical value index of an encoded row (argmax, ties to lowest index).
    pub fn category_of(&self, row: &[f64], index: usize) -> usize {
        argmax(&row[self.span(index)])
    }

    /// Encodes one raw row. Labels must belong to the schema and numbers lie in range.
    pub fn encode(&self, raw: &[RawValue]) -> Result<Vec<f64>> {
        if raw.len() != self.features.len() {
            return Err(Error::Dimension {
                expected: self.features.len(),
                got: raw.len(),
            });
        }
        let mut out = vec![0.0; self.dim];
        for (i, (spec, value)) in self.features.iter().zip(raw).enumerate() {
            let off = self.offsets[i];
            match (&spec.kind, value) {
                (FeatureKind::Categorical { .. }, RawValue::Category(label)) => {
                    let idx = spec.value_index(label).ok_or_else(|| {
                        Error::Schema(format!("value `{}` not in feature `{}`", label, spec.name))
                    })?;
                    out[off + idx] = 1.0;
                }
                (FeatureKind::Continuous { min, max, .. }, RawValue::Number(v)) => {
                    if !(*v >= *min && *v <= *max) {
                        return Err(Error::Range {
                            feature: spec.name.clone(),
                            value: *v,
                            min: *min,
                            max: *max,
                        });
                    }
                    out[off] = *v;
                }
                _ => {
                    return Err(Error::Schema(format!(
                        "value kind does not match feature `{}`",
                        spec.name
                    )))
                }
            }
        }
        Ok(out)
    }

    pub fn decode(&self, row: &[f64]) -> Result<Vec<RawValue>> {
        self.check_dim(row.len())?;
        Ok(self
            .features
            .iter()
            .enumerate()
            .map(|(i, spec)| match &spec.kind {
                FeatureKind::Categorical { values } => {
                    RawValue::Category(values[self.category_of(row, i)].clone())
                }
                FeatureKind::Continuous { .. } => RawValue::Number(row[self.offsets[i]]),
            })
            .collect())
    }

    pub(crate) fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got,
            });
        }
        Ok(())
    }

    /// Checks the one-hot invariant and continuous ranges of an encoded row.
    pub fn validate_row(&self, row: &[f64]) -> Result<()> {
        self.check_dim(row.len())?;
        for (i, spec) in self.features.iter().enumerate() {
            let span = self.span(i);
            match spec.kind {
                FeatureKind::Categorical { .. } => {
                    let group = &row[span];
                    let ones = group.iter().filter(|&&v| v == 1.0).count();
                    let zeros = group.iter().filter(|&&v| v == 0.0).count();
                    if ones != 1 || ones + zeros != group.len() {
                        return Err(Error::Schema(format!(
                            "feature `{}` is not one-hot: {:?}",
                            spec.name, group
                        )));
                    }
                }
                FeatureKind::Continuous { min, max, .. } => {
                    let v = row[span.start];
                    if !(v >= min && v <= max) {
                        return Err(Error::Range {
                            feature: spec.name.clone(),
                            value: v,
                            min,
                            max,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Index of the largest entry; ties resolve to the lowest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pct() -> FeatureSpec {
        FeatureSpec::continuous("pct", 0.0, 100.0)
    }

    #[test]
    fn bin_index_examples() {
        assert_eq!(bin_index(25.0, &pct()).unwrap(), 2);
        assert_eq!(bin_index(100.0, &pct()).unwrap(), 9);
        assert_eq!(bin_index(47.0, &pct()).unwrap(), 4);
        assert_eq!(bin_index(0.0, &pct()).unwrap(), 0);
        // interior edges belong to the upper bin
        assert_eq!(bin_index(10.0, &pct()).unwrap(), 1);
    }

    #[test]
    fn bin_index_out_of_range() {
        assert!(matches!(bin_index(100.5, &pct()), Err(Error::Range { .. })));
        assert!(matches!(bin_index(-1.0, &pct()), Err(Error::Range { .. })));
        assert!(matches!(
            bin_index(f64::NAN, &pct()),
            Err(Error::Range { .. })
        ));
    }

    #[test]
    fn bin_index_rejects_categorical() {
        let f = FeatureSpec::categorical("c", ["a", "b"]);
        assert!(matches!(bin_index(0.0, &f), Err(Error::Capability(_))));
    }

    #[test]
    fn bin_edges_partition_range() {
        let f = FeatureSpec::continuous("x", -1.0, 2.0).with_bins(3);
        assert_eq!(f.bin_edges().unwrap(), vec![-1.0, 0.0, 1.0, 2.0]);
        assert_eq!(f.bin_midpoint(1).unwrap(), 0.5);
    }

    #[test]
    fn layout_dimension() {
        let s = FeatureSchema::new(vec![
            FeatureSpec::categorical("c", ["A", "B", "C"]),
            FeatureSpec::continuous("x", 0.0, 1.0),
            FeatureSpec::categorical("d", ["u", "v"]),
        ])
        .unwrap();
        assert_eq!(s.dim(), 6);
        assert_eq!(s.span(0), 0..3);
        assert_eq!(s.span(1), 3..4);
        assert_eq!(s.span(2), 4..6);
        assert_eq!(s.feature_of_coord(2), 0);
        assert_eq!(s.feature_of_coord(3), 1);
        assert_eq!(s.feature_of_coord(5), 2);
    }

    #[test]
    fn schema_validation() {
        assert!(FeatureSchema::new(vec![FeatureSpec::categorical("c", ["A"])]).is_err());
        assert!(FeatureSchema::new(vec![FeatureSpec::categorical("c", ["A", "A"])]).is_err());
        assert!(FeatureSchema::new(vec![FeatureSpec::continuous("x", 1.0, 1.0)]).is_err());
        assert!(
            FeatureSchema::new(vec![FeatureSpec::continuous("x", 0.0, 1.0).with_weight(0.0)])
                .is_err()
        );
        assert!(FeatureSchema::new(vec![
            FeatureSpec::continuous("x", 0.0, 1.0),
            FeatureSpec::continuous("x", 0.0, 1.0)
        ])
        .is_err());
    }

    #[test]
    fn json_roundtrip_and_defaults() {
        let text = r#"{
            "format_version": 1,
            "label_column": "y",
            "features": [
                {"name": "c", "kind": "categorical", "values": ["A", "B"]},
                {"name": "x", "kind": "continuous", "min": 0, "max": 10, "cost_weight": 2.0, "actionable": false}
            ]
        }"#;
        let s = FeatureSchema::from_json(text).unwrap();
        assert_eq!(s.label_column(), Some("y"));
        assert_eq!(s.feature(1).cost_weight, 2.0);
        assert!(!s.feature(1).actionable);
        assert_eq!(
            s.feature(1).kind,
            FeatureKind::Continuous {
                min: 0.0,
                max: 10.0,
                bins: 10
            }
        );
        let again = FeatureSchema::from_json(&s.to_json()).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn json_rejects_wrong_version() {
        let text = r#"{"format_version": 9, "features": [{"name": "x", "kind": "continuous", "min": 0, "max": 1}]}"#;
        assert!(FeatureSchema::from_json(text)
            .unwrap_err()
            .contains("format_version"));
    }

    #[test]
    fn encode_decode() {
        let s = FeatureSchema::new(vec![
            FeatureSpec::categorical("c", ["A", "B"]),
            FeatureSpec::continuous("x", 0.0, 10.0),
        ])
        .unwrap();
        let raw = vec![RawValue::Category("A".into()), RawValue::Number(4.2)];
        let enc = s.encode(&raw).unwrap();
        assert_eq!(enc, vec![1.0, 0.0, 4.2]);
        assert_eq!(s.decode(&enc).unwrap(), raw);
        assert!(s
            .encode(&[RawValue::Category("C".into()), RawValue::Number(4.2)])
            .is_err());
        assert!(s.validate_row(&enc).is_ok());
        assert!(s.validate_row(&[0.5, 0.5, 1.0]).is_err());
    }

    #[test]
    fn argmax_ties_lowest() {
        assert_eq!(argmax(&[0.2, 0.9, 0.4]), 1);
        assert_eq!(argmax(&[0.5, 0.5, 0.1]), 0);
        assert_eq!(argmax(&[0.1, 0.7, 0.7]), 1);
    }
}
