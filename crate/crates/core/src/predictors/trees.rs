use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::FeatureSchema;

/// Binary tree stored as flat node arrays.
///
/// Node `i` is a leaf when `feature[i] < 0`; otherwise rows with
/// `x[feature[i]] < threshold[i]` go to `left[i]`, the rest to `right[i]`.
/// `gain` and `cover` (rows reaching the node) are recorded per node so that
/// importances need no training state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub feature: Vec<i64>,
    pub threshold: Vec<f64>,
    pub left: Vec<i64>,
    pub right: Vec<i64>,
    pub value: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cover: Option<Vec<f64>>,
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Tree {
            feature: vec![-1],
            threshold: vec![0.0],
            left: vec![-1],
            right: vec![-1],
            value: vec![value],
            gain: Some(vec![0.0]),
            cover: Some(vec![0.0]),
        }
    }

    pub fn len(&self) -> usize {
        self.feature.len()
    }

    pub fn is_empty(&self) -> bool {
        self.feature.is_empty()
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let mut node = 0usize;
        loop {
            let f = self.feature[node];
            if f < 0 {
                return self.value[node];
            }
            node = if x[f as usize] < self.threshold[node] {
                self.left[node] as usize
            } else {
                self.right[node] as usize
            };
        }
    }

    fn validate(&self, dim: usize) -> std::result::Result<(), String> {
        let n = self.feature.len();
        if n == 0 {
            return Err("tree with no nodes".into());
        }
        for len in [
            self.threshold.len(),
            self.left.len(),
            self.right.len(),
            self.value.len(),
        ] {
            if len != n {
                return Err("tree node arrays differ in length".into());
            }
        }
        for stats in [&self.gain, &self.cover].into_iter().flatten() {
            if stats.len() != n {
                return Err("tree statistics length mismatch".into());
            }
        }
        for i in 0..n {
            let f = self.feature[i];
            if f < 0 {
                continue;
            }
            if f as usize >= dim {
                return Err(format!("split feature {f} out of range for dim {dim}"));
            }
            for child in [self.left[i], self.right[i]] {
                // children after parents keeps traversal acyclic
                if child <= i as i64 || child as usize >= n {
                    return Err(format!("node {i} has invalid child {child}"));
                }
            }
        }
        Ok(())
    }
}

/// Additive ensemble: `score = base_score + sum of tree outputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub dim: usize,
    pub base_score: f64,
    pub trees: Vec<Tree>,
}

impl TreeEnsemble {
    /// Single split on `feature` at `threshold`, with unit gain and cover.
    pub fn stump(dim: usize, feature: usize, threshold: f64, left: f64, right: f64) -> Self {
        TreeEnsemble {
            dim,
            base_score: 0.0,
            trees: vec![Tree {
                feature: vec![feature as i64, -1, -1],
                threshold: vec![threshold, 0.0, 0.0],
                left: vec![1, -1, -1],
                right: vec![2, -1, -1],
                value: vec![0.0, left, right],
                gain: Some(vec![1.0, 0.0, 0.0]),
                cover: Some(vec![1.0, 0.0, 0.0]),
            }],
        }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.evaluate(x)).sum::<f64>()
    }

    /// Gain x cover importance per schema feature, normalized to sum 1.
    ///
    /// Categorical features receive the sum over their one-hot coordinates.
    pub fn feature_importances(&self, schema: &FeatureSchema) -> Result<Vec<f64>> {
        schema.check_dim(self.dim)?;
        let mut per_coord = vec![0.0; self.dim];
        for (t, tree) in self.trees.iter().enumerate() {
            let (Some(gain), Some(cover)) = (&tree.gain, &tree.cover) else {
                return Err(Error::Capability(format!(
                    "tree {t} has no recorded gain/cover statistics"
                )));
            };
            for node in 0..tree.len() {
                if tree.feature[node] >= 0 {
                    per_coord[tree.feature[node] as usize] += gain[node] * cover[node];
                }
            }
        }
        let mut per_feature: Vec<f64> = (0..schema.len())
            .map(|f| schema.span(f).map(|c| per_coord[c]).sum())
            .collect();
        let total: f64 = per_feature.iter().sum();
        if total > 0.0 {
            for v in &mut per_feature {
                *v /= total;
            }
        }
        Ok(per_feature)
    }

    pub(crate) fn validate(&self) -> std::result::Result<(), String> {
        if !self.base_score.is_finite() {
            return Err("non-finite base score".into());
        }
        for (i, t) in self.trees.iter().enumerate() {
            t.validate(self.dim).map_err(|e| format!("tree {i}: {e}"))?;
        }
        Ok(())
    }
}
