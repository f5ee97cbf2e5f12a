use serde::{Deserialize, Serialize};

/// Hyperplane `w.x + b`, shared by logistic regression and the linear SVM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub dim: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn new(weights: Vec<f64>, bias: f64) -> Self {
        LinearModel {
            dim: weights.len(),
            weights,
            bias,
        }
    }

    /// `w.x + b`, accumulated in four interleaved lanes.
    pub fn margin(&self, x: &[f64]) -> f64 {
        let x = &x[..self.weights.len()];
        let mut acc = [0.0; 4];
        let (wc, xc) = (self.weights.chunks_exact(4), x.chunks_exact(4));
        let (wr, xr) = (wc.remainder(), xc.remainder());
        for (w, v) in wc.zip(xc) {
            for l in 0..4 {
                acc[l] += w[l] * v[l];
            }
        }
        let mut tail = 0.0;
        for (w, v) in wr.iter().zip(xr) {
            tail += w * v;
        }
        (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail + self.bias
    }

    pub(crate) fn validate(&self) -> Result<(), String> {
        if self.weights.len() != self.dim {
            return Err(format!(
                "linear model: dim {} but {} weights",
                self.dim,
                self.weights.len()
            ));
        }
        if !self.bias.is_finite() || self.weights.iter().any(|w| !w.is_finite()) {
            return Err("linear model: non-finite parameter".into());
        }
        Ok(())
    }
}
