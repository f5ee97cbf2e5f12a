use serde::{Deserialize, Serialize};

/// Fully connected layer; `weights` is row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            out.push(row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias[o]);
        }
    }
}

/// ReLU network with a two-logit softmax head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub dim: usize,
    pub layers: Vec<DenseLayer>,
}

impl Mlp {
    /// Pre-activations of every layer.
    pub(crate) fn forward_all(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut act = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.outputs);
            layer.forward(&act, &mut z);
            if i + 1 < self.layers.len() {
                act = z.iter().map(|&v| v.max(0.0)).collect();
            }
            pre.push(z);
        }
        pre
    }

    /// Logit difference `z1 - z0`.
    pub fn score(&self, x: &[f64]) -> f64 {
        let mut act = x.to_vec();
        let mut z = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward(&act, &mut z);
            if i + 1 < self.layers.len() {
                for v in z.iter_mut() {
                    *v = v.max(0.0);
                }
            }
            std::mem::swap(&mut act, &mut z);
        }
        act[1] - act[0]
    }

    /// Softmax probability of each class.
    pub fn probabilities(&self, x: &[f64]) -> [f64; 2] {
        let p1 = super::sigmoid(self.score(x));
        [1.0 - p1, p1]
    }

    /// Backpropagated d(score)/dx.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let pre = self.forward_all(x);
        // d score / d logits = [-1, 1]
        let mut upstream = vec![-1.0, 1.0];
        for (i, layer) in self.layers.iter().enumerate().rev() {
            if i + 1 < self.layers.len() {
                for (g, z) in upstream.iter_mut().zip(&pre[i]) {
                    if *z <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            let mut down = vec![0.0; layer.inputs];
            for (o, g) in upstream.iter().enumerate() {
                if *g == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (d, w) in down.iter_mut().zip(row) {
                    *d += g * w;
                }
            }
            upstream = down;
        }
        upstream
    }

    pub(crate) fn validate(&self) -> Result<(), String> {
        let Some(last) = self.layers.last() else {
            return Err("mlp: no layers".into());
        };
        if last.outputs != 2 {
            return Err(format!(
                "mlp: head must have 2 outputs, got {}",
                last.outputs
            ));
        }
        let mut width = self.dim;
        for (i, l) in self.layers.iter().enumerate() {
            if l.inputs != width {
                return Err(format!(
                    "mlp: layer {i} expects {} inputs, previous width {}",
                    l.inputs, width
                ));
            }
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(format!("mlp: layer {i} parameter shape mismatch"));
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(format!("mlp: layer {i} has non-finite parameters"));
            }
            width = l.outputs;
        }
        Ok(())
    }
}
