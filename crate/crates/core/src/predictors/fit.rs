//! Small deterministic trainers for the native model kinds.
//!
//! Gradient-trained kinds fit on standardized inputs with full-batch Adam and
//! fold the standardization back into the first layer, so saved models act on
//! raw encoded vectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{sigmoid, DenseLayer, LinearModel, Mlp, Model, Tree, TreeEnsemble};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logistic,
    LinearSvm,
    Mlp,
    TreeEnsemble,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Logistic => "logistic",
            ModelKind::LinearSvm => "linear_svm",
            ModelKind::Mlp => "mlp",
            ModelKind::TreeEnsemble => "tree_ensemble",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitParams {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    /// Hidden layer widths of the MLP.
    pub hidden: Vec<usize>,
    /// Dropout rate on hidden activations, applied during fitting only.
    pub dropout: f64,
    pub trees: usize,
    pub max_depth: usize,
    pub min_child_rows: usize,
    pub shrinkage: f64,
    pub tree_lambda: f64,
    pub seed: u64,
}

impl Default for FitParams {
    fn default() -> Self {
        FitParams {
            epochs: 400,
            learning_rate: 0.05,
            l2: 1e-4,
            hidden: vec![16],
            dropout: 0.0,
            trees: 20,
            max_depth: 3,
            min_child_rows: 5,
            shrinkage: 0.3,
            tree_lambda: 1.0,
            seed: 0,
        }
    }
}

/// Trains a model of `kind` on `dataset` with binary `labels`.
pub fn fit(kind: ModelKind, dataset: &Dataset, labels: &[u8], params: &FitParams) -> Result<Model> {
    if labels.len() != dataset.len() {
        return Err(Error::Dimension {
            expected: dataset.len(),
            got: labels.len(),
        });
    }
    let ones = labels.iter().filter(|&&l| l == 1).count();
    if ones == 0 || ones == labels.len() {
        return Err(Error::Fit("labels contain a single class".into()));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::Fit("labels must be 0 or 1".into()));
    }
    match kind {
        ModelKind::Logistic => Ok(Model::Logistic(fit_linear(
            dataset,
            labels,
            params,
            Loss::Logistic,
        ))),
        ModelKind::LinearSvm => Ok(Model::LinearSvm(fit_linear(
            dataset,
            labels,
            params,
            Loss::Hinge,
        ))),
        ModelKind::Mlp => fit_mlp(dataset, labels, params).map(Model::Mlp),
        ModelKind::TreeEnsemble => Ok(Model::TreeEnsemble(fit_trees(dataset, labels, params))),
    }
}

struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn new(ds: &Dataset) -> Self {
        let d = ds.dim();
        let n = ds.len() as f64;
        let mut mean = vec![0.0; d];
        for row in ds.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; d];
        for row in ds.rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let scale = var
            .into_iter()
            .map(|v| if v > 1e-12 { v.sqrt() } else { 1.0 })
            .collect();
        Standardizer { mean, scale }
    }

    fn apply(&self, ds: &Dataset) -> Vec<Vec<f64>> {
        ds.rows()
            .map(|r| {
                r.iter()
                    .zip(&self.mean)
                    .zip(&self.scale)
                    .map(|((v, m), s)| (v - m) / s)
                    .collect()
            })
            .collect()
    }

    /// Rewrites `w.z + b` on standardized `z` as `w'.x + b'` on raw `x`.
    fn fold(&self, weights: &[f64], bias: f64) -> (Vec<f64>, f64) {
        let w: Vec<f64> = weights
            .iter()
            .zip(&self.scale)
            .map(|(w, s)| w / s)
            .collect();
        let b = bias - w.iter().zip(&self.mean).map(|(w, m)| w * m).sum::<f64>();
        (w, b)
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    fn new(n: usize, lr: f64) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-8);
        }
    }
}

#[derive(Clone, Copy)]
enum Loss {
    Logistic,
    Hinge,
}

fn fit_linear(ds: &Dataset, labels: &[u8], params: &FitParams, loss: Loss) -> LinearModel {
    let std = Standardizer::new(ds);
    let z = std.apply(ds);
    let d = ds.dim();
    let n = ds.len() as f64;
    // parameters: weights then bias
    let mut theta = vec![0.0; d + 1];
    let mut opt = Adam::new(d + 1, params.learning_rate);
    let mut grad = vec![0.0; d + 1];
    for _ in 0..params.epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (row, &y) in z.iter().zip(labels) {
            let s = row.iter().zip(&theta).map(|(a, b)| a * b).sum::<f64>() + theta[d];
            let ds_coef = match loss {
                Loss::Logistic => sigmoid(s) - f64::from(y),
                Loss::Hinge => {
                    let sign = if y == 1 { 1.0 } else { -1.0 };
                    if sign * s < 1.0 {
                        -sign
                    } else {
                        0.0
                    }
                }
            };
            if ds_coef == 0.0 {
                continue;
            }
            for (g, a) in grad.iter_mut().zip(row) {
                *g += ds_coef * a / n;
            }
            grad[d] += ds_coef / n;
        }
        for i in 0..d {
            grad[i] += params.l2 * theta[i];
        }
        opt.step(&mut theta, &grad);
    }
    let (w, b) = std.fold(&theta[..d], theta[d]);
    LinearModel::new(w, b)
}

fn fit_mlp(ds: &Dataset, labels: &[u8], params: &FitParams) -> Result<Mlp> {
    if !(0.0..1.0).contains(&params.dropout) {
        return Err(Error::Fit(format!(
            "dropout {} not in [0, 1)",
            params.dropout
        )));
    }
    let std = Standardizer::new(ds);
    let z = std.apply(ds);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut widths = vec![ds.dim()];
    widths.extend(params.hidden.iter().copied().filter(|&h| h > 0));
    widths.push(2);
    let mut layers: Vec<DenseLayer> = widths
        .windows(2)
        .map(|w| {
            let (i, o) = (w[0], w[1]);
            let limit = (6.0 / (i + o) as f64).sqrt();
            DenseLayer {
                inputs: i,
                outputs: o,
                weights: (0..i * o)
                    .map(|_| rng.random_range(-limit..limit))
                    .collect(),
                bias: vec![0.0; o],
            }
        })
        .collect();

    let sizes: Vec<usize> = layers
        .iter()
        .map(|l| l.weights.len() + l.bias.len())
        .collect();
    let total: usize = sizes.iter().sum();
    let mut opt = Adam::new(total, params.learning_rate);
    let n = ds.len() as f64;
    let keep = 1.0 - params.dropout;

    for _ in 0..params.epochs {
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> = layers
            .iter()
            .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
            .collect();
        for (row, &y) in z.iter().zip(labels) {
            // forward with dropout masks on hidden activations
            let mut acts: Vec<Vec<f64>> = vec![row.clone()];
            let mut masks: Vec<Vec<f64>> = Vec::new();
            let mut buf = Vec::new();
            for (li, layer) in layers.iter().enumerate() {
                layer.forward(acts.last().expect("input"), &mut buf);
                if li + 1 < layers.len() {
                    let mask: Vec<f64> = buf
                        .iter()
                        .map(|&v| {
                            if v <= 0.0 || (params.dropout > 0.0 && rng.random::<f64>() >= keep) {
                                0.0
                            } else {
                                1.0 / keep
                            }
                        })
                        .collect();
                    let a: Vec<f64> = buf.iter().zip(&mask).map(|(v, m)| v * m).collect();
                    masks.push(mask);
                    acts.push(a);
                } else {
                    acts.push(buf.clone());
                }
            }
            let logits = acts.last().expect("logits");
            let p1 = sigmoid(logits[1] - logits[0]);
            let t = f64::from(y);
            // cross-entropy gradient wrt logits of a 2-way softmax
            let mut upstream = vec![(1.0 - p1) - (1.0 - t), p1 - t];
            for li in (0..layers.len()).rev() {
                let layer = &layers[li];
                let input = &acts[li];
                let (gw, gb) = &mut grads[li];
                for o in 0..layer.outputs {
                    let g = upstream[o] / n;
                    gb[o] += g;
                    for i in 0..layer.inputs {
                        gw[o * layer.inputs + i] += g * input[i];
                    }
                }
                if li == 0 {
                    break;
                }
                let mut down = vec![0.0; layer.inputs];
                for o in 0..layer.outputs {
                    let row_w = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for i in 0..layer.inputs {
                        down[i] += upstream[o] * row_w[i];
                    }
                }
                for (dv, m) in down.iter_mut().zip(&masks[li - 1]) {
                    *dv *= m;
                }
                upstream = down;
            }
        }
        let mut flat_params = Vec::with_capacity(total);
        let mut flat_grads = Vec::with_capacity(total);
        for (layer, (gw, gb)) in layers.iter().zip(&grads) {
            flat_params.extend_from_slice(&layer.weights);
            flat_params.extend_from_slice(&layer.bias);
            flat_grads.extend(
                gw.iter()
                    .zip(&layer.weights)
                    .map(|(g, w)| g + params.l2 * w),
            );
            flat_grads.extend_from_slice(gb);
        }
        opt.step(&mut flat_params, &flat_grads);
        let mut at = 0;
        for layer in &mut layers {
            let nw = layer.weights.len();
            layer.weights.copy_from_slice(&flat_params[at..at + nw]);
            at += nw;
            let nb = layer.bias.len();
            layer.bias.copy_from_slice(&flat_params[at..at + nb]);
            at += nb;
        }
    }

    // fold standardization into the first layer
    let first = &mut layers[0];
    for o in 0..first.outputs {
        let row = &mut first.weights[o * first.inputs..(o + 1) * first.inputs];
        let (w, b) = std.fold(row, first.bias[o]);
        row.copy_from_slice(&w);
        first.bias[o] = b;
    }
    Ok(Mlp {
        dim: ds.dim(),
        layers,
    })
}

fn fit_trees(ds: &Dataset, labels: &[u8], params: &FitParams) -> TreeEnsemble {
    let n = ds.len();
    let pos = labels.iter().filter(|&&l| l == 1).count() as f64 / n as f64;
    let base = (pos / (1.0 - pos)).ln();
    let mut scores = vec![base; n];
    let mut trees = Vec::with_capacity(params.trees);
    let rows: Vec<&[f64]> = ds.rows().collect();
    for _ in 0..params.trees {
        let mut g = Vec::with_capacity(n);
        let mut h = Vec::with_capacity(n);
        for (s, &y) in scores.iter().zip(labels) {
            let p = sigmoid(*s);
            g.push(p - f64::from(y));
            h.push((p * (1.0 - p)).max(1e-6));
        }
        let mut builder = TreeBuilder {
            rows: &rows,
            g: &g,
            h: &h,
            params,
            tree: Tree {
                feature: Vec::new(),
                threshold: Vec::new(),
                left: Vec::new(),
                right: Vec::new(),
                value: Vec::new(),
                gain: Some(Vec::new()),
                cover: Some(Vec::new()),
            },
        };
        let all: Vec<usize> = (0..n).collect();
        builder.grow(&all, 0);
        let tree = builder.tree;
        for (s, row) in scores.iter_mut().zip(&rows) {
            *s += tree.evaluate(row);
        }
        trees.push(tree);
    }
    TreeEnsemble {
        dim: ds.dim(),
        base_score: base,
        trees,
    }
}

struct TreeBuilder<'a> {
    rows: &'a [&'a [f64]],
    g: &'a [f64],
    h: &'a [f64],
    params: &'a FitParams,
    tree: Tree,
}

impl TreeBuilder<'_> {
    fn push_node(&mut self, cover: usize) -> usize {
        let t = &mut self.tree;
        t.feature.push(-1);
        t.threshold.push(0.0);
        t.left.push(-1);
        t.right.push(-1);
        t.value.push(0.0);
        t.gain.as_mut().expect("stats").push(0.0);
        t.cover.as_mut().expect("stats").push(cover as f64);
        t.feature.len() - 1
    }

    fn grow(&mut self, idx: &[usize], depth: usize) -> usize {
        let node = self.push_node(idx.len());
        let gs: f64 = idx.iter().map(|&i| self.g[i]).sum();
        let hs: f64 = idx.iter().map(|&i| self.h[i]).sum();
        let lambda = self.params.tree_lambda;
        let leaf_value = -self.params.shrinkage * gs / (hs + lambda);

        let min_child = self.params.min_child_rows.max(1);
        let mut best: Option<(f64, usize, f64)> = None;
        if depth < self.params.max_depth && idx.len() >= 2 * min_child {
            let parent = gs * gs / (hs + lambda);
            let dim = self.rows[0].len();
            let mut order: Vec<usize> = idx.to_vec();
            for c in 0..dim {
                order.sort_by(|&a, &b| self.rows[a][c].total_cmp(&self.rows[b][c]).then(a.cmp(&b)));
                let (mut gl, mut hl) = (0.0, 0.0);
                for k in 0..order.len() - 1 {
                    let i = order[k];
                    gl += self.g[i];
                    hl += self.h[i];
                    let (lo, hi) = (self.rows[i][c], self.rows[order[k + 1]][c]);
                    if lo == hi || k + 1 < min_child || order.len() - k - 1 < min_child {
                        continue;
                    }
                    let (gr, hr) = (gs - gl, hs - hl);
                    let gain = 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent);
                    if gain > 1e-12 && best.is_none_or(|(bg, _, _)| gain > bg) {
                        best = Some((gain, c, 0.5 * (lo + hi)));
                    }
                }
            }
        }
        match best {
            None => {
                self.tree.value[node] = leaf_value;
                node
            }
            Some((gain, coord, threshold)) => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    idx.iter().partition(|&&i| self.rows[i][coord] < threshold);
                self.tree.feature[node] = coord as i64;
                self.tree.threshold[node] = threshold;
                self.tree.gain.as_mut().expect("stats")[node] = gain;
                let left = self.grow(&l, depth + 1);
                let right = self.grow(&r, depth + 1);
                self.tree.left[node] = left as i64;
                self.tree.right[node] = right as i64;
                node
            }
        }
    }
}
