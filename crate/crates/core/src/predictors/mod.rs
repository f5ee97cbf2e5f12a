//! Binary classifiers behind one black-box interface.
//!
//! Every model exposes a real-valued `score` with the convention
//! `score(x) > 0  <=>  predict(x) == 1`, where class 1 is the desired outcome.
//! Linear kinds return the raw margin `w.x + b`; the MLP returns the logit
//! difference `z1 - z0` (so the undesired-class softmax is `sigmoid(-score)`);
//! tree ensembles return the boosted log-odds.

mod fit;
mod linear;
mod mlp;
mod trees;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::FeatureSchema;

pub use fit::{fit, FitParams, ModelKind};
pub use linear::LinearModel;
pub use mlp::{DenseLayer, Mlp};
pub use trees::{Tree, TreeEnsemble};

/// Current version of the model file format.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Read-only classifier. Implementations must tolerate concurrent calls.
pub trait Predictor: Send + Sync {
    /// Expected input (encoded) dimension.
    fn dim(&self) -> usize;

    /// Raw score; callers guarantee `x.len() == self.dim()`.
    fn score(&self, x: &[f64]) -> f64;

    fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.score(x) > 0.0)
    }

    /// Analytic gradient of `score` with respect to the input.
    fn gradient(&self, _x: &[f64]) -> Result<Vec<f64>> {
        Err(Error::Capability("model is not differentiable".into()))
    }

    fn try_score(&self, x: &[f64]) -> Result<f64> {
        check_len(self.dim(), x.len())?;
        Ok(self.score(x))
    }

    fn gradient_wrt_input(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), x.len())?;
        self.gradient(x)
    }

    /// Predicts every row of a flat row-major matrix.
    fn predict_batch(&self, matrix: &[f64]) -> Result<Vec<u8>> {
        let d = self.dim();
        if d == 0 || !matrix.len().is_multiple_of(d) {
            return Err(Error::Dimension {
                expected: d,
                got: matrix.len(),
            });
        }
        Ok(matrix
            .chunks_exact(d)
            .map(|row| self.predict(row))
            .collect())
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { expected, got });
    }
    Ok(())
}

/// Native models shipped with the crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Logistic(LinearModel),
    LinearSvm(LinearModel),
    Mlp(Mlp),
    TreeEnsemble(TreeEnsemble),
}

impl Model {
    pub fn logistic(weights: Vec<f64>, bias: f64) -> Self {
        Model::Logistic(LinearModel::new(weights, bias))
    }

    pub fn linear_svm(weights: Vec<f64>, bias: f64) -> Self {
        Model::LinearSvm(LinearModel::new(weights, bias))
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Logistic(_) => ModelKind::Logistic,
            Model::LinearSvm(_) => ModelKind::LinearSvm,
            Model::Mlp(_) => ModelKind::Mlp,
            Model::TreeEnsemble(_) => ModelKind::TreeEnsemble,
        }
    }

    /// Weights and bias of linear kinds.
    pub fn as_linear(&self) -> Option<&LinearModel> {
        match self {
            Model::Logistic(m) | Model::LinearSvm(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_trees(&self) -> Option<&TreeEnsemble> {
        match self {
            Model::TreeEnsemble(t) => Some(t),
            _ => None,
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        match self {
            Model::Logistic(m) | Model::LinearSvm(m) => m.validate(),
            Model::Mlp(m) => m.validate(),
            Model::TreeEnsemble(t) => t.validate(),
        }
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct File<'a> {
            format_version: u32,
            #[serde(flatten)]
            model: &'a Model,
        }
        serde_json::to_string_pretty(&File {
            format_version: MODEL_FORMAT_VERSION,
            model: self,
        })
        .expect("model serializes")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        #[derive(Deserialize)]
        struct File {
            format_version: u32,
            #[serde(flatten)]
            model: Model,
        }
        let file: File = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(format!(
                "unsupported model format_version {} (expected {})",
                file.format_version, MODEL_FORMAT_VERSION
            ));
        }
        file.model.validate()?;
        Ok(file.model)
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

    /// Human-readable summary used by `inspect-model`.
    pub fn describe(&self, schema: Option<&FeatureSchema>) -> String {
        let mut out = format!("kind: {}\ndim: {}\n", self.kind().as_str(), self.dim());
        match self {
            Model::Logistic(m) | Model::LinearSvm(m) => {
                out.push_str(&format!("bias: {}\n", m.bias));
                for (i, w) in m.weights.iter().enumerate() {
                    out.push_str(&format!("w[{}] {}: {}\n", i, coord_name(schema, i), w));
                }
            }
            Model::Mlp(m) => {
                let widths: Vec<String> = m.layers.iter().map(|l| l.outputs.to_string()).collect();
                out.push_str(&format!("layers: {} -> {}\n", m.dim, widths.join(" -> ")));
            }
            Model::TreeEnsemble(t) => {
                out.push_str(&format!(
                    "trees: {}\nbase_score: {}\n",
                    t.trees.len(),
                    t.base_score
                ));
                if let Some(schema) = schema {
                    match t.feature_importances(schema) {
                        Ok(imp) => {
                            for (f, v) in schema.features().iter().zip(imp) {
                                out.push_str(&format!("importance {}: {:.6}\n", f.name, v));
                            }
                        }
                        Err(e) => out.push_str(&format!("importances unavailable: {e}\n")),
                    }
                }
            }
        }
        out
    }
}

fn coord_name(schema: Option<&FeatureSchema>, coord: usize) -> String {
    let Some(schema) = schema else {
        return String::new();
    };
    if coord >= schema.dim() {
        return String::new();
    }
    let f = schema.feature_of_coord(coord);
    let spec = schema.feature(f);
    match spec.values() {
        Some(values) => format!("{}={}", spec.name, values[coord - schema.offset(f)]),
        None => spec.name.clone(),
    }
}

impl Predictor for Model {
    fn dim(&self) -> usize {
        match self {
            Model::Logistic(m) | Model::LinearSvm(m) => m.weights.len(),
            Model::Mlp(m) => m.dim,
            Model::TreeEnsemble(t) => t.dim,
        }
    }

    fn score(&self, x: &[f64]) -> f64 {
        match self {
            Model::Logistic(m) | Model::LinearSvm(m) => m.margin(x),
            Model::Mlp(m) => m.score(x),
            Model::TreeEnsemble(t) => t.score(x),
        }
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Model::Logistic(m) | Model::LinearSvm(m) => Ok(m.weights.clone()),
            Model::Mlp(m) => Ok(m.gradient(x)),
            Model::TreeEnsemble(_) => Err(Error::Capability(
                "tree ensembles have no input gradient".into(),
            )),
        }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
