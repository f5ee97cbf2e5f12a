use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ares::{AresConfig, GroundMode};
use crate::dataset::SubgroupDescriptor;
use crate::error::{Error, Result};
use crate::generation::{GenerationConfig, GeneratorKind};
use crate::predictors::{FitParams, ModelKind};
use crate::rules::CrcMode;
use crate::schema::FeatureSchema;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub csv: PathBuf,
    pub schema: PathBuf,
    /// Required by every subcommand except `fit`.
    pub model: Option<PathBuf>,
    /// Keep only the first `max_inputs` affected rows.
    pub max_inputs: Option<usize>,
}

/// Scalar grid: a shared `[0, k_max]` grid, or a per-translation cost cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub m: usize,
    pub k_max: Option<f64>,
    pub cap: Option<f64>,
    /// Derive each translation's cap scalar from the affected inputs.
    pub probe: bool,
    pub clamp: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            m: 100,
            k_max: None,
            cap: None,
            probe: true,
            clamp: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub histogram_width: f64,
    pub crc_rows: usize,
    pub crc_mode: CrcMode,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            histogram_width: crate::report::DEFAULT_HISTOGRAM_WIDTH,
            crc_rows: 5,
            crc_mode: CrcMode::Spaced,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubgroupConfig {
    pub label: String,
    /// Categorical feature name to value label.
    #[serde(rename = "where")]
    pub predicates: BTreeMap<String, String>,
}

impl SubgroupConfig {
    pub fn descriptor(&self, schema: &FeatureSchema) -> Result<SubgroupDescriptor> {
        SubgroupDescriptor::new(schema, &self.predicates)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Translations kept by the multi-translation variant.
    pub multi_n: usize,
    pub ares_modes: Vec<GroundMode>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            multi_n: 3,
            ares_modes: vec![GroundMode::ThenGeneration],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub kind: ModelKind,
    pub train_fraction: f64,
    pub params: FitParams,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            kind: ModelKind::Logistic,
            train_fraction: 1.0,
            params: FitParams::default(),
        }
    }
}

/// Everything a run needs. Relative paths resolve against the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    pub data: DataConfig,
    #[serde(default)]
    pub generation: GenerationConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub report: ReportConfig,
    #[serde(default)]
    pub subgroups: Vec<SubgroupConfig>,
    #[serde(default)]
    pub ares: AresConfig,
    #[serde(default)]
    pub bench: BenchConfig,
    #[serde(default)]
    pub fit: FitConfig,
}

fn one() -> usize {
    1
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Explain,
    Compare,
    Ares,
    Bench,
    Fit,
    InspectModel,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Explain => "explain",
            Command::Compare => "compare",
            Command::Ares => "ares",
            Command::Bench => "bench",
            Command::Fit => "fit",
            Command::InspectModel => "inspect-model",
        }
    }
}

/// Command-line values that replace config keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(vec![e.message().to_string()]))
    }

    /// Parses `path`, resolves relative paths against its directory and
    /// applies `overrides` (a relative `--out` stays relative to the caller).
    pub fn load(path: impl AsRef<Path>, overrides: &Overrides) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(vec![format!("cannot read config {}: {e}", path.display())])
        })?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        cfg.apply(overrides);
        Ok(cfg)
    }

    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data.csv);
        fix(&mut self.data.schema);
        if let Some(m) = self.data.model.as_mut() {
            fix(m);
        }
        fix(&mut self.out);
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = Some(s);
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(w) = o.workers {
            self.workers = w;
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("validated config has a seed")
    }

    /// Every problem that would stop `command`; empty when runnable.
    pub fn problems(&self, command: Command) -> Vec<String> {
        let mut out = Vec::new();
        if self.seed.is_none() {
            out.push("seed: missing (set it in the config or pass --seed)".into());
        }
        if self.workers == 0 {
            out.push("workers must be at least 1".into());
        }
        if !self.data.csv.is_file() {
            out.push(format!(
                "data.csv: file not found: {}",
                self.data.csv.display()
            ));
        }
        let schema = if self.data.schema.is_file() {
            match FeatureSchema::load(&self.data.schema) {
                Ok(s) => Some(s),
                Err(e) => {
                    out.push(format!("data.schema: {e}"));
                    None
                }
            }
        } else {
            out.push(format!(
                "data.schema: file not found: {}",
                self.data.schema.display()
            ));
            None
        };
        if command != Command::Fit {
            match &self.data.model {
                None => out.push("data.model: missing".into()),
                Some(p) if !p.is_file() => {
                    out.push(format!("data.model: file not found: {}", p.display()))
                }
                Some(_) => {}
            }
        }
        if self.data.max_inputs == Some(0) {
            out.push("data.max_inputs must be at least 1".into());
        }
        let uses_gce = matches!(
            command,
            Command::Explain | Command::Compare | Command::Bench
        );
        if uses_gce {
            self.gce_problems(command, schema.as_ref(), &mut out);
        }
        if matches!(command, Command::Ares | Command::Bench) {
            out.extend(self.ares.problems());
        }
        if command == Command::Bench {
            if self.bench.multi_n < 2 {
                out.push("bench.multi_n must be at least 2".into());
            }
            if self.bench.multi_n > self.generation.n_s {
                out.push(format!(
                    "bench.multi_n ({}) exceeds generation.n_s ({})",
                    self.bench.multi_n, self.generation.n_s
                ));
            }
        }
        if command == Command::Compare {
            self.subgroup_problems(schema.as_ref(), &mut out);
        }
        if command == Command::Fit {
            if !(self.fit.train_fraction > 0.0 && self.fit.train_fraction <= 1.0) {
                out.push(format!(
                    "fit.train_fraction ({}) must be in (0, 1]",
                    self.fit.train_fraction
                ));
            }
            if let Some(s) = &schema {
                if s.label_column().is_none() {
                    out.push("data.schema: fit needs a label column".into());
                }
            }
            if self.fit.kind == ModelKind::Mlp && self.fit.params.hidden.contains(&0) {
                out.push("fit.params.hidden widths must be positive".into());
            }
            if !(0.0..1.0).contains(&self.fit.params.dropout) {
                out.push(format!(
                    "fit.params.dropout ({}) must be in [0, 1)",
                    self.fit.params.dropout
                ));
            }
        }
        out
    }

    fn gce_problems(
        &self,
        command: Command,
        schema: Option<&FeatureSchema>,
        out: &mut Vec<String>,
    ) {
        if let Some(s) = schema {
            out.extend(self.generation.problems(s));
        }
        let single = matches!(
            self.generation.kind,
            GeneratorKind::Gradient | GeneratorKind::SvmClosedForm
        );
        if single && (self.generation.n != 1 || command == Command::Bench) {
            out.push(format!(
                "generation.kind {} yields one translation; use n = 1 and not with bench",
                self.generation.kind.as_str()
            ));
        }
        let g = &self.grid;
        if g.m < 2 {
            out.push(format!("grid.m ({}) must be at least 2", g.m));
        }
        match (g.k_max, g.cap) {
            (None, None) => out.push("grid: set exactly one of k_max or cap".into()),
            (Some(_), Some(_)) => out.push("grid: k_max and cap are mutually exclusive".into()),
            (Some(k), None) if !(k > 0.0 && k.is_finite()) => {
                out.push(format!("grid.k_max ({k}) must be positive"))
            }
            (None, Some(c)) if !(c > 0.0 && c.is_finite()) => {
                out.push(format!("grid.cap ({c}) must be positive"))
            }
            _ => {}
        }
        let r = &self.report;
        if !(r.histogram_width > 0.0 && r.histogram_width.is_finite()) {
            out.push(format!(
                "report.histogram_width ({}) must be positive",
                r.histogram_width
            ));
        }
        if r.crc_rows == 0 {
            out.push("report.crc_rows must be at least 1".into());
        }
    }

    fn subgroup_problems(&self, schema: Option<&FeatureSchema>, out: &mut Vec<String>) {
        if self.subgroups.len() != 2 {
            out.push(format!(
                "subgroups: compare needs exactly 2, found {}",
                self.subgroups.len()
            ));
            return;
        }
        let (a, b) = (&self.subgroups[0], &self.subgroups[1]);
        if a.label == b.label {
            out.push(format!("subgroups: duplicate label `{}`", a.label));
        }
        let Some(schema) = schema else { return };
        let mut ds = Vec::new();
        for (i, s) in self.subgroups.iter().enumerate() {
            match s.descriptor(schema) {
                Ok(d) => ds.push(d),
                Err(e) => out.push(format!("subgroups[{i}] ({}): {e}", s.label)),
            }
        }
        if let [da, db] = ds.as_slice() {
            if !da.is_disjoint_from(db) {
                out.push(format!(
                    "subgroups: `{}` and `{}` overlap",
                    a.label, b.label
                ));
            }
        }
    }

    pub fn validate(&self, command: Command) -> Result<()> {
        let problems = self.problems(command);
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    /// Generation settings with the run seed applied.
    pub fn generation(&self) -> GenerationConfig {
        GenerationConfig {
            seed: self.seed(),
            ..self.generation.clone()
        }
    }
}
