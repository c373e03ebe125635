use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::baselines::{GbtParams, DEFAULT_RIDGE_LAMBDA};
use crate::error::{Error, Result};
use crate::metrics::{Metric, NormalizationGroup};
use crate::probes::ProbeConfig;
use crate::selectivity::DEFAULT_CONTROL_SEEDS;
use crate::TaskKind;

pub const DEFAULT_RUN_SEED: u64 = 42;

/// Prediction target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Task {
    QuestionType,
    CombinedComplexity,
    /// A single normalized sub-metric.
    Metric(Metric),
}

impl Task {
    pub fn kind(self) -> TaskKind {
        match self {
            Task::QuestionType => TaskKind::Classification,
            _ => TaskKind::Regression,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::QuestionType => "question_type",
            Task::CombinedComplexity => "combined_complexity",
            Task::Metric(m) => m.key(),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "question_type" => Ok(Task::QuestionType),
            "combined_complexity" => Ok(Task::CombinedComplexity),
            other => Metric::ALL
                .into_iter()
                .find(|m| m.key() == other)
                .map(Task::Metric)
                .ok_or_else(|| Error::Config(format!("unknown task {other:?}"))),
        }
    }
}

impl Serialize for Task {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Task {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Approach {
    Dummy,
    Linear,
    Gbt,
    Probe,
}

impl Approach {
    pub fn name(self) -> &'static str {
        match self {
            Approach::Dummy => "dummy",
            Approach::Linear => "linear",
            Approach::Gbt => "gbt",
            Approach::Probe => "probe",
        }
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Approach {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dummy" => Ok(Approach::Dummy),
            "linear" => Ok(Approach::Linear),
            "gbt" => Ok(Approach::Gbt),
            "probe" => Ok(Approach::Probe),
            other => Err(Error::Config(format!("unknown approach {other:?}"))),
        }
    }
}

/// Inclusive 1-based layer range written as `"a..b"` (or a single `"n"`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerRange {
    pub first: usize,
    pub last: usize,
}

impl LayerRange {
    pub fn new(first: usize, last: usize) -> Result<Self> {
        if first == 0 || last < first {
            return Err(Error::Config(format!("invalid layer range {first}..{last}")));
        }
        Ok(LayerRange { first, last })
    }

    pub fn layers(self) -> impl Iterator<Item = usize> {
        self.first..=self.last
    }

    pub fn len(self) -> usize {
        self.last - self.first + 1
    }

    pub fn is_empty(self) -> bool {
        false
    }
}

impl fmt::Display for LayerRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.first, self.last)
    }
}

impl FromStr for LayerRange {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let num = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("invalid layer range {s:?}")))
        };
        match s.split_once("..") {
            Some((a, b)) => LayerRange::new(num(a)?, num(b.trim_start_matches('='))?),
            None => {
                let n = num(s)?;
                LayerRange::new(n, n)
            }
        }
    }
}

impl Serialize for LayerRange {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for LayerRange {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearHyper {
    /// Logistic penalty; `1/n_train` when absent.
    #[serde(default)]
    pub logistic_lambda: Option<f64>,
    #[serde(default = "default_ridge")]
    pub ridge_lambda: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_ridge() -> f64 {
    DEFAULT_RIDGE_LAMBDA
}
fn default_tol() -> f64 {
    1e-6
}
fn default_max_iter() -> usize {
    1000
}

impl Default for LinearHyper {
    fn default() -> Self {
        LinearHyper {
            logistic_lambda: None,
            ridge_lambda: DEFAULT_RIDGE_LAMBDA,
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeHyper {
    pub classification_hidden: Vec<usize>,
    pub regression_hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub min_delta: f64,
}

impl Default for ProbeHyper {
    fn default() -> Self {
        let c = ProbeConfig::for_task(TaskKind::Classification);
        let r = ProbeConfig::for_task(TaskKind::Regression);
        ProbeHyper {
            classification_hidden: c.hidden,
            regression_hidden: r.hidden,
            learning_rate: c.learning_rate,
            batch_size: c.batch_size,
            max_epochs: c.max_epochs,
            patience: c.patience,
            min_delta: c.min_delta,
        }
    }
}

impl ProbeHyper {
    pub fn config(&self, task: TaskKind, seed: u64) -> ProbeConfig {
        ProbeConfig {
            task,
            hidden: match task {
                TaskKind::Classification => self.classification_hidden.clone(),
                TaskKind::Regression => self.regression_hidden.clone(),
            },
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            min_delta: self.min_delta,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparameters {
    #[serde(default)]
    pub linear: LinearHyper,
    #[serde(default)]
    pub gbt: GbtParams,
    #[serde(default)]
    pub probe: ProbeHyper,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    /// Sentence interchange JSONL covering every configured language.
    pub corpus: PathBuf,
    /// Subword sequence JSONL; needed by `linear` and `gbt`.
    #[serde(default)]
    pub subwords: Option<PathBuf>,
    /// QEMB file per language; needed by `probe`.
    #[serde(default)]
    pub embeddings: BTreeMap<String, PathBuf>,
    /// Rule pack overrides per language; built-in packs otherwise.
    #[serde(default)]
    pub rules: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub languages: Vec<String>,
    pub tasks: Vec<Task>,
    pub approaches: Vec<Approach>,
    #[serde(default)]
    pub layers: Option<LayerRange>,
    #[serde(default = "default_seeds")]
    pub control_seeds: Vec<u64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Stratify classification splits by label.
    #[serde(default = "default_true")]
    pub stratify: bool,
    #[serde(default)]
    pub normalization: NormalizationGroup,
    pub paths: InputPaths,
    pub output_dir: PathBuf,
    /// Worker threads; all available cores when absent.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub hyperparameters: Hyperparameters,
}

fn default_seeds() -> Vec<u64> {
    DEFAULT_CONTROL_SEEDS.to_vec()
}
fn default_seed() -> u64 {
    DEFAULT_RUN_SEED
}
fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check_shape()?;
        Ok(cfg)
    }

    /// Parse a config file; relative paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.corpus);
        if let Some(p) = self.paths.subwords.as_mut() {
            fix(p);
        }
        self.paths.embeddings.values_mut().for_each(fix);
        self.paths.rules.values_mut().for_each(fix);
        fix(&mut self.output_dir);
    }

    /// Checks that do not touch the file system.
    pub fn check_shape(&self) -> Result<()> {
        let err = |m: &str| Err(Error::Config(m.to_string()));
        if self.languages.is_empty() || self.tasks.is_empty() || self.approaches.is_empty() {
            return err("languages, tasks and approaches must be non-empty");
        }
        if has_duplicates(&self.languages)
            || has_duplicates(&self.tasks)
            || has_duplicates(&self.approaches)
        {
            return err("languages, tasks and approaches must not repeat");
        }
        if self.control_seeds.is_empty() || has_duplicates(&self.control_seeds) {
            return err("control_seeds must be non-empty and distinct");
        }
        let needs_features = self
            .approaches
            .iter()
            .any(|a| matches!(a, Approach::Linear | Approach::Gbt));
        if needs_features && self.paths.subwords.is_none() {
            return err("linear and gbt need paths.subwords");
        }
        if self.approaches.contains(&Approach::Probe) {
            if self.layers.is_none() {
                return err("probe needs a layer range");
            }
            if let Some(lang) = self.languages.iter().find(|l| !self.paths.embeddings.contains_key(*l)) {
                return Err(Error::Config(format!("probe needs paths.embeddings.{lang}")));
            }
            for task in [TaskKind::Classification, TaskKind::Regression] {
                self.hyperparameters.probe.config(task, 0).validate()?;
            }
        }
        Ok(())
    }

    /// Rows a complete run produces:
    /// `Σ over (language, task) of (non-probe approaches + probe layers) × (1 + controls)`.
    pub fn expected_cell_count(&self) -> usize {
        let per_variant: usize = self
            .approaches
            .iter()
            .map(|a| match a {
                Approach::Probe => self.layers.map_or(0, LayerRange::len),
                _ => 1,
            })
            .sum();
        self.languages.len() * self.tasks.len() * per_variant * (1 + self.control_seeds.len())
    }
}

fn has_duplicates<T: Ord>(items: &[T]) -> bool {
    let mut v: Vec<&T> = items.iter().collect();
    v.sort();
    v.windows(2).any(|w| w[0] == w[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
languages = ["eng"]
tasks = ["question_type", "combined_complexity", "max_depth"]
approaches = ["dummy", "probe"]
layers = "1..12"
output_dir = "out"

[paths]
corpus = "corpus.jsonl"
embeddings = { eng = "eng.qemb" }
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.control_seeds, vec![11, 22, 33]);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.tasks[2], Task::Metric(Metric::MaxDepth));
        assert_eq!(cfg.layers, Some(LayerRange { first: 1, last: 12 }));
        assert_eq!(cfg.hyperparameters.probe.classification_hidden, vec![384]);
        // 3 tasks × (1 dummy + 12 layers) × 4 variants
        assert_eq!(cfg.expected_cell_count(), 3 * 13 * 4);
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn cell_count_examples() {
        let mut cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        cfg.tasks = vec![Task::QuestionType];
        cfg.approaches = vec![Approach::Dummy];
        assert_eq!(cfg.expected_cell_count(), 4);
        cfg.approaches = vec![Approach::Probe];
        assert_eq!(cfg.expected_cell_count(), 48);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::from_toml(&MINIMAL.replace("\"max_depth\"", "\"depthiness\"")).is_err());
        assert!(ExperimentConfig::from_toml(&MINIMAL.replace("\"dummy\", ", "\"linear\", ")).is_err());
        assert!(ExperimentConfig::from_toml(&MINIMAL.replace("1..12", "3..2")).is_err());
        assert!(ExperimentConfig::from_toml(&format!("{MINIMAL}\nbogus = 1")).is_err());
        assert_eq!("4".parse::<LayerRange>().unwrap().len(), 1);
    }

    #[test]
    fn partial_hyperparameter_tables() {
        let text = format!("{MINIMAL}\n[hyperparameters.probe]\npatience = 7\n\n[hyperparameters.gbt]\nn_rounds = 50\n");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.hyperparameters.probe.patience, 7);
        assert_eq!(cfg.hyperparameters.probe.batch_size, ProbeHyper::default().batch_size);
        assert_eq!(cfg.hyperparameters.gbt.n_rounds, 50);
        assert_eq!(cfg.hyperparameters.gbt.max_depth, GbtParams::default().max_depth);
    }
}
