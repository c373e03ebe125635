//! Experiment orchestration: splits, label variants, the approach × layer ×
//! variant matrix, evaluation and resumable result persistence.
//!
//! A run writes three files into its output directory:
//!
//! * `cells.jsonl`, an append-only log with one row per finished cell, keyed
//!   by the config hash. Rerunning the same config skips logged cells.
//! * `results.jsonl` and `results.tsv`, the final rows with selectivity
//!   filled in, written once every cell is present. Their bytes depend only
//!   on the config and the input files.

mod config;
mod splits;

pub use config::{
    Approach, ExperimentConfig, Hyperparameters, InputPaths, LayerRange, LinearHyper,
    ProbeHyper, Task, DEFAULT_RUN_SEED,
};
pub use splits::{derive_seed, evaluate, make_splits, SplitIndices, SPLIT_PERCENT};

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use log::{info, warn};
use ndarray::Axis;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::annotator::{classify_question, load_rulepack, PackSource, RulePack};
use crate::baselines::{
    fit_dummy, fit_gbt, fit_logistic, fit_ridge, predict_baseline, predict_dummy, BaselineModel,
    LogisticParams, SparseMatrix,
};
use crate::corpus::{load_labeled_corpus, DepSentence, QuestionType};
use crate::error::{Error, Result};
use crate::features::{fit_vocabulary, load_subwords, vectorize, SubwordSequence};
use crate::metrics::{
    normalize_corpus, profile_corpus, ComplexityProfile, MetricConfig, NormalizationGroup,
};
use crate::probes::{load_embeddings, probe_predict, train_probe, EmbeddingStore};
use crate::selectivity::{label_variants, mean_selectivity, selectivity, LabelVariant};
use crate::TaskKind;

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "QPROBE_OUTPUT_DIR";

pub const CELL_LOG: &str = "cells.jsonl";
pub const RESULTS_JSONL: &str = "results.jsonl";
pub const RESULTS_TSV: &str = "results.tsv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config_hash: String,
    pub language: String,
    pub task: Task,
    pub task_kind: TaskKind,
    pub approach: Approach,
    #[serde(default)]
    pub layer: Option<usize>,
    /// `real` or `control-<seed>`.
    pub variant: String,
    #[serde(default)]
    pub control_seed: Option<u64>,
    /// Test accuracy in percent or test MSE; absent when the cell failed.
    #[serde(default)]
    pub metric: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Control rows: selectivity of the real run against this control.
    #[serde(default)]
    pub selectivity: Option<f64>,
    /// Real rows: mean selectivity over the controls.
    #[serde(default)]
    pub selectivity_mean: Option<f64>,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<u64>,
}

impl ExperimentResult {
    pub fn key(&self) -> String {
        cell_key(&self.language, self.task, self.approach, self.layer, &self.variant)
    }

    pub fn is_real(&self) -> bool {
        self.control_seed.is_none()
    }
}

fn cell_key(lang: &str, task: Task, approach: Approach, layer: Option<usize>, variant: &str) -> String {
    let layer = layer.map_or("-".to_string(), |l| l.to_string());
    format!("{lang}/{task}/{approach}/{layer}/{variant}")
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Stop after persisting this many new cells, leaving the run
    /// incomplete. Used to exercise resumption.
    pub max_new_cells: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config_hash: String,
    pub expected_cells: usize,
    /// Cells taken from an earlier run's log.
    pub resumed_cells: usize,
    pub complete: bool,
    /// Final rows in matrix order; only cells finished so far when the run
    /// is incomplete.
    pub results: Vec<ExperimentResult>,
}

/// Run the full matrix and return the final rows.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ExperimentResult>> {
    let outcome = run_experiment_with(config, &RunOptions::default())?;
    Ok(outcome.results)
}

pub fn run_experiment_with(config: &ExperimentConfig, options: &RunOptions) -> Result<RunOutcome> {
    config.check_shape()?;
    let inputs = Inputs::load(config)?;
    let config_hash = config_hash(config)?;
    let groups = build_groups(config, &inputs)?;
    drop(inputs);

    let jobs = plan_jobs(config, &groups);
    debug_assert_eq!(jobs.len(), config.expected_cell_count());
    fs::create_dir_all(&config.output_dir).map_err(|e| Error::io(&config.output_dir, e))?;
    let log_path = config.output_dir.join(CELL_LOG);
    let mut done = read_cell_log(&log_path, &config_hash)?;
    let planned: HashSet<String> = jobs.iter().map(|j| j.key.clone()).collect();
    done.retain(|k, _| planned.contains(k));
    let resumed_cells = done.len();

    let mut pending: Vec<&Job> = jobs.iter().filter(|j| !done.contains_key(&j.key)).collect();
    if let Some(k) = options.max_new_cells {
        pending.truncate(k);
    }
    info!(
        "{} cells in matrix, {} already logged, running {}",
        jobs.len(),
        resumed_cells,
        pending.len()
    );

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let mut log = open_cell_log(&log_path)?;
    let (tx, rx) = mpsc::channel::<ExperimentResult>();
    let hyper = &config.hyperparameters;
    let hash = config_hash.as_str();
    let run_seed = config.seed;
    let (groups, pending) = (&groups, &pending);
    std::thread::scope(|scope| -> Result<()> {
        scope.spawn(move || {
            pool.install(|| {
                pending.par_iter().for_each_with(tx, |tx, job| {
                    let row = run_cell(job, &groups[job.group], hyper, hash, run_seed);
                    // the receiver only disappears after a write failure
                    let _ = tx.send(row);
                });
            });
        });
        for row in rx {
            let mut line = serde_json::to_string(&row)?;
            line.push('\n');
            log.write_all(line.as_bytes())
                .and_then(|_| log.flush())
                .map_err(|e| Error::io(&log_path, e))?;
            done.insert(row.key(), row);
        }
        Ok(())
    })?;

    let complete = jobs.iter().all(|j| done.contains_key(&j.key));
    let mut results: Vec<ExperimentResult> = jobs
        .iter()
        .filter_map(|j| done.remove(&j.key))
        .collect();
    if complete {
        attach_selectivity(&mut results);
        for r in &mut results {
            r.wall_ms = None;
        }
        write_results(&config.output_dir, &results)?;
    }
    Ok(RunOutcome {
        config_hash,
        expected_cells: jobs.len(),
        resumed_cells,
        complete,
        results,
    })
}

/// Write `results.jsonl` and `results.tsv`.
pub fn write_results(dir: &Path, results: &[ExperimentResult]) -> Result<()> {
    let mut jsonl = String::new();
    for r in results {
        jsonl.push_str(&serde_json::to_string(r)?);
        jsonl.push('\n');
    }
    let p = dir.join(RESULTS_JSONL);
    fs::write(&p, jsonl).map_err(|e| Error::io(&p, e))?;
    let p = dir.join(RESULTS_TSV);
    fs::write(&p, crate::report::results_tsv(results)).map_err(|e| Error::io(&p, e))
}

pub fn load_results(path: &Path) -> Result<Vec<ExperimentResult>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Format {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Fill per-control `S` and the real row's mean `S` for every
/// (language, task, approach, layer) group.
pub fn attach_selectivity(results: &mut [ExperimentResult]) {
    let mut groups: BTreeMap<(String, Task, Approach, Option<usize>), Vec<usize>> = BTreeMap::new();
    for (i, r) in results.iter().enumerate() {
        groups
            .entry((r.language.clone(), r.task, r.approach, r.layer))
            .or_default()
            .push(i);
    }
    for members in groups.values() {
        let Some(&real) = members.iter().find(|&&i| results[i].is_real()) else {
            continue;
        };
        let real_metric = results[real].metric;
        let mut scores = Vec::new();
        let mut all_defined = true;
        for &i in members.iter().filter(|&&i| i != real) {
            let r = &results[i];
            let s = match (real_metric, r.metric) {
                (Some(m), Some(c)) => match selectivity(r.task_kind, m, c) {
                    Ok(s) => Some(s),
                    Err(e) => {
                        warn!("{}: {e}", r.key());
                        None
                    }
                },
                _ => None,
            };
            all_defined &= s.is_some();
            scores.extend(s);
            results[i].selectivity = s;
        }
        results[real].selectivity_mean = if all_defined {
            mean_selectivity(&scores).ok()
        } else {
            None
        };
    }
}

struct Inputs {
    sentences: Vec<DepSentence>,
    subwords: Option<HashMap<String, SubwordSequence>>,
    stores: BTreeMap<String, EmbeddingStore>,
    packs: BTreeMap<String, RulePack>,
}

impl Inputs {
    /// Read and validate every referenced input before any training starts.
    fn load(config: &ExperimentConfig) -> Result<Self> {
        let langs: HashSet<&str> = config.languages.iter().map(String::as_str).collect();
        let sentences: Vec<DepSentence> = load_labeled_corpus(&config.paths.corpus)?
            .into_iter()
            .filter(|s| langs.contains(s.language.as_str()))
            .collect();
        let mut seen = HashSet::new();
        if let Some(dup) = sentences.iter().find(|s| !seen.insert(s.id.as_str())) {
            return Err(Error::InvalidInput(format!("duplicate sentence id {}", dup.id)));
        }
        for lang in &config.languages {
            if !sentences.iter().any(|s| &s.language == lang) {
                return Err(Error::InvalidInput(format!("corpus has no sentences for {lang}")));
            }
        }
        let subwords = match &config.paths.subwords {
            Some(p) if config.approaches.iter().any(|a| matches!(a, Approach::Linear | Approach::Gbt)) => {
                Some(load_subwords(p)?.into_iter().map(|s| (s.id.clone(), s)).collect())
            }
            _ => None,
        };
        let mut stores = BTreeMap::new();
        if config.approaches.contains(&Approach::Probe) {
            let range = config.layers.expect("checked by check_shape");
            for lang in &config.languages {
                let store = load_embeddings(&config.paths.embeddings[lang])?;
                if range.last > store.n_layers() {
                    return Err(Error::Config(format!(
                        "layer range {range} exceeds the {} layers stored for {lang}",
                        store.n_layers()
                    )));
                }
                stores.insert(lang.clone(), store);
            }
        }
        let mut packs = BTreeMap::new();
        if config.tasks.contains(&Task::QuestionType) {
            for lang in &config.languages {
                let needs_rules = sentences
                    .iter()
                    .any(|s| &s.language == lang && s.question_label.is_none());
                if needs_rules {
                    let source = match config.paths.rules.get(lang) {
                        Some(p) => PackSource::File(p),
                        None => PackSource::Builtin,
                    };
                    packs.insert(lang.clone(), load_rulepack(lang, source)?);
                }
            }
        }
        Ok(Inputs {
            sentences,
            subwords,
            stores,
            packs,
        })
    }
}

/// SHA-256 over the config (minus paths, output directory and worker count)
/// and the bytes of every input file it references.
pub fn config_hash(config: &ExperimentConfig) -> Result<String> {
    let mut view = config.clone();
    view.paths = InputPaths::default();
    view.output_dir = PathBuf::new();
    view.workers = None;
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(&view)?);
    let mut files: Vec<(String, &Path)> = vec![("corpus".into(), config.paths.corpus.as_path())];
    if let Some(p) = &config.paths.subwords {
        files.push(("subwords".into(), p));
    }
    for (lang, p) in &config.paths.embeddings {
        files.push((format!("embeddings.{lang}"), p));
        let m = crate::probes::manifest_path(p);
        if m.exists() {
            h.update(format!("manifest.{lang}").as_bytes());
            h.update(fs::read(&m).map_err(|e| Error::io(&m, e))?);
        }
    }
    for (lang, p) in &config.paths.rules {
        files.push((format!("rules.{lang}"), p));
    }
    for (role, path) in files {
        h.update(role.as_bytes());
        h.update(fs::read(path).map_err(|e| Error::io(path, e))?);
    }
    Ok(hex::encode(h.finalize()))
}

/// Data shared by every cell of one (language, task) pair.
struct Group {
    language: String,
    task: Task,
    labels: Vec<f64>,
    splits: SplitIndices,
    variants: Vec<LabelVariant>,
    /// Train and test TF-IDF rows.
    features: Option<(SparseMatrix, SparseMatrix)>,
    store: Option<EmbeddingStore>,
}

fn build_groups(config: &ExperimentConfig, inputs: &Inputs) -> Result<Vec<Group>> {
    let needs_profiles = config.tasks.iter().any(|t| *t != Task::QuestionType);
    let profiles: HashMap<String, ComplexityProfile> = if needs_profiles {
        let raw = profile_corpus(&inputs.sentences, &MetricConfig::default());
        normalize_corpus(&raw, config.normalization)?
            .into_iter()
            .map(|p| (p.sentence_id.clone(), p))
            .collect()
    } else {
        HashMap::new()
    };

    let mut groups = Vec::new();
    for lang in &config.languages {
        let sentences: Vec<&DepSentence> =
            inputs.sentences.iter().filter(|s| &s.language == lang).collect();
        for &task in &config.tasks {
            let (ids, labels) = targets(&sentences, task, inputs.packs.get(lang), &profiles);
            if ids.len() < 3 {
                return Err(Error::InvalidInput(format!(
                    "{lang}/{task}: only {} usable sentences",
                    ids.len()
                )));
            }
            let kind = task.kind();
            let stratify = (config.stratify && kind == TaskKind::Classification).then_some(labels.as_slice());
            let splits = make_splits(ids.len(), derive_seed(config.seed, &format!("split/{lang}/{task}")), stratify)?;
            let variants = label_variants(&labels, &config.control_seeds)?;
            let features = match &inputs.subwords {
                Some(map) => Some(tfidf_features(map, &ids, &splits, &format!("{lang}/{task}/train"))?),
                None => None,
            };
            let store = match inputs.stores.get(lang) {
                Some(s) => Some(s.aligned_to(&ids)?),
                None => None,
            };
            groups.push(Group {
                language: lang.clone(),
                task,
                labels,
                splits,
                variants,
                features,
                store,
            });
        }
    }
    Ok(groups)
}

/// Sentence ids and targets for `task`, in corpus order. Question types come
/// from gold labels, falling back to the language's rule pack; sentences
/// without a target are skipped.
pub fn task_targets(
    sentences: &[DepSentence],
    task: Task,
    packs: &BTreeMap<String, RulePack>,
    normalization: NormalizationGroup,
) -> Result<(Vec<String>, Vec<f64>)> {
    let profiles: HashMap<String, ComplexityProfile> = if task == Task::QuestionType {
        HashMap::new()
    } else {
        normalize_corpus(&profile_corpus(sentences, &MetricConfig::default()), normalization)?
            .into_iter()
            .map(|p| (p.sentence_id.clone(), p))
            .collect()
    };
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for s in sentences {
        let (i, l) = targets(&[s], task, packs.get(&s.language), &profiles);
        ids.extend(i);
        labels.extend(l);
    }
    Ok((ids, labels))
}

/// `QPROBE_OUTPUT_DIR` when set to a non-empty value.
pub fn output_dir_override() -> Option<PathBuf> {
    std::env::var_os(OUTPUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

fn targets(
    sentences: &[&DepSentence],
    task: Task,
    pack: Option<&RulePack>,
    profiles: &HashMap<String, ComplexityProfile>,
) -> (Vec<String>, Vec<f64>) {
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for s in sentences {
        let y = match task {
            Task::QuestionType => s
                .question_label
                .or_else(|| pack.and_then(|p| classify_question(s, p).label()))
                .map(|q| if q == QuestionType::Polar { 1.0 } else { 0.0 }),
            Task::CombinedComplexity => profiles.get(&s.id).and_then(|p| p.combined),
            Task::Metric(m) => profiles.get(&s.id).and_then(|p| p.normalized_value(m)),
        };
        if let Some(y) = y {
            ids.push(s.id.clone());
            labels.push(y);
        }
    }
    (ids, labels)
}

fn tfidf_features(
    subwords: &HashMap<String, SubwordSequence>,
    ids: &[String],
    splits: &SplitIndices,
    fitted_on: &str,
) -> Result<(SparseMatrix, SparseMatrix)> {
    let seq = |i: usize| {
        subwords
            .get(&ids[i])
            .ok_or_else(|| Error::InvalidInput(format!("no subword sequence for sentence {}", ids[i])))
    };
    let train = splits
        .train
        .iter()
        .map(|&i| seq(i).cloned())
        .collect::<Result<Vec<_>>>()?;
    let vocab = fit_vocabulary(&train, fitted_on)?;
    let rows = |idx: &[usize]| -> Result<SparseMatrix> {
        let v = idx
            .iter()
            .map(|&i| seq(i).map(|s| vectorize(s, &vocab)))
            .collect::<Result<Vec<_>>>()?;
        SparseMatrix::from_rows(v, vocab.len())
    };
    Ok((rows(&splits.train)?, rows(&splits.test)?))
}

struct Job {
    key: String,
    group: usize,
    approach: Approach,
    layer: Option<usize>,
    variant: usize,
}

fn plan_jobs(config: &ExperimentConfig, groups: &[Group]) -> Vec<Job> {
    let mut jobs = Vec::new();
    for (g, group) in groups.iter().enumerate() {
        for &approach in &config.approaches {
            let layers: Vec<Option<usize>> = match approach {
                Approach::Probe => config.layers.expect("checked").layers().map(Some).collect(),
                _ => vec![None],
            };
            for layer in layers {
                for (v, variant) in group.variants.iter().enumerate() {
                    jobs.push(Job {
                        key: cell_key(&group.language, group.task, approach, layer, &variant.name()),
                        group: g,
                        approach,
                        layer,
                        variant: v,
                    });
                }
            }
        }
    }
    jobs
}

fn run_cell(
    job: &Job,
    group: &Group,
    hyper: &Hyperparameters,
    config_hash: &str,
    run_seed: u64,
) -> ExperimentResult {
    let started = Instant::now();
    let variant = &group.variants[job.variant];
    let seed = derive_seed(run_seed, &job.key);
    let outcome = cell_metric(job, group, variant, hyper, seed);
    if let Err(e) = &outcome {
        warn!("cell {} failed: {e}", job.key);
    }
    debug_assert_eq!(group.labels.len(), variant.labels.len());
    ExperimentResult {
        config_hash: config_hash.to_string(),
        language: group.language.clone(),
        task: group.task,
        task_kind: group.task.kind(),
        approach: job.approach,
        layer: job.layer,
        variant: variant.name(),
        control_seed: variant.control_seed,
        metric: outcome.as_ref().ok().copied(),
        error: outcome.err().map(|e| e.to_string()),
        selectivity: None,
        selectivity_mean: None,
        n_train: group.splits.train.len(),
        n_val: group.splits.val.len(),
        n_test: group.splits.test.len(),
        seed,
        wall_ms: Some(started.elapsed().as_millis() as u64),
    }
}

fn cell_metric(
    job: &Job,
    group: &Group,
    variant: &LabelVariant,
    hyper: &Hyperparameters,
    seed: u64,
) -> Result<f64> {
    let kind = group.task.kind();
    let pick = |idx: &[usize]| -> Vec<f64> { idx.iter().map(|&i| variant.labels[i]).collect() };
    let y_train = pick(&group.splits.train);
    let y_test = pick(&group.splits.test);
    if y_test.is_empty() {
        return Err(Error::InvalidInput("empty test split".into()));
    }
    let pred = match job.approach {
        Approach::Dummy => predict_dummy(&fit_dummy(&y_train, kind)?, y_test.len()),
        Approach::Linear | Approach::Gbt => {
            let (x_train, x_test) = group
                .features
                .as_ref()
                .ok_or_else(|| Error::Config("no TF-IDF features loaded".into()))?;
            let model = if job.approach == Approach::Gbt {
                BaselineModel::Gbt(fit_gbt(x_train, &y_train, kind, hyper.gbt)?)
            } else {
                let lin = &hyper.linear;
                BaselineModel::Linear(match kind {
                    TaskKind::Classification => fit_logistic(
                        x_train,
                        &y_train,
                        LogisticParams {
                            l2_lambda: lin.logistic_lambda.unwrap_or(1.0 / y_train.len() as f64),
                            tol: lin.tol,
                            max_iter: lin.max_iter,
                        },
                    )?,
                    TaskKind::Regression => fit_ridge(x_train, &y_train, lin.ridge_lambda)?,
                })
            };
            predict_baseline(&model, x_test)?
        }
        Approach::Probe => {
            let layer = job.layer.expect("probe cells carry a layer");
            let store = group
                .store
                .as_ref()
                .ok_or_else(|| Error::Config("no embeddings loaded".into()))?;
            let x = store.layer(layer)?;
            let probe = train_probe(x, &variant.labels, &group.splits, &hyper.probe.config(kind, seed))
                .map_err(|e| Error::Layer {
                    layer,
                    source: Box::new(e),
                })?;
            probe_predict(&probe, x.select(Axis(0), &group.splits.test).view())?
        }
    };
    let metric = evaluate(&pred, &y_test, kind)?;
    if !metric.is_finite() {
        return Err(Error::Numerical(format!("non-finite metric {metric}")));
    }
    Ok(metric)
}

/// Logged cells for `config_hash`. A torn final line from an interrupted
/// write is ignored (and later truncated by [`open_cell_log`]).
fn read_cell_log(path: &Path, config_hash: &str) -> Result<HashMap<String, ExperimentResult>> {
    let mut done = HashMap::new();
    let Ok(text) = fs::read_to_string(path) else {
        return Ok(done);
    };
    for line in text.lines() {
        match serde_json::from_str::<ExperimentResult>(line) {
            Ok(r) if r.config_hash == config_hash => {
                done.insert(r.key(), r);
            }
            Ok(_) => {}
            Err(e) => warn!("{}: skipping unreadable log line: {e}", path.display()),
        }
    }
    Ok(done)
}

fn open_cell_log(path: &Path) -> Result<File> {
    if let Ok(bytes) = fs::read(path) {
        if !bytes.is_empty() && !bytes.ends_with(b"\n") {
            let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
            let f = OpenOptions::new().write(true).open(path).map_err(|e| Error::io(path, e))?;
            f.set_len(keep as u64).map_err(|e| Error::io(path, e))?;
        }
    }
    OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))
}
