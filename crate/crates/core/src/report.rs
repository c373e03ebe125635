//! Result aggregation and table rendering.
//!
//! Accuracy is printed with 1 decimal, MSE with 3 and selectivity with 2.
//! Missing cells print as `—`. Every table is sorted independently of the
//! order of its input rows, so identical result sets give identical bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::corpus::{DepSentence, QuestionType};
use crate::error::{Error, Result};
use crate::metrics::{ComplexityProfile, Metric};
use crate::runner::{Approach, ExperimentResult, Task};
use crate::TaskKind;

pub const MISSING: &str = "—";

/// Upper bound (exclusive) of the flat class.
pub const FLAT_BELOW: f64 = 0.01;
/// Upper bound (inclusive) of the moderate class.
pub const MODERATE_UP_TO: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileClass {
    Flat,
    Moderate,
    Oscillating,
}

impl fmt::Display for ProfileClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProfileClass::Flat => "flat",
            ProfileClass::Moderate => "moderate",
            ProfileClass::Oscillating => "oscillating",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerProfile {
    pub values: Vec<f64>,
    pub range: f64,
    pub class: ProfileClass,
}

/// `range < 0.01` is flat, `0.01 ≤ range ≤ 0.03` moderate, anything larger
/// oscillating. The range is rounded to 9 decimals first so that values
/// like `0.11 − 0.10` land on the boundary they denote.
pub fn classify_range(range: f64) -> ProfileClass {
    let r = (range * 1e9).round() / 1e9;
    if r < FLAT_BELOW {
        ProfileClass::Flat
    } else if r <= MODERATE_UP_TO {
        ProfileClass::Moderate
    } else {
        ProfileClass::Oscillating
    }
}

pub fn layer_profile(per_layer_errors: &[f64]) -> Result<LayerProfile> {
    if per_layer_errors.len() < 2 {
        return Err(Error::InvalidInput("a layer profile needs at least 2 layers".into()));
    }
    let max = per_layer_errors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = per_layer_errors.iter().copied().fold(f64::INFINITY, f64::min);
    let range = max - min;
    Ok(LayerProfile {
        values: per_layer_errors.to_vec(),
        range,
        class: classify_range(range),
    })
}

/// Highest accuracy or lowest MSE; ties go to the lowest layer.
pub fn best_layer(per_layer: &[(usize, f64)], task: TaskKind) -> Option<(usize, f64)> {
    pick_layer(per_layer, |a, b| match task {
        TaskKind::Classification => a > b,
        TaskKind::Regression => a < b,
    })
}

/// Lowest accuracy or highest MSE; ties go to the lowest layer.
pub fn weakest_layer(per_layer: &[(usize, f64)], task: TaskKind) -> Option<(usize, f64)> {
    pick_layer(per_layer, |a, b| match task {
        TaskKind::Classification => a < b,
        TaskKind::Regression => a > b,
    })
}

fn pick_layer(per_layer: &[(usize, f64)], better: impl Fn(f64, f64) -> bool) -> Option<(usize, f64)> {
    let mut sorted = per_layer.to_vec();
    sorted.sort_by_key(|&(l, _)| l);
    let mut best: Option<(usize, f64)> = None;
    for (l, v) in sorted {
        if best.is_none_or(|(_, b)| better(v, b)) {
            best = Some((l, v));
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageStats {
    pub language: String,
    pub sentences: usize,
    pub labeled: usize,
    pub polar_pct: Option<f64>,
    pub content_pct: Option<f64>,
    pub mean_combined: Option<f64>,
}

/// Per-language counts, label shares and mean combined complexity. The last
/// row (`language = "total"`) pools every language.
pub fn corpus_stats(sentences: &[DepSentence], profiles: &[ComplexityProfile]) -> Vec<LanguageStats> {
    let mut by_lang: BTreeMap<&str, (usize, usize, usize)> = BTreeMap::new();
    for s in sentences {
        let e = by_lang.entry(&s.language).or_default();
        e.0 += 1;
        match s.question_label {
            Some(QuestionType::Polar) => e.1 += 1,
            Some(QuestionType::Content) => e.2 += 1,
            None => {}
        }
    }
    let mut combined: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for p in profiles {
        if let Some(c) = p.combined {
            combined.entry(&p.language).or_default().push(c);
        }
    }
    let row = |language: &str, n: usize, polar: usize, content: usize, comb: &[f64]| {
        let labeled = polar + content;
        let pct = |k: usize| (labeled > 0).then(|| 100.0 * k as f64 / labeled as f64);
        LanguageStats {
            language: language.to_string(),
            sentences: n,
            labeled,
            polar_pct: pct(polar),
            content_pct: pct(content),
            mean_combined: (!comb.is_empty()).then(|| comb.iter().sum::<f64>() / comb.len() as f64),
        }
    };
    let mut out = Vec::new();
    let mut total = (0, 0, 0);
    let mut all_comb = Vec::new();
    for (lang, &(n, polar, content)) in &by_lang {
        if n == 0 {
            warn!("no sentences for {lang}; omitted from corpus statistics");
            continue;
        }
        let comb = combined.get(lang).cloned().unwrap_or_default();
        all_comb.extend_from_slice(&comb);
        total = (total.0 + n, total.1 + polar, total.2 + content);
        out.push(row(lang, n, polar, content, &comb));
    }
    if !out.is_empty() {
        out.push(row("total", total.0, total.1, total.2, &all_comb));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Tsv,
    Md,
}

impl TableFormat {
    pub fn extension(self) -> &'static str {
        match self {
            TableFormat::Tsv => "tsv",
            TableFormat::Md => "md",
        }
    }
}

impl FromStr for TableFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(TableFormat::Tsv),
            "md" => Ok(TableFormat::Md),
            other => Err(Error::Config(format!("unknown table format {other:?}"))),
        }
    }
}

/// Plain header + rows; bold cells only show up in markdown.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub text: String,
    pub bold: bool,
}

impl From<String> for Cell {
    fn from(text: String) -> Self {
        Cell { text, bold: false }
    }
}

impl From<&str> for Cell {
    fn from(text: &str) -> Self {
        Cell {
            text: text.to_string(),
            bold: false,
        }
    }
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn render(&self, format: TableFormat) -> String {
        let mut out = String::new();
        match format {
            TableFormat::Tsv => {
                out.push_str(&self.header.join("\t"));
                out.push('\n');
                for row in &self.rows {
                    let cells: Vec<&str> = row.iter().map(|c| c.text.as_str()).collect();
                    out.push_str(&cells.join("\t"));
                    out.push('\n');
                }
            }
            TableFormat::Md => {
                out.push_str(&format!("| {} |\n", self.header.join(" | ")));
                out.push_str(&format!("|{}\n", "---|".repeat(self.header.len())));
                for row in &self.rows {
                    let cells: Vec<String> = row
                        .iter()
                        .map(|c| {
                            if c.bold && c.text != MISSING {
                                format!("**{}**", c.text)
                            } else {
                                c.text.clone()
                            }
                        })
                        .collect();
                    out.push_str(&format!("| {} |\n", cells.join(" | ")));
                }
            }
        }
        out
    }
}

fn fixed(v: Option<f64>, dp: usize) -> String {
    match v {
        None => MISSING.to_string(),
        Some(v) => {
            let s = format!("{v:.dp$}");
            // avoid "-0.00"
            if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
                s[1..].to_string()
            } else {
                s
            }
        }
    }
}

pub fn format_metric(v: Option<f64>, task: TaskKind) -> String {
    fixed(v, metric_dp(task))
}

fn metric_dp(task: TaskKind) -> usize {
    match task {
        TaskKind::Classification => 1,
        TaskKind::Regression => 3,
    }
}

pub fn format_selectivity(v: Option<f64>) -> String {
    fixed(v, 2)
}

fn with_thousands(n: usize) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, ch) in s.chars().enumerate() {
        if i > 0 && (s.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

pub fn render_corpus_stats(stats: &[LanguageStats], format: TableFormat) -> String {
    let mut t = Table::new(&["language", "#", "% polar", "% content", "avg. score"]);
    for s in stats {
        t.rows.push(vec![
            s.language.as_str().into(),
            with_thousands(s.sentences).into(),
            fixed(s.polar_pct, 1).into(),
            fixed(s.content_pct, 1).into(),
            fixed(s.mean_combined, 2).into(),
        ]);
    }
    t.render(format)
}

/// Every result row, one line each, in a fixed column order.
pub fn results_tsv(results: &[ExperimentResult]) -> String {
    let mut t = Table::new(&[
        "language",
        "task",
        "approach",
        "layer",
        "variant",
        "metric",
        "S",
        "S_bar",
        "n_train",
        "n_val",
        "n_test",
        "seed",
        "error",
        "config_hash",
    ]);
    for r in sorted(results) {
        t.rows.push(vec![
            r.language.as_str().into(),
            r.task.name().into(),
            r.approach.name().into(),
            layer_text(r.layer).into(),
            r.variant.as_str().into(),
            format_metric(r.metric, r.task_kind).into(),
            format_selectivity(r.selectivity).into(),
            format_selectivity(r.selectivity_mean).into(),
            r.n_train.to_string().into(),
            r.n_val.to_string().into(),
            r.n_test.to_string().into(),
            r.seed.to_string().into(),
            r.error.as_deref().unwrap_or("").replace(['\t', '\n'], " ").into(),
            r.config_hash.as_str().into(),
        ]);
    }
    t.render(TableFormat::Tsv)
}

fn layer_text(layer: Option<usize>) -> String {
    layer.map_or("-".to_string(), |l| l.to_string())
}

fn variant_rank(r: &ExperimentResult) -> (u8, u64) {
    match r.control_seed {
        None => (0, 0),
        Some(s) => (1, s),
    }
}

fn sorted(results: &[ExperimentResult]) -> Vec<&ExperimentResult> {
    let mut v: Vec<&ExperimentResult> = results.iter().collect();
    v.sort_by(|a, b| {
        (&a.language, a.task, a.approach, a.layer, variant_rank(a))
            .cmp(&(&b.language, b.task, b.approach, b.layer, variant_rank(b)))
    });
    v
}

/// Real metric, mean control metric and mean selectivity of one
/// (language, task, approach, layer) group.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Summary {
    pub metric: Option<f64>,
    pub control_mean: Option<f64>,
    pub selectivity_mean: Option<f64>,
}

type GroupKey = (String, Task, Approach, Option<usize>);

pub fn summarize(results: &[ExperimentResult]) -> BTreeMap<GroupKey, Summary> {
    let mut controls: BTreeMap<GroupKey, Vec<Option<f64>>> = BTreeMap::new();
    let mut out: BTreeMap<GroupKey, Summary> = BTreeMap::new();
    for r in results {
        let key = (r.language.clone(), r.task, r.approach, r.layer);
        if r.is_real() {
            let e = out.entry(key).or_default();
            e.metric = r.metric;
            e.selectivity_mean = r.selectivity_mean;
        } else {
            controls.entry(key.clone()).or_default().push(r.metric);
            out.entry(key).or_default();
        }
    }
    for (key, ms) in controls {
        if ms.iter().all(Option::is_some) && !ms.is_empty() {
            let v: Vec<f64> = ms.into_iter().flatten().collect();
            out.get_mut(&key).expect("inserted above").control_mean =
                Some(v.iter().sum::<f64>() / v.len() as f64);
        }
    }
    out
}

/// Per-layer real metrics of the probe for one language and task.
fn probe_layers(summary: &BTreeMap<GroupKey, Summary>, lang: &str, task: Task) -> Vec<(usize, f64)> {
    summary
        .iter()
        .filter(|((l, t, a, layer), _)| l == lang && *t == task && *a == Approach::Probe && layer.is_some())
        .filter_map(|((_, _, _, layer), s)| s.metric.map(|m| (layer.unwrap(), m)))
        .collect()
}

fn languages(results: &[ExperimentResult]) -> Vec<String> {
    results
        .iter()
        .map(|r| r.language.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// One row per language: linear, gbt and best probe metric with their mean
/// selectivity, and the best probe layer. The best metric and best `S̄` of
/// each row are bold in markdown and named in the last two columns.
pub fn render_classification_table(results: &[ExperimentResult], format: TableFormat) -> String {
    let task = Task::QuestionType;
    let summary = summarize(results);
    let mut t = Table::new(&[
        "language", "linear", "S_bar", "gbt", "S_bar", "best probe", "S_bar", "layer", "best", "best S_bar",
    ]);
    for lang in languages(results) {
        let get = |a: Approach| summary.get(&(lang.clone(), task, a, None)).copied().unwrap_or_default();
        let probe = best_layer(&probe_layers(&summary, &lang, task), TaskKind::Classification);
        let probe_sum = probe
            .and_then(|(l, _)| summary.get(&(lang.clone(), task, Approach::Probe, Some(l))).copied())
            .unwrap_or_default();
        let entries = [
            ("linear", get(Approach::Linear)),
            ("gbt", get(Approach::Gbt)),
            ("probe", probe_sum),
        ];
        if entries.iter().all(|(_, s)| s.metric.is_none()) {
            continue;
        }
        let best_m = argbest(entries.iter().map(|(n, s)| (*n, s.metric)), |a, b| a > b);
        let best_s = argbest(entries.iter().map(|(n, s)| (*n, s.selectivity_mean)), |a, b| a > b);
        let mut row: Vec<Cell> = vec![lang.as_str().into()];
        for (name, s) in &entries {
            row.push(Cell {
                text: format_metric(s.metric, TaskKind::Classification),
                bold: best_m == Some(*name),
            });
            row.push(Cell {
                text: format_selectivity(s.selectivity_mean),
                bold: best_s == Some(*name),
            });
        }
        row.push(probe.map_or(MISSING.to_string(), |(l, _)| l.to_string()).into());
        row.push(best_m.unwrap_or(MISSING).into());
        row.push(best_s.unwrap_or(MISSING).into());
        t.rows.push(row);
    }
    t.render(format)
}

fn argbest<'a>(
    items: impl Iterator<Item = (&'a str, Option<f64>)>,
    better: impl Fn(f64, f64) -> bool,
) -> Option<&'a str> {
    let mut best: Option<(&str, f64)> = None;
    for (name, v) in items {
        if let Some(v) = v {
            if best.is_none_or(|(_, b)| better(v, b)) {
                best = Some((name, v));
            }
        }
    }
    best.map(|(n, _)| n)
}

fn regression_order() -> Vec<Task> {
    let mut v: Vec<Task> = Metric::ALL.into_iter().map(Task::Metric).collect();
    v.push(Task::CombinedComplexity);
    v
}

/// One row per regression target. For each approach the language with the
/// lowest MSE is reported, with its mean selectivity tagged by language code;
/// for the probe the search runs over every (language, layer) pair.
pub fn render_regression_table(results: &[ExperimentResult], format: TableFormat) -> String {
    let summary = summarize(results);
    let langs = languages(results);
    let mut t = Table::new(&[
        "target", "linear", "S_bar", "gbt", "S_bar", "best probe", "S_bar", "layer",
    ]);
    let present: BTreeSet<Task> = results.iter().map(|r| r.task).collect();
    for task in regression_order().into_iter().filter(|t| present.contains(t)) {
        let mut row: Vec<Cell> = vec![task.name().into()];
        for approach in [Approach::Linear, Approach::Gbt] {
            let cands = langs.iter().filter_map(|l| {
                summary
                    .get(&(l.clone(), task, approach, None))
                    .and_then(|s| s.metric.map(|m| (l.as_str(), m, s.selectivity_mean)))
            });
            push_best(&mut row, cands);
        }
        let mut best: Option<(&str, usize, f64, Option<f64>)> = None;
        for lang in &langs {
            if let Some((layer, m)) = best_layer(&probe_layers(&summary, lang, task), TaskKind::Regression) {
                if best.is_none_or(|(_, _, b, _)| m < b) {
                    let s = summary[&(lang.clone(), task, Approach::Probe, Some(layer))].selectivity_mean;
                    best = Some((lang, layer, m, s));
                }
            }
        }
        push_best(&mut row, best.map(|(l, _, m, s)| (l, m, s)).into_iter());
        row.push(best.map_or(MISSING.to_string(), |(_, layer, _, _)| layer.to_string()).into());
        t.rows.push(row);
    }
    t.render(format)
}

fn push_best<'a>(row: &mut Vec<Cell>, cands: impl Iterator<Item = (&'a str, f64, Option<f64>)>) {
    let mut best: Option<(&str, f64, Option<f64>)> = None;
    for c in cands {
        if best.is_none_or(|b| c.1 < b.1) {
            best = Some(c);
        }
    }
    match best {
        Some((lang, m, s)) => {
            row.push(fixed(Some(m), 3).into());
            row.push(match s {
                Some(_) => format!("{} {lang}", format_selectivity(s)).into(),
                None => MISSING.into(),
            });
        }
        None => {
            row.push(MISSING.into());
            row.push(MISSING.into());
        }
    }
}

/// Sectioned per-language detail for one task: dummy, linear, gbt, optimal
/// and weakest probe, each with metric, mean control metric, difference and
/// mean selectivity. Probe metrics carry their layer in parentheses.
pub fn render_detail_table(results: &[ExperimentResult], task: Task, format: TableFormat) -> String {
    let kind = task.kind();
    let summary = summarize(results);
    let langs = languages(results);
    let mut t = Table::new(&["section", "language", "metric", "control", "delta", "S_bar"]);
    let sections: [(&str, Option<Approach>); 5] = [
        ("dummy", Some(Approach::Dummy)),
        ("linear", Some(Approach::Linear)),
        ("gbt", Some(Approach::Gbt)),
        ("optimal probe", None),
        ("weakest probe", None),
    ];
    for (name, approach) in sections {
        for lang in &langs {
            let (s, layer) = match approach {
                Some(a) => (summary.get(&(lang.clone(), task, a, None)).copied(), None),
                None => {
                    let layers = probe_layers(&summary, lang, task);
                    let pick = if name.starts_with("optimal") {
                        best_layer(&layers, kind)
                    } else {
                        weakest_layer(&layers, kind)
                    };
                    match pick {
                        Some((l, _)) => (summary.get(&(lang.clone(), task, Approach::Probe, Some(l))).copied(), Some(l)),
                        None => (None, None),
                    }
                }
            };
            let Some(s) = s else { continue };
            let delta = match (s.metric, s.control_mean) {
                (Some(m), Some(c)) => Some(match kind {
                    TaskKind::Classification => m - c,
                    TaskKind::Regression => c - m,
                }),
                _ => None,
            };
            let mut metric = format_metric(s.metric, kind);
            if let (Some(l), Some(_)) = (layer, s.metric) {
                metric = format!("{metric} ({l})");
            }
            t.rows.push(vec![
                name.into(),
                lang.as_str().into(),
                metric.into(),
                format_metric(s.control_mean, kind).into(),
                fixed(delta, metric_dp(kind)).into(),
                format_selectivity(s.selectivity_mean).into(),
            ]);
        }
    }
    t.render(format)
}

/// Long-form rows for external plotting, with a fixed header.
pub fn plot_table(results: &[ExperimentResult]) -> String {
    let mut t = Table::new(&["language", "task", "approach", "layer", "variant", "metric"]);
    for r in sorted(results) {
        t.rows.push(vec![
            r.language.as_str().into(),
            r.task.name().into(),
            r.approach.name().into(),
            layer_text(r.layer).into(),
            r.variant.as_str().into(),
            r.metric.map_or(MISSING.to_string(), |m| format!("{m:.6}")).into(),
        ]);
    }
    t.render(TableFormat::Tsv)
}

/// Per-layer probe metric, mean control metric and mean selectivity.
pub fn render_probe_layers(results: &[ExperimentResult], format: TableFormat) -> String {
    let summary = summarize(results);
    let mut t = Table::new(&["language", "task", "layer", "metric", "control", "S_bar"]);
    for ((lang, task, approach, layer), s) in &summary {
        if *approach != Approach::Probe {
            continue;
        }
        t.rows.push(vec![
            lang.as_str().into(),
            task.name().into(),
            layer_text(*layer).into(),
            format_metric(s.metric, task.kind()).into(),
            format_metric(s.control_mean, task.kind()).into(),
            format_selectivity(s.selectivity_mean).into(),
        ]);
    }
    t.render(format)
}

/// Layer profile class of every regression probe curve with 2+ layers.
pub fn render_layer_profiles(results: &[ExperimentResult], format: TableFormat) -> String {
    let summary = summarize(results);
    let mut t = Table::new(&["language", "task", "range", "class", "best layer", "weakest layer"]);
    let pairs: BTreeSet<(String, Task)> = results
        .iter()
        .filter(|r| r.approach == Approach::Probe && r.task_kind == TaskKind::Regression)
        .map(|r| (r.language.clone(), r.task))
        .collect();
    for (lang, task) in pairs {
        let layers = probe_layers(&summary, &lang, task);
        let values: Vec<f64> = layers.iter().map(|&(_, v)| v).collect();
        let Ok(profile) = layer_profile(&values) else { continue };
        let show = |p: Option<(usize, f64)>| p.map_or(MISSING.to_string(), |(l, _)| l.to_string());
        t.rows.push(vec![
            lang.as_str().into(),
            task.name().into(),
            fixed(Some(profile.range), 3).into(),
            profile.class.to_string().into(),
            show(best_layer(&layers, TaskKind::Regression)).into(),
            show(weakest_layer(&layers, TaskKind::Regression)).into(),
        ]);
    }
    t.render(format)
}

/// Write every table into `dir` and return the paths, in a fixed order.
pub fn emit_tables(results: &[ExperimentResult], format: TableFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let ext = format.extension();
    let tasks: BTreeSet<Task> = results.iter().map(|r| r.task).collect();
    let mut files: Vec<(String, String)> = Vec::new();
    if tasks.contains(&Task::QuestionType) {
        files.push((format!("classification.{ext}"), render_classification_table(results, format)));
    }
    if tasks.iter().any(|t| t.kind() == TaskKind::Regression) {
        files.push((format!("regression.{ext}"), render_regression_table(results, format)));
        files.push((format!("layer_profiles.{ext}"), render_layer_profiles(results, format)));
    }
    for task in &tasks {
        files.push((format!("detail_{}.{ext}", task.name()), render_detail_table(results, *task, format)));
    }
    if results.iter().any(|r| r.approach == Approach::Probe) {
        files.push((format!("probe_layers.{ext}"), render_probe_layers(results, format)));
    }
    files.push(("plot.tsv".to_string(), plot_table(results)));
    let mut paths = Vec::new();
    for (name, body) in files {
        let p = dir.join(name);
        std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        paths.push(p);
    }
    Ok(paths)
}
