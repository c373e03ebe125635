//! Sentence complexity metrics over dependency trees, corpus-wide min-max
//! normalization, and the combined complexity score.
//!
//! The six raw metrics are token count, lexical density, average dependency
//! length, maximum tree depth, average verbal edges and average subordinate
//! chain length. Punctuation is identified with [`Token::is_punct`].
//!
//! Dependency distances are measured over the punctuation-free word
//! sequence, so inserting or removing punctuation never changes ADL.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::corpus::{build_tree, DepSentence, Token};
use crate::error::{Error, Result};

pub const DEFAULT_CONTENT_UPOS: [&str; 5] = ["NOUN", "PROPN", "VERB", "ADJ", "ADV"];
pub const DEFAULT_SUBORDINATE_RELATIONS: [&str; 5] = ["csubj", "ccomp", "xcomp", "advcl", "acl"];

/// One of the six per-sentence complexity metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[serde(rename = "n_tokens")]
    TokenCount,
    LexicalDensity,
    AvgDepLength,
    MaxDepth,
    AvgVerbalEdges,
    AvgSubChain,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::TokenCount,
        Metric::LexicalDensity,
        Metric::AvgDepLength,
        Metric::MaxDepth,
        Metric::AvgVerbalEdges,
        Metric::AvgSubChain,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Metric::TokenCount => "n_tokens",
            Metric::LexicalDensity => "lexical_density",
            Metric::AvgDepLength => "avg_dep_length",
            Metric::MaxDepth => "max_depth",
            Metric::AvgVerbalEdges => "avg_verbal_edges",
            Metric::AvgSubChain => "avg_sub_chain",
        }
    }

    pub fn position(self) -> usize {
        Metric::ALL.iter().position(|&m| m == self).unwrap()
    }
}

/// Tag sets the metrics depend on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub content_upos: BTreeSet<String>,
    pub subordinate_relations: BTreeSet<String>,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            content_upos: DEFAULT_CONTENT_UPOS.iter().map(|s| s.to_string()).collect(),
            subordinate_relations: DEFAULT_SUBORDINATE_RELATIONS
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

impl MetricConfig {
    fn is_subordinate(&self, token: &Token) -> bool {
        self.subordinate_relations.contains(token.deprel_base())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityProfile {
    pub sentence_id: String,
    pub language: String,
    pub token_count: usize,
    pub lexical_density: f64,
    pub avg_dep_length: f64,
    pub max_tree_depth: usize,
    pub avg_verbal_edges: f64,
    pub avg_sub_chain: f64,
    /// Min-max normalized values in [`Metric::ALL`] order; set by
    /// [`normalize_profile`].
    pub normalized: Option<[f64; 6]>,
    pub combined: Option<f64>,
}

impl ComplexityProfile {
    pub fn raw(&self) -> [f64; 6] {
        [
            self.token_count as f64,
            self.lexical_density,
            self.avg_dep_length,
            self.max_tree_depth as f64,
            self.avg_verbal_edges,
            self.avg_sub_chain,
        ]
    }

    pub fn raw_value(&self, metric: Metric) -> f64 {
        self.raw()[metric.position()]
    }

    pub fn normalized_value(&self, metric: Metric) -> Option<f64> {
        self.normalized.map(|n| n[metric.position()])
    }

    pub fn to_record(&self) -> MetricsRecord {
        MetricsRecord {
            raw: RawMetrics {
                n_tokens: self.token_count,
                lexical_density: self.lexical_density,
                avg_dep_length: self.avg_dep_length,
                max_depth: self.max_tree_depth,
                avg_verbal_edges: self.avg_verbal_edges,
                avg_sub_chain: self.avg_sub_chain,
            },
            normalized: self.normalized.map(|n| NormalizedMetrics {
                n_tokens: n[0],
                lexical_density: n[1],
                avg_dep_length: n[2],
                max_depth: n[3],
                avg_verbal_edges: n[4],
                avg_sub_chain: n[5],
                combined: self.combined.unwrap_or_else(|| mean6(&n)),
            }),
        }
    }
}

/// The `metrics` block of the sentence interchange format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub raw: RawMetrics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalized: Option<NormalizedMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawMetrics {
    pub n_tokens: usize,
    pub lexical_density: f64,
    pub avg_dep_length: f64,
    pub max_depth: usize,
    pub avg_verbal_edges: f64,
    pub avg_sub_chain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedMetrics {
    pub n_tokens: f64,
    pub lexical_density: f64,
    pub avg_dep_length: f64,
    pub max_depth: f64,
    pub avg_verbal_edges: f64,
    pub avg_sub_chain: f64,
    pub combined: f64,
}

fn undefined(metric: &'static str, s: &DepSentence, reason: &str) -> Error {
    Error::UndefinedMetric {
        metric,
        sentence: s.id.clone(),
        reason: reason.into(),
    }
}

pub fn token_count(sentence: &DepSentence) -> usize {
    sentence.tokens.len()
}

pub fn lexical_density(sentence: &DepSentence, config: &MetricConfig) -> Result<f64> {
    let words: Vec<&Token> = sentence.tokens.iter().filter(|t| !t.is_punct()).collect();
    if words.is_empty() {
        return Err(undefined("lexical_density", sentence, "all tokens are punctuation"));
    }
    let content = words
        .iter()
        .filter(|t| config.content_upos.contains(&t.upos))
        .count();
    Ok(content as f64 / words.len() as f64)
}

/// Positions of non-punctuation tokens in the punctuation-free sequence,
/// indexed by 0-based token position.
fn word_positions(sentence: &DepSentence) -> Vec<Option<usize>> {
    let mut next = 0;
    sentence
        .tokens
        .iter()
        .map(|t| {
            if t.is_punct() {
                None
            } else {
                next += 1;
                Some(next)
            }
        })
        .collect()
}

pub fn avg_dependency_length(sentence: &DepSentence) -> Result<f64> {
    let pos = word_positions(sentence);
    let n_words = pos.iter().flatten().count();
    if n_words <= 1 {
        return Err(undefined(
            "avg_dep_length",
            sentence,
            "fewer than two non-punctuation tokens",
        ));
    }
    let mut total = 0usize;
    for (i, tok) in sentence.tokens.iter().enumerate() {
        if tok.head == 0 {
            continue;
        }
        if let (Some(dep), Some(head)) = (pos[i], pos[tok.head - 1]) {
            total += dep.abs_diff(head);
        }
    }
    Ok(total as f64 / (n_words - 1) as f64)
}

pub fn max_tree_depth(sentence: &DepSentence) -> Result<usize> {
    let tree = build_tree(sentence)?;
    Ok(sentence
        .tokens
        .iter()
        .filter(|t| !t.is_punct())
        .map(|t| tree.depth(t.index))
        .max()
        .unwrap_or(0))
}

/// Mean number of direct dependents per VERB, not counting punctuation or
/// AUX dependents. Verbless sentences score 0.
pub fn avg_verbal_edges(sentence: &DepSentence) -> f64 {
    let mut counts: BTreeMap<usize, usize> = sentence
        .tokens
        .iter()
        .filter(|t| t.upos == "VERB")
        .map(|t| (t.index, 0))
        .collect();
    if counts.is_empty() {
        return 0.0;
    }
    for tok in &sentence.tokens {
        if tok.head == 0 || tok.is_punct() || tok.upos == "AUX" {
            continue;
        }
        if let Some(c) = counts.get_mut(&tok.head) {
            *c += 1;
        }
    }
    counts.values().sum::<usize>() as f64 / counts.len() as f64
}

/// Average length of subordinate chains.
///
/// Each subordinate-clause head is nested under the nearest subordinate head
/// among its ancestors. Every path from an outermost head down to a head with
/// no nested clauses is one chain, and its length is the number of heads on it.
pub fn avg_subordinate_chain(sentence: &DepSentence, config: &MetricConfig) -> f64 {
    let n = sentence.tokens.len();
    let is_sub: Vec<bool> = sentence
        .tokens
        .iter()
        .map(|t| config.is_subordinate(t))
        .collect();
    if !is_sub.iter().any(|&b| b) {
        return 0.0;
    }

    // nesting parent of each subordinate head (0-based), None for outermost
    let mut nested_children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut outermost = Vec::new();
    for i in (0..n).filter(|&i| is_sub[i]) {
        let mut cur = sentence.tokens[i].head;
        let mut steps = 0;
        let parent = loop {
            if cur == 0 || steps > n {
                break None;
            }
            if is_sub[cur - 1] {
                break Some(cur - 1);
            }
            cur = sentence.tokens[cur - 1].head;
            steps += 1;
        };
        match parent {
            Some(p) => nested_children[p].push(i),
            None => outermost.push(i),
        }
    }

    let (mut total, mut chains) = (0usize, 0usize);
    let mut stack: Vec<(usize, usize)> = outermost.into_iter().map(|i| (i, 1)).collect();
    while let Some((node, len)) = stack.pop() {
        if nested_children[node].is_empty() {
            total += len;
            chains += 1;
        } else {
            stack.extend(nested_children[node].iter().map(|&c| (c, len + 1)));
        }
    }
    total as f64 / chains as f64
}

/// All six raw metrics for one sentence. Fails when lexical density or
/// dependency length is undefined.
pub fn compute_profile(sentence: &DepSentence, config: &MetricConfig) -> Result<ComplexityProfile> {
    Ok(ComplexityProfile {
        sentence_id: sentence.id.clone(),
        language: sentence.language.clone(),
        token_count: token_count(sentence),
        lexical_density: lexical_density(sentence, config)?,
        avg_dep_length: avg_dependency_length(sentence)?,
        max_tree_depth: max_tree_depth(sentence)?,
        avg_verbal_edges: avg_verbal_edges(sentence),
        avg_sub_chain: avg_subordinate_chain(sentence, config),
        normalized: None,
        combined: None,
    })
}

/// Profiles for every sentence with defined metrics; the rest are dropped
/// with a warning.
pub fn profile_corpus(sentences: &[DepSentence], config: &MetricConfig) -> Vec<ComplexityProfile> {
    sentences
        .iter()
        .filter_map(|s| match compute_profile(s, config) {
            Ok(p) => Some(p),
            Err(e) => {
                warn!("excluding from complexity targets: {e}");
                None
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationGroup {
    #[default]
    PerLanguage,
    Global,
}

pub const GLOBAL_GROUP: &str = "global";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub group: String,
    pub min: [f64; 6],
    pub max: [f64; 6],
}

impl NormalizationStats {
    pub fn is_degenerate(&self, metric: Metric) -> bool {
        let i = metric.position();
        self.max[i] <= self.min[i]
    }
}

pub fn group_key(profile: &ComplexityProfile, group_by: NormalizationGroup) -> &str {
    match group_by {
        NormalizationGroup::PerLanguage => &profile.language,
        NormalizationGroup::Global => GLOBAL_GROUP,
    }
}

/// Per-group min and max of every raw metric.
pub fn fit_normalization(
    profiles: &[ComplexityProfile],
    group_by: NormalizationGroup,
) -> Result<BTreeMap<String, NormalizationStats>> {
    if profiles.is_empty() {
        return Err(Error::InvalidInput(
            "cannot fit normalization on an empty group".into(),
        ));
    }
    let mut out: BTreeMap<String, NormalizationStats> = BTreeMap::new();
    for p in profiles {
        let raw = p.raw();
        let key = group_key(p, group_by);
        let stats = out.entry(key.to_string()).or_insert_with(|| NormalizationStats {
            group: key.to_string(),
            min: [f64::INFINITY; 6],
            max: [f64::NEG_INFINITY; 6],
        });
        for ((lo, hi), v) in stats.min.iter_mut().zip(stats.max.iter_mut()).zip(raw) {
            *lo = lo.min(v);
            *hi = hi.max(v);
        }
    }
    Ok(out)
}

fn mean6(v: &[f64; 6]) -> f64 {
    v.iter().sum::<f64>() / 6.0
}

pub fn normalize_profile(profile: &ComplexityProfile, stats: &NormalizationStats) -> ComplexityProfile {
    let raw = profile.raw();
    let mut norm = [0.0; 6];
    for i in 0..6 {
        let span = stats.max[i] - stats.min[i];
        norm[i] = if span > 0.0 {
            ((raw[i] - stats.min[i]) / span).clamp(0.0, 1.0)
        } else {
            0.0
        };
    }
    ComplexityProfile {
        normalized: Some(norm),
        combined: Some(mean6(&norm)),
        ..profile.clone()
    }
}

/// Fit normalization over `profiles` and apply it to each one.
pub fn normalize_corpus(
    profiles: &[ComplexityProfile],
    group_by: NormalizationGroup,
) -> Result<Vec<ComplexityProfile>> {
    let stats = fit_normalization(profiles, group_by)?;
    Ok(profiles
        .iter()
        .map(|p| normalize_profile(p, &stats[group_key(p, group_by)]))
        .collect())
}
