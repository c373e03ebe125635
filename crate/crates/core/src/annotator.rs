//! Rule-based polar/content question labelling.
//!
//! A [`RulePack`] is an ordered list of surface-pattern rules for one
//! language. Rules run in ascending priority and the first one that fires
//! decides the label. Builtin packs for the seven supported languages live
//! in `packs/*.toml` and use the same file format as user packs.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::corpus::{DepSentence, QuestionType, Token};
use crate::error::{Error, Result};

const BUILTIN_PACKS: [(&str, &str); 7] = [
    ("ara", include_str!("../packs/ara.toml")),
    ("eng", include_str!("../packs/eng.toml")),
    ("fin", include_str!("../packs/fin.toml")),
    ("ind", include_str!("../packs/ind.toml")),
    ("jpn", include_str!("../packs/jpn.toml")),
    ("kor", include_str!("../packs/kor.toml")),
    ("rus", include_str!("../packs/rus.toml")),
];

/// Sentence-final question marks across the supported scripts.
const QUESTION_MARKS: [char; 3] = ['?', '？', '؟'];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    LexiconMatch,
    SuffixMatch,
    InitialTokenClass,
    FinalParticle,
    RegexOnForms,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetField {
    Form,
    Lemma,
    Upos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Polar,
    Content,
}

impl Verdict {
    pub fn label(self) -> QuestionType {
        match self {
            Verdict::Polar => QuestionType::Polar,
            Verdict::Content => QuestionType::Content,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefaultVerdict {
    Polar,
    Content,
    Abstain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum PayloadSpec {
    One(String),
    Many(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RuleSpec {
    id: String,
    kind: RuleKind,
    target_field: TargetField,
    payload: PayloadSpec,
    verdict: Verdict,
    priority: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PackSpec {
    language: String,
    default_verdict: DefaultVerdict,
    rules: Vec<RuleSpec>,
}

#[derive(Debug, Clone)]
pub struct Rule {
    pub id: String,
    pub kind: RuleKind,
    pub target_field: TargetField,
    pub payload: Vec<String>,
    pub verdict: Verdict,
    pub priority: i64,
    matcher: Matcher,
}

#[derive(Debug, Clone)]
enum Matcher {
    Set(BTreeSet<String>),
    Suffixes(Vec<String>),
    Pattern(Regex),
}

impl Rule {
    fn compile(spec: RuleSpec) -> Result<Rule> {
        let payload = match spec.payload {
            PayloadSpec::One(s) => vec![s],
            PayloadSpec::Many(v) => v,
        };
        if payload.is_empty() || payload.iter().all(|p| p.trim().is_empty()) {
            return Err(Error::Config(format!("rule {}: empty payload", spec.id)));
        }
        let field = spec.target_field;
        let matcher = match spec.kind {
            RuleKind::LexiconMatch | RuleKind::InitialTokenClass | RuleKind::FinalParticle => {
                Matcher::Set(payload.iter().map(|p| normalize(p, field)).collect())
            }
            RuleKind::SuffixMatch => Matcher::Suffixes(
                payload
                    .iter()
                    .map(|p| normalize(p.trim_start_matches('-'), field))
                    .collect(),
            ),
            RuleKind::RegexOnForms => {
                let pattern = payload.join("|");
                let re = Regex::new(&pattern).map_err(|e| {
                    Error::Config(format!("rule {}: invalid pattern: {e}", spec.id))
                })?;
                Matcher::Pattern(re)
            }
        };
        Ok(Rule {
            id: spec.id,
            kind: spec.kind,
            target_field: field,
            payload,
            verdict: spec.verdict,
            priority: spec.priority,
            matcher,
        })
    }

    fn to_spec(&self) -> RuleSpec {
        RuleSpec {
            id: self.id.clone(),
            kind: self.kind,
            target_field: self.target_field,
            payload: PayloadSpec::Many(self.payload.clone()),
            verdict: self.verdict,
            priority: self.priority,
        }
    }

    /// Whether this rule fires on `sentence`.
    pub fn matches(&self, sentence: &DepSentence) -> bool {
        let words = || sentence.tokens.iter().filter(|t| !t.is_punct());
        let value = |t: &Token| field_value(t, self.target_field);
        match (&self.matcher, self.kind) {
            (Matcher::Set(set), RuleKind::LexiconMatch) => words().any(|t| set.contains(&value(t))),
            (Matcher::Set(set), RuleKind::InitialTokenClass) => {
                words().next().is_some_and(|t| set.contains(&value(t)))
            }
            (Matcher::Set(set), RuleKind::FinalParticle) => {
                words().next_back().is_some_and(|t| set.contains(&value(t)))
            }
            (Matcher::Suffixes(suffixes), _) => words().any(|t| {
                let v = value(t);
                suffixes
                    .iter()
                    .any(|s| v.len() > s.len() && v.ends_with(s.as_str()))
            }),
            (Matcher::Pattern(re), _) => {
                let joined = sentence
                    .tokens
                    .iter()
                    .map(|t| normalize(&t.form, TargetField::Form))
                    .collect::<Vec<_>>()
                    .join(" ");
                re.is_match(&joined)
            }
            _ => false,
        }
    }
}

fn normalize(s: &str, field: TargetField) -> String {
    let nfc: String = s.nfc().collect();
    match field {
        TargetField::Upos => nfc.to_uppercase(),
        TargetField::Form | TargetField::Lemma => nfc.to_lowercase(),
    }
}

fn field_value(t: &Token, field: TargetField) -> String {
    match field {
        TargetField::Form => normalize(&t.form, field),
        TargetField::Lemma => normalize(&t.lemma, field),
        TargetField::Upos => normalize(&t.upos, field),
    }
}

#[derive(Debug, Clone)]
pub struct RulePack {
    pub language: String,
    pub default_verdict: DefaultVerdict,
    /// Sorted by ascending priority.
    pub rules: Vec<Rule>,
}

pub enum PackSource<'a> {
    Builtin,
    File(&'a Path),
}

impl RulePack {
    /// Parse a pack from its TOML text.
    pub fn from_toml(text: &str) -> Result<RulePack> {
        let spec: PackSpec =
            toml::from_str(text).map_err(|e| Error::Config(format!("rule pack: {e}")))?;
        let mut rules = spec
            .rules
            .into_iter()
            .map(Rule::compile)
            .collect::<Result<Vec<_>>>()?;
        rules.sort_by_key(|r| r.priority);
        if let Some(w) = rules.windows(2).find(|w| w[0].priority == w[1].priority) {
            return Err(Error::Config(format!(
                "rules {} and {} share priority {}",
                w[0].id, w[1].id, w[0].priority
            )));
        }
        Ok(RulePack {
            language: spec.language,
            default_verdict: spec.default_verdict,
            rules,
        })
    }

    pub fn builtin(language: &str) -> Result<RulePack> {
        let (_, text) = BUILTIN_PACKS
            .iter()
            .find(|(code, _)| *code == language)
            .ok_or_else(|| Error::MissingPack(language.to_string()))?;
        RulePack::from_toml(text)
    }

    pub fn builtin_all() -> BTreeMap<String, RulePack> {
        BUILTIN_PACKS
            .iter()
            .map(|(code, text)| {
                let pack = RulePack::from_toml(text).expect("builtin rule packs are valid");
                (code.to_string(), pack)
            })
            .collect()
    }

    pub fn to_toml(&self) -> String {
        let spec = PackSpec {
            language: self.language.clone(),
            default_verdict: self.default_verdict,
            rules: self.rules.iter().map(Rule::to_spec).collect(),
        };
        toml::to_string(&spec).expect("rule packs serialize")
    }

    /// Copy of this pack with the given rules removed.
    pub fn without_rules(&self, ids: &[&str]) -> RulePack {
        RulePack {
            rules: self
                .rules
                .iter()
                .filter(|r| !ids.contains(&r.id.as_str()))
                .cloned()
                .collect(),
            ..self.clone()
        }
    }
}

pub fn load_rulepack(language: &str, source: PackSource<'_>) -> Result<RulePack> {
    let pack = match source {
        PackSource::Builtin => RulePack::builtin(language)?,
        PackSource::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            RulePack::from_toml(&text)?
        }
    };
    if pack.language != language {
        return Err(Error::Config(format!(
            "rule pack is for {:?}, requested {language:?}",
            pack.language
        )));
    }
    Ok(pack)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    Rule,
    Default,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub label: QuestionType,
    pub fired_rule: String,
    pub confidence: Confidence,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Labeled(Annotation),
    Abstain,
}

impl Classification {
    pub fn label(&self) -> Option<QuestionType> {
        match self {
            Classification::Labeled(a) => Some(a.label),
            Classification::Abstain => None,
        }
    }
}

pub fn ends_with_question_mark(sentence: &DepSentence) -> bool {
    let last_form = sentence.tokens.last().map(|t| t.form.trim_end());
    last_form.is_some_and(|f| f.ends_with(QUESTION_MARKS))
        || sentence.text.trim_end().ends_with(QUESTION_MARKS)
}

/// Label one sentence. The pack default only applies to sentences that end
/// in a question mark; anything else without a firing rule abstains.
pub fn classify_question(sentence: &DepSentence, pack: &RulePack) -> Classification {
    if let Some(rule) = pack.rules.iter().find(|r| r.matches(sentence)) {
        return Classification::Labeled(Annotation {
            label: rule.verdict.label(),
            fired_rule: rule.id.clone(),
            confidence: Confidence::Rule,
        });
    }
    let default = match pack.default_verdict {
        DefaultVerdict::Polar => Some(QuestionType::Polar),
        DefaultVerdict::Content => Some(QuestionType::Content),
        DefaultVerdict::Abstain => None,
    };
    match default {
        Some(label) if ends_with_question_mark(sentence) => Classification::Labeled(Annotation {
            label,
            fired_rule: "default".into(),
            confidence: Confidence::Default,
        }),
        _ => Classification::Abstain,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub total: usize,
    pub polar: usize,
    pub content: usize,
    pub abstained: usize,
    pub by_rule: BTreeMap<String, usize>,
    pub by_language: BTreeMap<String, LanguageCoverage>,
    /// Sentences carrying a gold label that also received a rule label.
    pub gold_compared: usize,
    pub gold_agreed: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LanguageCoverage {
    pub total: usize,
    pub polar: usize,
    pub content: usize,
    pub abstained: usize,
}

impl CoverageReport {
    pub fn gold_agreement(&self) -> Option<f64> {
        (self.gold_compared > 0).then(|| self.gold_agreed as f64 / self.gold_compared as f64)
    }
}

#[derive(Debug, Clone)]
pub struct AnnotatedSentence {
    pub sentence: DepSentence,
    pub classification: Classification,
}

/// Classify every sentence with the pack for its language.
pub fn annotate_corpus(
    sentences: &[DepSentence],
    packs: &BTreeMap<String, RulePack>,
) -> Result<(Vec<AnnotatedSentence>, CoverageReport)> {
    let missing: BTreeSet<&str> = sentences
        .iter()
        .map(|s| s.language.as_str())
        .filter(|l| !packs.contains_key(*l))
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingPack(
            missing.into_iter().collect::<Vec<_>>().join(", "),
        ));
    }

    let mut report = CoverageReport::default();
    let mut out = Vec::with_capacity(sentences.len());
    for s in sentences {
        let classification = classify_question(s, &packs[&s.language]);
        let lang = report.by_language.entry(s.language.clone()).or_default();
        report.total += 1;
        lang.total += 1;
        match &classification {
            Classification::Labeled(a) => {
                *report.by_rule.entry(a.fired_rule.clone()).or_default() += 1;
                match a.label {
                    QuestionType::Polar => {
                        report.polar += 1;
                        lang.polar += 1;
                    }
                    QuestionType::Content => {
                        report.content += 1;
                        lang.content += 1;
                    }
                }
                if let Some(gold) = s.question_label {
                    report.gold_compared += 1;
                    report.gold_agreed += usize::from(gold == a.label);
                }
            }
            Classification::Abstain => {
                report.abstained += 1;
                lang.abstained += 1;
            }
        }
        out.push(AnnotatedSentence {
            sentence: s.clone(),
            classification,
        });
    }
    Ok((out, report))
}
