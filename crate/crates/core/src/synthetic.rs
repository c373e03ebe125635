//! Small synthetic corpora, subword files and embedding stores for demos and
//! tests.
//!
//! Sentences are random dependency trees that open with either a wh-word
//! (content) or an auxiliary (polar) and end in `?`. Embedding layers mix a
//! label direction and a complexity direction with Gaussian noise; both
//! signals peak in the middle layers.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::{save_corpus, DepSentence, QuestionType, Token};
use crate::error::{Error, Result};
use crate::features::SubwordSequence;
use crate::metrics::{normalize_corpus, profile_corpus, MetricConfig, NormalizationGroup};
use crate::probes::{save_embeddings, EmbeddingStore};
use crate::runner::{Approach, ExperimentConfig, Hyperparameters, InputPaths, LayerRange, Task};
use crate::selectivity::DEFAULT_CONTROL_SEEDS;

const WH: [&str; 6] = ["what", "who", "where", "when", "why", "how"];
const AUX: [&str; 6] = ["did", "does", "is", "can", "will", "has"];

fn lexicon(upos: &str) -> (&'static [&'static str], &'static [&'static str]) {
    match upos {
        "NOUN" => (
            &["dog", "house", "ticket", "river", "teacher", "letter", "garden", "city"],
            &["obj", "nsubj", "obl", "nmod"],
        ),
        "VERB" => (
            &["buy", "see", "write", "leave", "know", "think", "open", "find"],
            &["ccomp", "advcl", "xcomp", "conj", "acl"],
        ),
        "ADJ" => (&["old", "red", "quiet", "long", "new"], &["amod"]),
        "ADV" => (&["also", "really", "today", "again"], &["advmod"]),
        "DET" => (&["the", "those", "a", "every"], &["det"]),
        "PRON" => (&["you", "she", "they", "it"], &["nsubj", "obj"]),
        _ => (&["in", "with", "near", "for"], &["case"]),
    }
}

/// Per-coordinate noise; the label signal ranges from 0.3 to 2.0 across layers.
const NOISE_SD: f64 = 0.5;

const UPOS: [&str; 7] = ["NOUN", "VERB", "ADJ", "ADV", "DET", "PRON", "ADP"];

/// One random question.
pub fn random_question(id: &str, language: &str, polar: bool, rng: &mut impl Rng) -> DepSentence {
    let n_words = rng.gen_range(3..=12);
    let mut tokens = Vec::with_capacity(n_words + 1);
    let (form, upos, deprel) = if polar {
        (*AUX.choose(rng).unwrap(), "AUX", "aux")
    } else {
        (*WH.choose(rng).unwrap(), "PRON", "obj")
    };
    tokens.push(tok(1, form, upos, 2, deprel));
    tokens.push(tok(2, lexicon("VERB").0.choose(rng).unwrap(), "VERB", 0, "root"));
    for i in 3..=n_words {
        let upos = *UPOS.choose(rng).unwrap();
        let (forms, rels) = lexicon(upos);
        let head = rng.gen_range(1..i);
        tokens.push(tok(i, forms.choose(rng).unwrap(), upos, head, rels.choose(rng).unwrap()));
    }
    tokens.push(tok(n_words + 1, "?", "PUNCT", 2, "punct"));
    let mut s = DepSentence::new(id, language, tokens);
    s.question_label = Some(if polar { QuestionType::Polar } else { QuestionType::Content });
    s
}

fn tok(index: usize, form: &str, upos: &str, head: usize, deprel: &str) -> Token {
    Token {
        index,
        form: form.to_string(),
        lemma: form.to_string(),
        upos: upos.to_string(),
        head,
        deprel: deprel.to_string(),
    }
}

/// `per_language` labelled questions per language, half of each type.
pub fn synthetic_corpus(languages: &[&str], per_language: usize, seed: u64) -> Vec<DepSentence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for lang in languages {
        let mut polar: Vec<bool> = (0..per_language).map(|i| i % 2 == 0).collect();
        polar.shuffle(&mut rng);
        for (i, p) in polar.into_iter().enumerate() {
            out.push(random_question(&format!("{lang}-{i:05}"), lang, p, &mut rng));
        }
    }
    out
}

/// Split every word into a `▁`-prefixed head and 3-character pieces.
pub fn synthetic_subwords(sentences: &[DepSentence]) -> Vec<SubwordSequence> {
    sentences
        .iter()
        .map(|s| {
            let mut pieces = Vec::new();
            for t in &s.tokens {
                let chars: Vec<char> = t.form.chars().collect();
                for (k, chunk) in chars.chunks(3).enumerate() {
                    let piece: String = chunk.iter().collect();
                    pieces.push(if k == 0 { format!("▁{piece}") } else { piece });
                }
            }
            SubwordSequence {
                id: s.id.clone(),
                pieces,
            }
        })
        .collect()
}

/// Embeddings whose layers carry the question label and the combined
/// complexity score with layer-dependent strength.
pub fn synthetic_store(sentences: &[DepSentence], n_layers: usize, dim: usize, seed: u64) -> Result<EmbeddingStore> {
    if n_layers == 0 || dim < 2 {
        return Err(Error::InvalidInput("synthetic store needs layers and dim >= 2".into()));
    }
    let profiles = normalize_corpus(
        &profile_corpus(sentences, &MetricConfig::default()),
        NormalizationGroup::PerLanguage,
    )?;
    let combined: std::collections::HashMap<&str, f64> = profiles
        .iter()
        .map(|p| (p.sentence_id.as_str(), p.combined.unwrap_or(0.0)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let unit = |rng: &mut ChaCha8Rng| {
        let v: Vec<f64> = (0..dim).map(|_| normal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect::<Vec<f64>>()
    };
    let u = unit(&mut rng);
    let v = unit(&mut rng);
    let mid = (n_layers as f64 + 1.0) / 2.0;
    let width = (n_layers as f64 / 3.0).max(1.0);
    let signals: Vec<(f64, f64)> = sentences
        .iter()
        .map(|s| {
            let y = if s.question_label == Some(QuestionType::Polar) { 1.0 } else { -1.0 };
            (y, 4.0 * (combined.get(s.id.as_str()).copied().unwrap_or(0.0) - 0.4))
        })
        .collect();
    let layers = (1..=n_layers)
        .map(|l| {
            let strength = 0.3 + 1.7 * (-((l as f64 - mid) / width).powi(2)).exp();
            Array2::from_shape_fn((sentences.len(), dim), |(i, j)| {
                let (y, c) = signals[i];
                strength * (y * u[j] + c * v[j]) + NOISE_SD * normal.sample(&mut rng)
            })
        })
        .collect();
    EmbeddingStore::new(
        "synthetic",
        sentences.iter().map(|s| s.id.clone()).collect(),
        layers,
    )
}

#[derive(Debug, Clone)]
pub struct SyntheticSetup {
    pub languages: Vec<String>,
    pub per_language: usize,
    pub n_layers: usize,
    pub dim: usize,
    pub seed: u64,
}

impl Default for SyntheticSetup {
    fn default() -> Self {
        SyntheticSetup {
            languages: vec!["syn".into(), "tst".into()],
            per_language: 200,
            n_layers: 3,
            dim: 16,
            seed: 7,
        }
    }
}

/// Write a corpus, a subword file and one QEMB file per language into `dir`
/// and return a config running dummy, linear and probe on question type and
/// combined complexity.
pub fn write_synthetic_experiment(dir: &Path, setup: &SyntheticSetup) -> Result<ExperimentConfig> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let langs: Vec<&str> = setup.languages.iter().map(String::as_str).collect();
    let sentences = synthetic_corpus(&langs, setup.per_language, setup.seed);
    let corpus = dir.join("corpus.jsonl");
    save_corpus(&corpus, &sentences)?;
    let subwords = dir.join("subwords.jsonl");
    let mut text = String::new();
    for s in synthetic_subwords(&sentences) {
        text.push_str(&serde_json::to_string(&s)?);
        text.push('\n');
    }
    fs::write(&subwords, text).map_err(|e| Error::io(&subwords, e))?;
    let mut embeddings = std::collections::BTreeMap::new();
    for (k, lang) in langs.iter().enumerate() {
        let subset: Vec<DepSentence> = sentences.iter().filter(|s| &s.language == lang).cloned().collect();
        let store = synthetic_store(&subset, setup.n_layers, setup.dim, setup.seed + 1 + k as u64)?;
        let path = dir.join(format!("{lang}.qemb"));
        let (data, manifest) = store.to_qemb();
        save_embeddings(&path, &data, &manifest)?;
        embeddings.insert(lang.to_string(), path);
    }
    Ok(ExperimentConfig {
        languages: setup.languages.clone(),
        tasks: vec![Task::QuestionType, Task::CombinedComplexity],
        approaches: vec![Approach::Dummy, Approach::Linear, Approach::Probe],
        layers: Some(LayerRange::new(1, setup.n_layers)?),
        control_seeds: DEFAULT_CONTROL_SEEDS.to_vec(),
        seed: crate::runner::DEFAULT_RUN_SEED,
        stratify: true,
        normalization: NormalizationGroup::PerLanguage,
        paths: InputPaths {
            corpus,
            subwords: Some(subwords),
            embeddings,
            rules: Default::default(),
        },
        output_dir: dir.join("out"),
        workers: None,
        hyperparameters: Hyperparameters::default(),
    })
}
