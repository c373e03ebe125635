//! Treebank ingestion: CoNLL-U parsing, the line-delimited sentence
//! interchange format, and dependency-tree construction.
//!
//! Multiword range lines (`3-4`) and empty nodes (`5.1`) are dropped, so a
//! [`DepSentence`] only ever holds basic syntactic words.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::metrics::MetricsRecord;

/// Languages with builtin support (ISO 639-3).
pub const BUILTIN_LANGUAGES: [&str; 7] = ["ara", "eng", "fin", "ind", "jpn", "kor", "rus"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub index: usize,
    pub form: String,
    #[serde(default)]
    pub lemma: String,
    pub upos: String,
    pub head: usize,
    pub deprel: String,
}

impl Token {
    /// Punctuation by UPOS, falling back to the `punct` relation when the
    /// tag is missing (`_`).
    pub fn is_punct(&self) -> bool {
        if self.upos == "PUNCT" {
            return true;
        }
        (self.upos.is_empty() || self.upos == "_") && self.deprel_base() == "punct"
    }

    /// Relation with any `:subtype` suffix removed.
    pub fn deprel_base(&self) -> &str {
        self.deprel.split(':').next().unwrap_or("")
    }

    pub fn is_root(&self) -> bool {
        self.head == 0
    }
}

/// Binary question type. Serialized as `1` (polar) / `0` (content).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QuestionType {
    Content,
    Polar,
}

impl QuestionType {
    pub fn as_label(self) -> u8 {
        match self {
            QuestionType::Content => 0,
            QuestionType::Polar => 1,
        }
    }

    pub fn from_label(label: u8) -> Option<Self> {
        match label {
            0 => Some(QuestionType::Content),
            1 => Some(QuestionType::Polar),
            _ => None,
        }
    }
}

impl Serialize for QuestionType {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.as_label())
    }
}

impl<'de> Deserialize<'de> for QuestionType {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = u8::deserialize(d)?;
        QuestionType::from_label(v)
            .ok_or_else(|| serde::de::Error::custom(format!("question_label must be 0 or 1, got {v}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepSentence {
    pub id: String,
    pub language: String,
    pub text: String,
    pub tokens: Vec<Token>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_label: Option<QuestionType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_tag: Option<SplitTag>,
}

impl DepSentence {
    pub fn new(id: impl Into<String>, language: impl Into<String>, tokens: Vec<Token>) -> Self {
        let text = tokens
            .iter()
            .map(|t| t.form.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        DepSentence {
            id: id.into(),
            language: language.into(),
            text,
            tokens,
            question_label: None,
            metrics: None,
            split_tag: None,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token by 1-based index.
    pub fn token(&self, index: usize) -> Option<&Token> {
        index.checked_sub(1).and_then(|i| self.tokens.get(i))
    }

    /// Check the token-level and tree invariants.
    pub fn validate(&self) -> Result<()> {
        let n = self.tokens.len();
        if n == 0 {
            return Err(self.invalid("sentence has no tokens"));
        }
        for (pos, tok) in self.tokens.iter().enumerate() {
            if tok.index != pos + 1 {
                return Err(self.invalid(format!(
                    "token at position {} has index {}, expected {}",
                    pos + 1,
                    tok.index,
                    pos + 1
                )));
            }
            if tok.upos.is_empty() {
                return Err(self.invalid(format!("token {} has an empty upos", tok.index)));
            }
            if tok.head == tok.index {
                return Err(self.invalid(format!("token {} is its own head", tok.index)));
            }
            if tok.head > n {
                return Err(self.invalid(format!(
                    "token {} has head {} but the sentence has {} tokens",
                    tok.index, tok.head, n
                )));
            }
        }
        build_tree(self).map(|_| ())
    }

    fn invalid(&self, message: impl Into<String>) -> Error {
        Error::Validation {
            sentence: self.id.clone(),
            message: message.into(),
        }
    }
}

/// Children lists and depths derived from a sentence's head column.
///
/// All vectors are indexed by 0-based token position (`index - 1`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepTree {
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
    root: usize,
}

impl DepTree {
    /// 1-based index of the root-attached token.
    pub fn root(&self) -> usize {
        self.root
    }

    /// 1-based indices of the direct dependents of `index`, ascending.
    pub fn children(&self, index: usize) -> &[usize] {
        &self.children[index - 1]
    }

    /// Depth of `index`; the root-attached token has depth 0.
    pub fn depth(&self, index: usize) -> usize {
        self.depth[index - 1]
    }

    pub fn depths(&self) -> &[usize] {
        &self.depth
    }

    pub fn len(&self) -> usize {
        self.depth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depth.is_empty()
    }
}

pub fn build_tree(sentence: &DepSentence) -> Result<DepTree> {
    let n = sentence.tokens.len();
    let structure = |message: String| Error::Structure {
        sentence: sentence.id.clone(),
        message,
    };
    let roots: Vec<usize> = sentence
        .tokens
        .iter()
        .filter(|t| t.head == 0)
        .map(|t| t.index)
        .collect();
    let root = match roots.as_slice() {
        [r] => *r,
        [] => return Err(structure("no token is attached to the root".into())),
        many => return Err(structure(format!("multiple roots: {many:?}"))),
    };

    let mut children = vec![Vec::new(); n];
    for tok in &sentence.tokens {
        if tok.head == 0 {
            continue;
        }
        if tok.head > n || tok.index == 0 || tok.index > n {
            return Err(structure(format!(
                "token {} has out-of-range head {}",
                tok.index, tok.head
            )));
        }
        children[tok.head - 1].push(tok.index);
    }
    for c in &mut children {
        c.sort_unstable();
    }

    let mut depth = vec![usize::MAX; n];
    depth[root - 1] = 0;
    let mut queue = VecDeque::from([root]);
    while let Some(node) = queue.pop_front() {
        for &child in &children[node - 1] {
            if depth[child - 1] == usize::MAX {
                depth[child - 1] = depth[node - 1] + 1;
                queue.push_back(child);
            }
        }
    }
    if let Some(pos) = depth.iter().position(|&d| d == usize::MAX) {
        return Err(structure(format!(
            "token {} is not reachable from the root (cycle)",
            pos + 1
        )));
    }
    Ok(DepTree {
        children,
        depth,
        root,
    })
}

/// Sentences that parsed but failed tree validation, kept alongside the
/// accepted ones so callers can report them.
#[derive(Debug, Default)]
pub struct ParsedCorpus {
    pub sentences: Vec<DepSentence>,
    pub rejected: Vec<Error>,
}

/// Parse CoNLL-U text, failing on the first malformed or invalid sentence.
pub fn parse_conllu(text: &str, language: &str) -> Result<Vec<DepSentence>> {
    parse_conllu_named(text, language, "conllu")
}

/// Like [`parse_conllu`]; `stem` is used for sentences without `# sent_id`.
pub fn parse_conllu_named(text: &str, language: &str, stem: &str) -> Result<Vec<DepSentence>> {
    let parsed = parse_blocks(text, language, stem)?;
    parsed
        .into_iter()
        .map(|s| s.validate().map(|_| s))
        .collect()
}

/// Parse CoNLL-U text, skipping sentences that fail validation with a
/// warning. Column-level syntax errors still abort.
pub fn parse_conllu_tolerant(text: &str, language: &str, stem: &str) -> Result<ParsedCorpus> {
    let mut out = ParsedCorpus::default();
    for s in parse_blocks(text, language, stem)? {
        match s.validate() {
            Ok(()) => out.sentences.push(s),
            Err(e) => {
                warn!("skipping sentence: {e}");
                out.rejected.push(e);
            }
        }
    }
    Ok(out)
}

pub fn read_conllu_file(path: &Path, language: &str) -> Result<ParsedCorpus> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("conllu");
    parse_conllu_tolerant(&text, language, stem)
}

struct Block {
    sent_id: Option<String>,
    text: Option<String>,
    tokens: Vec<Token>,
}

impl Block {
    fn new() -> Self {
        Block {
            sent_id: None,
            text: None,
            tokens: Vec::new(),
        }
    }
}

fn parse_blocks(text: &str, language: &str, stem: &str) -> Result<Vec<DepSentence>> {
    let mut out = Vec::new();
    let mut block = Block::new();
    let mut in_block = false;

    let finish = |block: &mut Block, out: &mut Vec<DepSentence>| {
        let b = std::mem::replace(block, Block::new());
        let ordinal = out.len() + 1;
        let id = b.sent_id.unwrap_or_else(|| format!("{stem}:{ordinal}"));
        let text = b.text.unwrap_or_else(|| {
            b.tokens
                .iter()
                .map(|t| t.form.as_str())
                .collect::<Vec<_>>()
                .join(" ")
        });
        out.push(DepSentence {
            id,
            language: language.to_string(),
            text,
            tokens: b.tokens,
            question_label: None,
            metrics: None,
            split_tag: None,
        });
    };

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            if in_block {
                finish(&mut block, &mut out);
                in_block = false;
            }
            continue;
        }
        in_block = true;
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                match key.trim() {
                    "sent_id" => block.sent_id = Some(value.trim().to_string()),
                    "text" => block.text = Some(value.trim().to_string()),
                    _ => {}
                }
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 10 tab-separated columns, found {}", cols.len()),
            });
        }
        let id = cols[0];
        if id.contains('-') || id.contains('.') {
            continue;
        }
        let index: usize = id.parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("invalid token id {id:?}"),
        })?;
        if index == 0 {
            return Err(Error::Parse {
                line: line_no,
                message: "token id must be at least 1".into(),
            });
        }
        let head: usize = cols[6].parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("invalid head {:?}", cols[6]),
        })?;
        let lemma = if cols[2] == "_" && cols[1] != "_" {
            String::new()
        } else {
            cols[2].to_string()
        };
        block.tokens.push(Token {
            index,
            form: cols[1].to_string(),
            lemma,
            upos: cols[3].to_string(),
            head,
            deprel: cols[7].to_string(),
        });
    }
    if in_block {
        finish(&mut block, &mut out);
    }
    Ok(out)
}

/// Load a line-delimited sentence interchange file. Records whose tree is
/// invalid are skipped with a warning.
pub fn load_labeled_corpus(path: &Path) -> Result<Vec<DepSentence>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_labeled_corpus(BufReader::new(file))
}

pub fn read_labeled_corpus<R: BufRead>(reader: R) -> Result<Vec<DepSentence>> {
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line_no = lineno + 1;
        let line = line.map_err(|e| Error::Format {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| Error::Format {
            line: line_no,
            message: e.to_string(),
        })?;
        if !value.get("tokens").is_some_and(|t| t.is_array()) {
            return Err(Error::Format {
                line: line_no,
                message: "record has no tokens array".into(),
            });
        }
        let sentence: DepSentence = serde_json::from_value(value).map_err(|e| Error::Format {
            line: line_no,
            message: e.to_string(),
        })?;
        match sentence.validate() {
            Ok(()) => out.push(sentence),
            Err(e) => warn!("line {line_no}: skipping sentence: {e}"),
        }
    }
    Ok(out)
}

pub fn write_corpus<W: Write>(mut writer: W, sentences: &[DepSentence]) -> Result<()> {
    for s in sentences {
        serde_json::to_writer(&mut writer, s)?;
        writer.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
    }
    writer.flush().map_err(|e| Error::io("<output>", e))
}

pub fn save_corpus(path: &Path, sentences: &[DepSentence]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_corpus(BufWriter::new(file), sentences)
}
