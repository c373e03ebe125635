//! Subword TF-IDF features.
//!
//! Weights use raw counts and the smoothed idf `ln((1 + D) / (1 + df)) + 1`,
//! then every vector is L2-normalized. Vocabularies are fitted on training
//! sequences only.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubwordSequence {
    pub id: String,
    pub pieces: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct SubwordRecord {
    id: String,
    #[serde(default)]
    pieces: Option<Vec<String>>,
    #[serde(default)]
    piece_ids: Option<Vec<u64>>,
    #[serde(default)]
    vocab_size: Option<u64>,
}

/// Read a subword sequence file. Integer-id records are mapped to `#<id>`
/// piece strings.
pub fn load_subwords(path: &Path) -> Result<Vec<SubwordSequence>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_subwords(BufReader::new(file))
}

pub fn read_subwords<R: BufRead>(reader: R) -> Result<Vec<SubwordSequence>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let format = |message: String| Error::Format {
            line: line_no,
            message,
        };
        let line = line.map_err(|e| format(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SubwordRecord = serde_json::from_str(&line).map_err(|e| format(e.to_string()))?;
        let pieces = match (rec.pieces, rec.piece_ids) {
            (Some(p), _) => p,
            (None, Some(ids)) => {
                if let Some(v) = rec.vocab_size {
                    if let Some(bad) = ids.iter().find(|&&id| id >= v) {
                        return Err(format(format!("piece id {bad} >= vocab_size {v}")));
                    }
                }
                ids.iter().map(|id| format!("#{id}")).collect()
            }
            (None, None) => return Err(format("record has neither pieces nor piece_ids".into())),
        };
        out.push(SubwordSequence { id: rec.id, pieces });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfVocabulary {
    /// Piece to column; columns are dense `0..len`.
    pub index: BTreeMap<String, usize>,
    pub idf: Vec<f64>,
    pub fitted_on: String,
}

impl TfidfVocabulary {
    pub fn len(&self) -> usize {
        self.idf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idf.is_empty()
    }

    pub fn idf_of(&self, piece: &str) -> Option<f64> {
        self.index.get(piece).map(|&i| self.idf[i])
    }
}

/// Fit a vocabulary on training sequences. Columns are assigned in sorted
/// piece order so the result does not depend on input order.
pub fn fit_vocabulary(train: &[SubwordSequence], fitted_on: &str) -> Result<TfidfVocabulary> {
    if train.is_empty() {
        return Err(Error::InvalidInput(
            "cannot fit a TF-IDF vocabulary on zero sequences".into(),
        ));
    }
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for seq in train {
        let mut seen: Vec<&str> = seq.pieces.iter().map(String::as_str).collect();
        seen.sort_unstable();
        seen.dedup();
        for p in seen {
            *df.entry(p).or_default() += 1;
        }
    }
    let d = train.len() as f64;
    let mut index = BTreeMap::new();
    let mut idf = Vec::with_capacity(df.len());
    for (col, (piece, count)) in df.into_iter().enumerate() {
        index.insert(piece.to_string(), col);
        idf.push(((1.0 + d) / (1.0 + count as f64)).ln() + 1.0);
    }
    Ok(TfidfVocabulary {
        index,
        idf,
        fitted_on: fitted_on.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub dim: usize,
    /// Strictly increasing column indices with their values.
    pub entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn zeros(dim: usize) -> Self {
        SparseVector {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| v * dense[i]).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn vectorize(sequence: &SubwordSequence, vocab: &TfidfVocabulary) -> SparseVector {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for piece in &sequence.pieces {
        if let Some(&col) = vocab.index.get(piece) {
            *counts.entry(col).or_default() += 1;
        }
    }
    let mut entries: Vec<(usize, f64)> = counts
        .into_iter()
        .map(|(col, c)| (col, c as f64 * vocab.idf[col]))
        .collect();
    entries.sort_unstable_by_key(|&(col, _)| col);
    let norm = entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, v) in &mut entries {
            *v /= norm;
        }
    }
    SparseVector {
        dim: vocab.len(),
        entries,
    }
}
