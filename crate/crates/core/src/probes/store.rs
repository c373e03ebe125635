//! Per-layer embedding stores and the QEMB interchange file.
//!
//! QEMB layout, all integers unsigned 32-bit little-endian:
//!
//! ```text
//! "QEMB" version n_sentences n_layers dim granularity(0 = sentence, 1 = token)
//! [token level only] n_sentences token counts
//! for each layer: rows × dim f32 little-endian, row-major
//! ```
//!
//! Rows are sentences at sentence level and tokens (grouped by sentence, in
//! order) at token level. A JSON manifest sits next to the binary file as
//! `<file>.manifest.json`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const QEMB_MAGIC: &[u8; 4] = b"QEMB";
pub const QEMB_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    SentenceLevel,
    TokenLevel,
}

impl Granularity {
    fn flag(self) -> u32 {
        match self {
            Granularity::SentenceLevel => 0,
            Granularity::TokenLevel => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    Mean,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingManifest {
    pub model_id: String,
    pub pooling: Pooling,
    pub layer_indices: Vec<u32>,
    pub sentence_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokenizer_fingerprint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub truncated: Vec<String>,
}

pub fn manifest_path(qemb: &Path) -> PathBuf {
    let mut name = qemb.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Decoded QEMB body.
#[derive(Debug, Clone, PartialEq)]
pub struct QembData {
    pub granularity: Granularity,
    pub n_sentences: usize,
    pub dim: usize,
    /// Tokens per sentence; empty at sentence level.
    pub token_counts: Vec<u32>,
    /// One row-major block per layer.
    pub layers: Vec<Vec<f32>>,
}

impl QembData {
    fn rows(&self) -> usize {
        match self.granularity {
            Granularity::SentenceLevel => self.n_sentences,
            Granularity::TokenLevel => self.token_counts.iter().map(|&c| c as usize).sum(),
        }
    }

    fn check(&self) -> Result<()> {
        if self.granularity == Granularity::TokenLevel {
            if self.token_counts.len() != self.n_sentences {
                return Err(Error::Shape(format!(
                    "{} token counts for {} sentences",
                    self.token_counts.len(),
                    self.n_sentences
                )));
            }
            if self.token_counts.contains(&0) {
                return Err(Error::InvalidInput("token-level sentence with zero tokens".into()));
            }
        }
        let want = self.rows() * self.dim;
        for (l, block) in self.layers.iter().enumerate() {
            if block.len() != want {
                return Err(Error::Shape(format!(
                    "layer {} has {} values, expected {want}",
                    l + 1,
                    block.len()
                )));
            }
        }
        Ok(())
    }
}

pub fn write_qemb<W: Write>(mut w: W, data: &QembData) -> Result<()> {
    data.check()?;
    let io = |e| Error::io("<qemb>", e);
    let put = |v: u32, w: &mut W| w.write_all(&v.to_le_bytes()).map_err(io);
    w.write_all(QEMB_MAGIC).map_err(io)?;
    for v in [
        QEMB_VERSION,
        data.n_sentences as u32,
        data.layers.len() as u32,
        data.dim as u32,
        data.granularity.flag(),
    ] {
        put(v, &mut w)?;
    }
    for &c in &data.token_counts {
        put(c, &mut w)?;
    }
    let mut buf = Vec::new();
    for block in &data.layers {
        buf.clear();
        buf.reserve(block.len() * 4);
        for v in block {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_qemb<R: Read>(mut r: R) -> Result<QembData> {
    let bad = |m: String| Error::InvalidInput(format!("QEMB: {m}"));
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| bad(e.to_string()))?;
    if &magic != QEMB_MAGIC {
        return Err(bad("bad magic bytes".into()));
    }
    let word = |r: &mut R| -> Result<u32> {
        let mut b = [0u8; 4];
        r.read_exact(&mut b).map_err(|e| bad(format!("truncated header: {e}")))?;
        Ok(u32::from_le_bytes(b))
    };
    let version = word(&mut r)?;
    if version != QEMB_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let n_sentences = word(&mut r)? as usize;
    let n_layers = word(&mut r)? as usize;
    let dim = word(&mut r)? as usize;
    let granularity = match word(&mut r)? {
        0 => Granularity::SentenceLevel,
        1 => Granularity::TokenLevel,
        g => return Err(bad(format!("unknown granularity flag {g}"))),
    };
    let token_counts = if granularity == Granularity::TokenLevel {
        (0..n_sentences).map(|_| word(&mut r)).collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let rows = match granularity {
        Granularity::SentenceLevel => n_sentences,
        Granularity::TokenLevel => token_counts.iter().map(|&c| c as usize).sum(),
    };
    let mut layers = Vec::with_capacity(n_layers);
    let mut bytes = vec![0u8; rows * dim * 4];
    for l in 0..n_layers {
        r.read_exact(&mut bytes)
            .map_err(|e| bad(format!("layer {} truncated: {e}", l + 1)))?;
        layers.push(
            bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        );
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| bad(e.to_string()))? != 0 {
        return Err(bad("trailing bytes after last layer".into()));
    }
    let data = QembData {
        granularity,
        n_sentences,
        dim,
        token_counts,
        layers,
    };
    data.check()?;
    Ok(data)
}

/// Elementwise mean of equally sized vectors.
pub fn mean_pool(vectors: &[&[f64]]) -> Result<Vec<f64>> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::InvalidInput("mean_pool of an empty list".into()))?;
    let dim = first.len();
    let mut out = vec![0.0; dim];
    for v in vectors {
        if v.len() != dim {
            return Err(Error::Shape(format!("vector of length {} among length {dim}", v.len())));
        }
        for (o, x) in out.iter_mut().zip(v.iter()) {
            *o += x;
        }
    }
    let k = vectors.len() as f64;
    out.iter_mut().for_each(|o| *o /= k);
    Ok(out)
}

/// Sentence vectors for every layer, aligned to `sentence_ids`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    pub model_id: String,
    /// Granularity of the source file; stored layers are always pooled.
    pub granularity: Granularity,
    sentence_ids: Vec<String>,
    /// Layer `l` lives at `layers[l - 1]`.
    layers: Vec<Array2<f64>>,
}

impl EmbeddingStore {
    pub fn new(model_id: &str, sentence_ids: Vec<String>, layers: Vec<Array2<f64>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidInput("embedding store with no layers".into()));
        }
        let dim = layers[0].ncols();
        for (l, m) in layers.iter().enumerate() {
            if m.nrows() != sentence_ids.len() || m.ncols() != dim {
                return Err(Error::Shape(format!(
                    "layer {} is {}×{}, expected {}×{dim}",
                    l + 1,
                    m.nrows(),
                    m.ncols(),
                    sentence_ids.len()
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("layer {} has non-finite values", l + 1)));
            }
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = sentence_ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::InvalidInput(format!("duplicate sentence id {dup}")));
        }
        Ok(EmbeddingStore {
            model_id: model_id.to_string(),
            granularity: Granularity::SentenceLevel,
            sentence_ids,
            layers,
        })
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn dim(&self) -> usize {
        self.layers[0].ncols()
    }

    pub fn n_sentences(&self) -> usize {
        self.sentence_ids.len()
    }

    pub fn sentence_ids(&self) -> &[String] {
        &self.sentence_ids
    }

    /// 1-based layer access.
    pub fn layer(&self, layer: usize) -> Result<ArrayView2<'_, f64>> {
        if layer == 0 || layer > self.layers.len() {
            return Err(Error::InvalidInput(format!(
                "layer {layer} outside 1..={}",
                self.layers.len()
            )));
        }
        Ok(self.layers[layer - 1].view())
    }

    /// Reorder (and subset) rows to follow `ids`.
    pub fn aligned_to(&self, ids: &[String]) -> Result<EmbeddingStore> {
        let pos: HashMap<&str, usize> = self
            .sentence_ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let rows = ids
            .iter()
            .map(|id| {
                pos.get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::InvalidInput(format!("no embedding for sentence {id}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EmbeddingStore {
            model_id: self.model_id.clone(),
            granularity: self.granularity,
            sentence_ids: ids.to_vec(),
            layers: self
                .layers
                .iter()
                .map(|m| m.select(ndarray::Axis(0), &rows))
                .collect(),
        })
    }

    /// Convert to a sentence-level QEMB body and manifest.
    pub fn to_qemb(&self) -> (QembData, EmbeddingManifest) {
        let data = QembData {
            granularity: Granularity::SentenceLevel,
            n_sentences: self.n_sentences(),
            dim: self.dim(),
            token_counts: Vec::new(),
            layers: self
                .layers
                .iter()
                .map(|m| m.iter().map(|&v| v as f32).collect())
                .collect(),
        };
        let manifest = EmbeddingManifest {
            model_id: self.model_id.clone(),
            pooling: Pooling::Mean,
            layer_indices: (1..=self.n_layers() as u32).collect(),
            sentence_ids: self.sentence_ids.clone(),
            dim: Some(self.dim() as u32),
            tokenizer_fingerprint: None,
            created: None,
            truncated: Vec::new(),
        };
        (data, manifest)
    }

    /// Build a store from a decoded file, pooling token rows by mean.
    pub fn from_qemb(data: &QembData, manifest: &EmbeddingManifest) -> Result<Self> {
        check_manifest(data, manifest)?;
        let layers = data
            .layers
            .iter()
            .map(|block| pool_block(data, block))
            .collect::<Result<Vec<_>>>()?;
        let mut store = EmbeddingStore::new(&manifest.model_id, manifest.sentence_ids.clone(), layers)?;
        store.granularity = data.granularity;
        Ok(store)
    }
}

fn check_manifest(data: &QembData, manifest: &EmbeddingManifest) -> Result<()> {
    let mismatch = |m: String| Error::InvalidInput(format!("manifest does not match QEMB header: {m}"));
    if manifest.sentence_ids.len() != data.n_sentences {
        return Err(mismatch(format!(
            "{} sentence ids, header says {}",
            manifest.sentence_ids.len(),
            data.n_sentences
        )));
    }
    if manifest.layer_indices.len() != data.layers.len() {
        return Err(mismatch(format!(
            "{} layer indices, header says {}",
            manifest.layer_indices.len(),
            data.layers.len()
        )));
    }
    let expected: Vec<u32> = (1..=data.layers.len() as u32).collect();
    if manifest.layer_indices != expected {
        return Err(mismatch("layer indices must be 1..=n_layers in order".into()));
    }
    if let Some(d) = manifest.dim {
        if d as usize != data.dim {
            return Err(mismatch(format!("dim {d}, header says {}", data.dim)));
        }
    }
    Ok(())
}

fn pool_block(data: &QembData, block: &[f32]) -> Result<Array2<f64>> {
    let dim = data.dim;
    let mut out = Array2::zeros((data.n_sentences, dim));
    match data.granularity {
        Granularity::SentenceLevel => {
            for (o, &v) in out.iter_mut().zip(block) {
                *o = v as f64;
            }
        }
        Granularity::TokenLevel => {
            let mut start = 0;
            for (s, &count) in data.token_counts.iter().enumerate() {
                let count = count as usize;
                let rows: Vec<Vec<f64>> = (start..start + count)
                    .map(|r| block[r * dim..(r + 1) * dim].iter().map(|&v| v as f64).collect())
                    .collect();
                let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
                out.row_mut(s).assign(&Array1::from(mean_pool(&refs)?));
                start += count;
            }
        }
    }
    Ok(out)
}

pub fn save_embeddings(path: &Path, data: &QembData, manifest: &EmbeddingManifest) -> Result<()> {
    check_manifest(data, manifest)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_qemb(BufWriter::new(file), data)?;
    let mpath = manifest_path(path);
    std::fs::write(&mpath, serde_json::to_string_pretty(manifest)?).map_err(|e| Error::io(&mpath, e))
}

/// Read a QEMB file and its manifest, validate both and pool to sentence
/// level.
pub fn load_embeddings(path: &Path) -> Result<EmbeddingStore> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let data = read_qemb(BufReader::new(file))?;
    let mpath = manifest_path(path);
    let text = std::fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: EmbeddingManifest = serde_json::from_str(&text)?;
    EmbeddingStore::from_qemb(&data, &manifest)
}
