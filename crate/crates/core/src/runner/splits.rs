use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::TaskKind;

/// Train/val/test shares in percent.
pub const SPLIT_PERCENT: [usize; 3] = [70, 15, 15];

/// Row indices into the aligned data for each split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
    pub stratified: bool,
}

impl SplitIndices {
    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn all(&self) -> impl Iterator<Item = &usize> {
        self.train.iter().chain(&self.val).chain(&self.test)
    }
}

/// Seeded shuffle of `0..n`, then `train = ⌊0.70n⌋`, `val = ⌊0.15n⌋` and the
/// remainder for test.
///
/// With `strata`, each class is shuffled on its own and the classes are
/// interleaved by relative rank, so every split keeps roughly the class
/// proportions while the split sizes stay exactly as above.
pub fn make_splits(n: usize, seed: u64, strata: Option<&[f64]>) -> Result<SplitIndices> {
    if n < 3 {
        return Err(Error::InvalidInput(format!("need at least 3 items to split, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order: Vec<usize> = match strata {
        None => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            order
        }
        Some(labels) => {
            if labels.len() != n {
                return Err(Error::Shape(format!("{} strata labels for {n} items", labels.len())));
            }
            let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
            for (i, y) in labels.iter().enumerate() {
                groups.entry(y.to_bits()).or_default().push(i);
            }
            let mut keyed = Vec::with_capacity(n);
            for (g, (_, mut members)) in groups.into_iter().enumerate() {
                members.shuffle(&mut rng);
                let size = members.len() as f64;
                for (rank, i) in members.into_iter().enumerate() {
                    keyed.push(((rank as f64 + 0.5) / size, g, i));
                }
            }
            keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            keyed.into_iter().map(|(_, _, i)| i).collect()
        }
    };
    let n_train = n * SPLIT_PERCENT[0] / 100;
    let n_val = n * SPLIT_PERCENT[1] / 100;
    Ok(SplitIndices {
        train: order[..n_train].to_vec(),
        val: order[n_train..n_train + n_val].to_vec(),
        test: order[n_train + n_val..].to_vec(),
        seed,
        stratified: strata.is_some(),
    })
}

/// Accuracy in percent (`p >= 0.5` counts as class 1) or mean squared error.
pub fn evaluate(predictions: &[f64], labels: &[f64], task: TaskKind) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::InvalidInput("cannot evaluate on zero items".into()));
    }
    let n = labels.len() as f64;
    Ok(match task {
        TaskKind::Classification => {
            let hits = predictions
                .iter()
                .zip(labels)
                .filter(|(&p, &y)| (if p >= 0.5 { 1.0 } else { 0.0 }) == y)
                .count();
            100.0 * hits as f64 / n
        }
        TaskKind::Regression => {
            predictions
                .iter()
                .zip(labels)
                .map(|(p, y)| (p - y).powi(2))
                .sum::<f64>()
                / n
        }
    })
}

/// Stable 64-bit seed from a base seed and a string key.
pub fn derive_seed(base: u64, key: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update(key.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}
