//! Layer-wise MLP probes over frozen sentence embeddings.

mod mlp;
mod store;

pub use mlp::{Adam, AdamParams, Dense, Mlp, INIT_SCHEME};
pub use store::{
    load_embeddings, manifest_path, mean_pool, read_qemb, save_embeddings, write_qemb,
    EmbeddingManifest, EmbeddingStore, Granularity, Pooling, QembData, QEMB_MAGIC, QEMB_VERSION,
};

use std::path::Path;

use ndarray::{Array1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::runner::{derive_seed, evaluate, SplitIndices};
use crate::selectivity::LabelVariant;
use crate::TaskKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub task: TaskKind,
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub min_delta: f64,
    pub seed: u64,
}

impl ProbeConfig {
    /// Input→384→1 for classification, input→128→128→1 for regression.
    pub fn for_task(task: TaskKind) -> Self {
        ProbeConfig {
            task,
            hidden: match task {
                TaskKind::Classification => vec![384],
                TaskKind::Regression => vec![128, 128],
            },
            learning_rate: 1e-3,
            batch_size: 16,
            max_epochs: 100,
            patience: 5,
            min_delta: 1e-4,
            seed: 42,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::Config("probe hidden widths must be positive".into()));
        }
        if self.patience == 0 || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config(
                "probe patience, batch_size and max_epochs must be at least 1".into(),
            ));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 || self.min_delta < 0.0 {
            return Err(Error::Config("probe learning_rate must be positive and min_delta non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub config: ProbeConfig,
    pub init_scheme: String,
    pub mlp: Mlp,
    pub history: Vec<EpochRecord>,
    /// Number of epochs actually run.
    pub stopped_epoch: usize,
    /// Epoch whose parameters were restored.
    pub best_epoch: usize,
}

impl Probe {
    pub fn best_val_loss(&self) -> f64 {
        self.history
            .iter()
            .find(|h| h.epoch == self.best_epoch)
            .map_or(f64::NAN, |h| h.val_loss)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Train on `splits.train`, early-stop on `splits.val`.
///
/// Training stops once the validation loss has failed to improve on its
/// reference value by `min_delta` for `patience` consecutive epochs. The
/// parameters from the epoch with the lowest validation loss are restored.
pub fn train_probe(
    x: ArrayView2<f64>,
    labels: &[f64],
    splits: &SplitIndices,
    config: &ProbeConfig,
) -> Result<Probe> {
    config.validate()?;
    if x.nrows() != labels.len() {
        return Err(Error::Shape(format!(
            "{} embedding rows but {} labels",
            x.nrows(),
            labels.len()
        )));
    }
    if splits.train.is_empty() || splits.val.is_empty() {
        return Err(Error::InvalidInput("probe needs non-empty train and val splits".into()));
    }
    if let Some(&i) = splits.all().find(|&&i| i >= labels.len()) {
        return Err(Error::InvalidInput(format!("split index {i} out of range")));
    }
    let x_train = x.select(Axis(0), &splits.train);
    let y_train = Array1::from_iter(splits.train.iter().map(|&i| labels[i]));
    let x_val = x.select(Axis(0), &splits.val);
    let y_val = Array1::from_iter(splits.val.iter().map(|&i| labels[i]));

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut mlp = Mlp::init(x.ncols(), &config.hidden, &mut rng);
    let mut opt = Adam::new(
        &mlp,
        AdamParams {
            learning_rate: config.learning_rate,
            ..AdamParams::default()
        },
    );
    let mut order: Vec<usize> = (0..splits.train.len()).collect();
    let mut history = Vec::new();
    let mut best = (f64::INFINITY, 0usize, mlp.clone());
    let mut reference = f64::INFINITY;
    let mut waited = 0;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let xb = x_train.select(Axis(0), batch);
            let yb = Array1::from_iter(batch.iter().map(|&i| y_train[i]));
            let (loss, grads) = mlp.loss_and_grad(xb.view(), yb.view(), config.task);
            if !loss.is_finite() {
                return Err(Error::Divergence(format!("non-finite training loss at epoch {epoch}")));
            }
            total += loss * batch.len() as f64;
            opt.update(&mut mlp, &grads);
        }
        let train_loss = total / order.len() as f64;
        let val_loss = mlp.loss(x_val.view(), y_val.view(), config.task);
        if !val_loss.is_finite() {
            return Err(Error::Divergence(format!("non-finite validation loss at epoch {epoch}")));
        }
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        if val_loss < best.0 {
            best = (val_loss, epoch, mlp.clone());
        }
        if val_loss < reference - config.min_delta {
            reference = val_loss;
            waited = 0;
        } else {
            waited += 1;
            if waited >= config.patience {
                break;
            }
        }
    }
    let stopped_epoch = history.len();
    Ok(Probe {
        config: config.clone(),
        init_scheme: INIT_SCHEME.to_string(),
        mlp: best.2,
        history,
        stopped_epoch,
        best_epoch: best.1,
    })
}

/// Probabilities in (0, 1) for classification probes, values for regression.
pub fn probe_predict(probe: &Probe, x: ArrayView2<f64>) -> Result<Vec<f64>> {
    if x.ncols() != probe.mlp.input_dim() {
        return Err(Error::Shape(format!(
            "probe expects dimension {}, got {}",
            probe.mlp.input_dim(),
            x.ncols()
        )));
    }
    let out = probe.mlp.forward(x);
    Ok(match probe.config.task {
        TaskKind::Classification => out.iter().map(|&z| crate::baselines::sigmoid(z)).collect(),
        TaskKind::Regression => out.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerResult {
    pub layer: usize,
    pub variant: String,
    /// Test accuracy (percent) or MSE, against the variant's own labels.
    pub metric: f64,
    pub stopped_epoch: usize,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

/// Train one probe per (layer, label variant) on the shared splits and score
/// it on the test split. Results come back ordered by layer, then by variant
/// in input order.
pub fn layer_sweep(
    store: &EmbeddingStore,
    variants: &[LabelVariant],
    splits: &SplitIndices,
    config: &ProbeConfig,
) -> Result<Vec<LayerResult>> {
    let jobs: Vec<(usize, &LabelVariant)> = (1..=store.n_layers())
        .flat_map(|l| variants.iter().map(move |v| (l, v)))
        .collect();
    let results: Vec<Result<LayerResult>> = jobs
        .par_iter()
        .map(|&(layer, variant)| {
            run_layer(store, layer, variant, splits, config).map_err(|e| Error::Layer {
                layer,
                source: Box::new(e),
            })
        })
        .collect();
    results.into_iter().collect()
}

fn run_layer(
    store: &EmbeddingStore,
    layer: usize,
    variant: &LabelVariant,
    splits: &SplitIndices,
    config: &ProbeConfig,
) -> Result<LayerResult> {
    let x = store.layer(layer)?;
    let cfg = ProbeConfig {
        seed: derive_seed(config.seed, &format!("layer={layer}/variant={}", variant.name())),
        ..config.clone()
    };
    let probe = train_probe(x, &variant.labels, splits, &cfg)?;
    let x_test = x.select(Axis(0), &splits.test);
    let pred = probe_predict(&probe, x_test.view())?;
    let y_test: Vec<f64> = splits.test.iter().map(|&i| variant.labels[i]).collect();
    Ok(LayerResult {
        layer,
        variant: variant.name(),
        metric: evaluate(&pred, &y_test, config.task)?,
        stopped_epoch: probe.stopped_epoch,
        best_epoch: probe.best_epoch,
        history: probe.history,
    })
}
