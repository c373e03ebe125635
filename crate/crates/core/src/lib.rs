//! Probing multilingual encoders for question type and linguistic complexity.
//!
//! The crate covers the whole pipeline: reading dependency-parsed corpora,
//! computing sentence complexity metrics, rule-based question labelling,
//! TF-IDF text baselines, MLP probes over frozen layer embeddings, control
//! tasks with selectivity, an experiment runner and table rendering.

pub mod annotator;
pub mod baselines;
pub mod corpus;
pub mod error;
pub mod features;
pub mod metrics;
pub mod probes;
pub mod report;
pub mod runner;
pub mod selectivity;
pub mod synthetic;

pub use error::{Error, Result};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Classification,
    Regression,
}
