use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::TaskKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "statistic")]
pub enum DummyModel {
    MajorityClass(f64),
    MeanValue(f64),
}

/// Majority class (ties go to 0) or mean of the training labels.
pub fn fit_dummy(labels: &[f64], task: TaskKind) -> Result<DummyModel> {
    if labels.is_empty() {
        return Err(Error::InvalidInput("dummy model needs at least one label".into()));
    }
    Ok(match task {
        TaskKind::Classification => {
            let ones = labels.iter().filter(|&&y| y >= 0.5).count();
            let zeros = labels.len() - ones;
            DummyModel::MajorityClass(if ones > zeros { 1.0 } else { 0.0 })
        }
        TaskKind::Regression => {
            DummyModel::MeanValue(labels.iter().sum::<f64>() / labels.len() as f64)
        }
    })
}

pub fn predict_dummy(model: &DummyModel, n: usize) -> Vec<f64> {
    let v = match *model {
        DummyModel::MajorityClass(c) => c,
        DummyModel::MeanValue(m) => m,
    };
    vec![v; n]
}
