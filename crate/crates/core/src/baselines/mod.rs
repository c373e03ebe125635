//! Text baselines over TF-IDF features: a dummy predictor, linear models and
//! gradient-boosted trees.

mod dummy;
mod dump;
mod gbt;
mod linear;
mod sparse;

pub use dummy::{fit_dummy, predict_dummy, DummyModel};
pub use dump::{BaselineModel, ModelDump, DUMP_FORMAT_VERSION};
pub use gbt::{fit_gbt, fit_gbt_traced, predict_gbt, GbtFit, GbtModel, GbtParams, Node, Tree};
pub use linear::{
    fit_logistic, fit_logistic_traced, fit_ridge, logistic_gradient, logistic_objective,
    ridge_residual, sigmoid, LinearModel, LogisticFit, LogisticParams,
};
pub use sparse::SparseMatrix;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::TaskKind;

pub const DEFAULT_RIDGE_LAMBDA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Dummy,
    Linear,
    Gbt,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Dummy => "dummy",
            BaselineKind::Linear => "linear",
            BaselineKind::Gbt => "gbt",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dummy" => Ok(BaselineKind::Dummy),
            "linear" => Ok(BaselineKind::Linear),
            "gbt" => Ok(BaselineKind::Gbt),
            other => Err(Error::Config(format!("unknown baseline model {other:?}"))),
        }
    }
}

/// Fit with default hyperparameters: logistic regression or ridge for
/// `Linear`, depending on the task.
pub fn fit_baseline(
    kind: BaselineKind,
    x: &SparseMatrix,
    y: &[f64],
    task: TaskKind,
) -> Result<BaselineModel> {
    if x.n_rows() != y.len() {
        return Err(Error::Shape(format!("{} rows but {} labels", x.n_rows(), y.len())));
    }
    Ok(match kind {
        BaselineKind::Dummy => BaselineModel::Dummy(fit_dummy(y, task)?),
        BaselineKind::Linear => BaselineModel::Linear(match task {
            TaskKind::Classification => fit_logistic(x, y, LogisticParams::default_for(y.len()))?,
            TaskKind::Regression => fit_ridge(x, y, DEFAULT_RIDGE_LAMBDA)?,
        }),
        BaselineKind::Gbt => BaselineModel::Gbt(fit_gbt(x, y, task, GbtParams::default())?),
    })
}

/// Probabilities for classification, values for regression.
pub fn predict_baseline(model: &BaselineModel, x: &SparseMatrix) -> Result<Vec<f64>> {
    match model {
        BaselineModel::Dummy(m) => Ok(predict_dummy(m, x.n_rows())),
        BaselineModel::Linear(m) => m.predict(x),
        BaselineModel::Gbt(m) => predict_gbt(m, x),
    }
}
