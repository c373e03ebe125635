//! Shuffled-label control tasks and selectivity scores.
//!
//! Classification: `S = (acc_real − acc_control) / acc_control`.
//! Regression: `S = (mse_control − mse_real) / mse_control`.
//! Both are positive when the real-label run beats its control.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::TaskKind;

pub const DEFAULT_CONTROL_SEEDS: [u64; 3] = [11, 22, 33];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantKind {
    Real,
    Control,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelVariant {
    pub kind: VariantKind,
    pub control_seed: Option<u64>,
    pub labels: Vec<f64>,
}

impl LabelVariant {
    pub fn real(labels: Vec<f64>) -> Self {
        LabelVariant {
            kind: VariantKind::Real,
            control_seed: None,
            labels,
        }
    }

    /// `real` or `control-<seed>`.
    pub fn name(&self) -> String {
        match self.control_seed {
            Some(seed) if self.kind == VariantKind::Control => format!("control-{seed}"),
            _ => "real".to_string(),
        }
    }
}

/// Seeded uniform permutation of `0..n`; control label `i` is real label
/// `perm[i]`.
pub fn control_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    perm
}

/// One permuted copy of the full label vector per seed.
pub fn make_controls(labels: &[f64], seeds: &[u64]) -> Result<Vec<LabelVariant>> {
    if labels.is_empty() {
        return Err(Error::InvalidInput("cannot build controls for zero labels".into()));
    }
    if seeds.is_empty() {
        return Err(Error::Config("at least one control seed is required".into()));
    }
    let mut seen = BTreeSet::new();
    if let Some(dup) = seeds.iter().find(|s| !seen.insert(**s)) {
        return Err(Error::Config(format!("duplicate control seed {dup}")));
    }
    Ok(seeds
        .iter()
        .map(|&seed| LabelVariant {
            kind: VariantKind::Control,
            control_seed: Some(seed),
            labels: control_permutation(labels.len(), seed)
                .into_iter()
                .map(|i| labels[i])
                .collect(),
        })
        .collect())
}

/// Real labels followed by one control per seed.
pub fn label_variants(labels: &[f64], seeds: &[u64]) -> Result<Vec<LabelVariant>> {
    let mut out = vec![LabelVariant::real(labels.to_vec())];
    out.extend(make_controls(labels, seeds)?);
    Ok(out)
}

/// Accuracies in percent.
pub fn selectivity_cls(acc_real: f64, acc_control: f64) -> Result<f64> {
    if acc_control == 0.0 {
        return Err(Error::UndefinedScore("control accuracy is 0".into()));
    }
    Ok((acc_real - acc_control) / acc_control)
}

pub fn selectivity_reg(mse_real: f64, mse_control: f64) -> Result<f64> {
    if mse_control == 0.0 {
        return Err(Error::UndefinedScore("control MSE is 0".into()));
    }
    Ok((mse_control - mse_real) / mse_control)
}

pub fn selectivity(task: TaskKind, real: f64, control: f64) -> Result<f64> {
    match task {
        TaskKind::Classification => selectivity_cls(real, control),
        TaskKind::Regression => selectivity_reg(real, control),
    }
}

pub fn mean_selectivity(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::InvalidInput("mean selectivity of no scores".into()));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectivityScore {
    pub task: TaskKind,
    pub real_metric: f64,
    pub control_metrics: Vec<f64>,
    /// One score per control variant.
    pub scores: Vec<f64>,
    pub mean: f64,
}

impl SelectivityScore {
    /// Score every control against the real run, then average the scores.
    pub fn compute(task: TaskKind, real_metric: f64, control_metrics: &[f64]) -> Result<Self> {
        let scores = control_metrics
            .iter()
            .map(|&c| selectivity(task, real_metric, c))
            .collect::<Result<Vec<_>>>()?;
        Ok(SelectivityScore {
            task,
            real_metric,
            control_metrics: control_metrics.to_vec(),
            mean: mean_selectivity(&scores)?,
            scores,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic() {
        assert_eq!(selectivity_cls(60.0, 60.0).unwrap(), 0.0);
        assert_eq!(selectivity_reg(0.2, 0.2).unwrap(), 0.0);
        assert!(matches!(selectivity_cls(50.0, 0.0), Err(Error::UndefinedScore(_))));
        assert!(matches!(selectivity_reg(0.1, 0.0), Err(Error::UndefinedScore(_))));
        assert_eq!(selectivity_reg(0.0, 0.4).unwrap(), 1.0);
        assert_eq!(mean_selectivity(&[0.5]).unwrap(), 0.5);
        assert!((mean_selectivity(&[0.2, 0.4, 0.6]).unwrap() - 0.4).abs() < 1e-15);
        assert!(mean_selectivity(&[]).is_err());
    }

    #[test]
    fn controls_are_permutations() {
        let labels: Vec<f64> = (0..50).map(|i| (i % 3) as f64).collect();
        let controls = make_controls(&labels, &DEFAULT_CONTROL_SEEDS).unwrap();
        assert_eq!(controls.len(), 3);
        let sorted = |v: &[f64]| {
            let mut s = v.to_vec();
            s.sort_by(f64::total_cmp);
            s
        };
        for c in &controls {
            assert_eq!(sorted(&c.labels), sorted(&labels));
        }
        assert_eq!(controls[0].name(), "control-11");
        assert!(make_controls(&labels, &[5, 5]).is_err());
        assert!(make_controls(&[], &[1]).is_err());
        assert_eq!(make_controls(&labels, &[7]).unwrap(), make_controls(&labels, &[7]).unwrap());
    }

    #[test]
    fn per_variant_scores_are_averaged() {
        let s = SelectivityScore::compute(TaskKind::Classification, 90.0, &[45.0, 60.0, 50.0]).unwrap();
        let expected = (1.0 + 0.5 + 0.8) / 3.0;
        assert!((s.mean - expected).abs() < 1e-12);
    }
}
