//! Gradient-boosted regression trees over sparse features.
//!
//! Split search walks each column's non-zero entries and treats all implicit
//! zeros of a node as one group. Thresholds are midpoints between adjacent
//! distinct values and `x <= threshold` goes left.

use serde::{Deserialize, Serialize};

use super::sparse::SparseMatrix;
use super::linear::sigmoid;
use crate::error::{Error, Result};
use crate::TaskKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtParams {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            n_rounds: 200,
            max_depth: 3,
            learning_rate: 0.1,
            min_samples_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Node 0 is the root.
    pub nodes: Vec<Node>,
}

impl Tree {
    fn predict_row(&self, x: &SparseMatrix, r: usize) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x.get(r, feature) <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, at: usize) -> usize {
            match t.nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(t, left).max(walk(t, right)),
            }
        }
        walk(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub task: TaskKind,
    pub params: GbtParams,
    pub base_score: f64,
    pub n_features: usize,
    pub trees: Vec<Tree>,
    /// Total split gain per feature.
    pub feature_gain: Vec<f64>,
}

impl GbtModel {
    /// Additive raw score (log-odds for classification).
    pub fn raw_scores(&self, x: &SparseMatrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.n_features {
            return Err(Error::Shape(format!(
                "model expects {} features, input has {}",
                self.n_features,
                x.n_cols()
            )));
        }
        Ok((0..x.n_rows())
            .map(|r| {
                self.base_score
                    + self.params.learning_rate
                        * self.trees.iter().map(|t| t.predict_row(x, r)).sum::<f64>()
            })
            .collect())
    }
}

/// Probabilities for classification, values for regression.
pub fn predict_gbt(model: &GbtModel, x: &SparseMatrix) -> Result<Vec<f64>> {
    let raw = model.raw_scores(x)?;
    Ok(match model.task {
        TaskKind::Classification => raw.into_iter().map(sigmoid).collect(),
        TaskKind::Regression => raw,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbtFit {
    pub model: GbtModel,
    /// Training loss before the first tree and after each round
    /// (MSE or mean log-loss).
    pub train_loss: Vec<f64>,
}

pub fn fit_gbt(x: &SparseMatrix, y: &[f64], task: TaskKind, params: GbtParams) -> Result<GbtModel> {
    fit_gbt_traced(x, y, task, params).map(|f| f.model)
}

pub fn fit_gbt_traced(
    x: &SparseMatrix,
    y: &[f64],
    task: TaskKind,
    params: GbtParams,
) -> Result<GbtFit> {
    if x.n_rows() != y.len() {
        return Err(Error::Shape(format!("{} rows but {} targets", x.n_rows(), y.len())));
    }
    if y.is_empty() {
        return Err(Error::InvalidInput("boosting needs at least one sample".into()));
    }
    if params.learning_rate <= 0.0 || params.min_samples_leaf == 0 {
        return Err(Error::InvalidInput(
            "learning_rate must be positive and min_samples_leaf at least 1".into(),
        ));
    }
    if task == TaskKind::Classification && y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidInput("classification labels must be 0 or 1".into()));
    }
    let n = y.len();
    let base_score = match task {
        TaskKind::Regression => y.iter().sum::<f64>() / n as f64,
        TaskKind::Classification => {
            let p = (y.iter().sum::<f64>() / n as f64).clamp(1e-6, 1.0 - 1e-6);
            (p / (1.0 - p)).ln()
        }
    };
    let columns = x.columns();
    let mut raw = vec![base_score; n];
    let mut feature_gain = vec![0.0; x.n_cols()];
    let mut trees = Vec::with_capacity(params.n_rounds);
    let mut train_loss = vec![loss(task, y, &raw)];

    for _ in 0..params.n_rounds {
        let (grad, hess): (Vec<f64>, Vec<f64>) = match task {
            TaskKind::Regression => y.iter().zip(&raw).map(|(t, f)| (t - f, 1.0)).unzip(),
            TaskKind::Classification => y
                .iter()
                .zip(&raw)
                .map(|(t, f)| {
                    let p = sigmoid(*f);
                    (t - p, p * (1.0 - p))
                })
                .unzip(),
        };
        let builder = TreeBuilder {
            columns: &columns,
            grad: &grad,
            hess: &hess,
            params: &params,
        };
        let rows: Vec<usize> = (0..n).collect();
        let mut tree = Tree { nodes: Vec::new() };
        builder.grow(&mut tree, &rows, 0, &mut feature_gain);
        for (r, f) in raw.iter_mut().enumerate() {
            *f += params.learning_rate * tree.predict_row(x, r);
        }
        trees.push(tree);
        train_loss.push(loss(task, y, &raw));
    }
    Ok(GbtFit {
        model: GbtModel {
            task,
            params,
            base_score,
            n_features: x.n_cols(),
            trees,
            feature_gain,
        },
        train_loss,
    })
}

fn loss(task: TaskKind, y: &[f64], raw: &[f64]) -> f64 {
    let n = y.len() as f64;
    match task {
        TaskKind::Regression => y.iter().zip(raw).map(|(t, f)| (t - f).powi(2)).sum::<f64>() / n,
        TaskKind::Classification => {
            y.iter()
                .zip(raw)
                .map(|(t, f)| {
                    let sp = if *f > 0.0 { f + (-f).exp().ln_1p() } else { f.exp().ln_1p() };
                    sp - t * f
                })
                .sum::<f64>()
                / n
        }
    }
}

struct TreeBuilder<'a> {
    columns: &'a [Vec<(usize, f64)>],
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a GbtParams,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

const HESS_FLOOR: f64 = 1e-12;

fn score(g: f64, h: f64) -> f64 {
    g * g / h.max(HESS_FLOOR)
}

impl TreeBuilder<'_> {
    fn grow(&self, tree: &mut Tree, rows: &[usize], depth: usize, gains: &mut [f64]) -> usize {
        let at = tree.nodes.len();
        let g: f64 = rows.iter().map(|&r| self.grad[r]).sum();
        let h: f64 = rows.iter().map(|&r| self.hess[r]).sum();
        tree.nodes.push(Node::Leaf {
            value: g / h.max(HESS_FLOOR),
        });
        if depth >= self.params.max_depth || rows.len() < 2 * self.params.min_samples_leaf {
            return at;
        }
        let Some(best) = self.best_split(rows, g, h) else {
            return at;
        };
        gains[best.feature] += best.gain;
        let col = &self.columns[best.feature];
        let (left, right): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| {
            let v = col
                .binary_search_by_key(&r, |&(i, _)| i)
                .map_or(0.0, |k| col[k].1);
            v <= best.threshold
        });
        let l = self.grow(tree, &left, depth + 1, gains);
        let r = self.grow(tree, &right, depth + 1, gains);
        tree.nodes[at] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: l,
            right: r,
        };
        at
    }

    fn best_split(&self, rows: &[usize], g_total: f64, h_total: f64) -> Option<Candidate> {
        let n_rows = self.grad.len();
        let mut in_node = vec![false; n_rows];
        for &r in rows {
            in_node[r] = true;
        }
        let parent = score(g_total, h_total);
        let min_leaf = self.params.min_samples_leaf;
        let mut best: Option<Candidate> = None;

        for (feature, col) in self.columns.iter().enumerate() {
            // (value, grad sum, hess sum, count) groups in ascending value order
            let mut groups: Vec<(f64, f64, f64, usize)> = col
                .iter()
                .filter(|(r, _)| in_node[*r])
                .map(|&(r, v)| (v, self.grad[r], self.hess[r], 1))
                .collect();
            if groups.is_empty() {
                continue;
            }
            let nz_count = groups.len();
            let (nz_g, nz_h) = groups
                .iter()
                .fold((0.0, 0.0), |(a, b), &(_, g, h, _)| (a + g, b + h));
            if nz_count < rows.len() {
                groups.push((0.0, g_total - nz_g, h_total - nz_h, rows.len() - nz_count));
            }
            groups.sort_by(|a, b| a.0.total_cmp(&b.0));

            let mut gl = 0.0;
            let mut hl = 0.0;
            let mut nl = 0;
            for i in 0..groups.len() - 1 {
                gl += groups[i].1;
                hl += groups[i].2;
                nl += groups[i].3;
                if groups[i].0 == groups[i + 1].0 {
                    continue;
                }
                let nr = rows.len() - nl;
                if nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let gain = score(gl, hl) + score(g_total - gl, h_total - hl) - parent;
                if gain > 1e-12 && best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(Candidate {
                        feature,
                        threshold: 0.5 * (groups[i].0 + groups[i + 1].0),
                        gain,
                    });
                }
            }
        }
        best
    }
}
