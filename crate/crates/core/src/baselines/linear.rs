//! L2-regularized logistic regression (gradient descent with backtracking)
//! and closed-form ridge regression.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::sparse::SparseMatrix;
use crate::error::{Error, Result};
use crate::TaskKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub task: TaskKind,
    pub l2_lambda: f64,
}

impl LinearModel {
    /// Raw scores `Xw + b`.
    pub fn decision(&self, x: &SparseMatrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.weights.len() {
            return Err(Error::Shape(format!(
                "model has {} weights, input has {} columns",
                self.weights.len(),
                x.n_cols()
            )));
        }
        Ok(x.mul_vec(&self.weights)
            .into_iter()
            .map(|s| s + self.intercept)
            .collect())
    }

    /// Probabilities for classification, values for regression.
    pub fn predict(&self, x: &SparseMatrix) -> Result<Vec<f64>> {
        let scores = self.decision(x)?;
        Ok(match self.task {
            TaskKind::Classification => scores.into_iter().map(sigmoid).collect(),
            TaskKind::Regression => scores,
        })
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub l2_lambda: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl LogisticParams {
    /// `l2_lambda = 1/n`, `tol = 1e-6`, `max_iter = 1000`.
    pub fn default_for(n: usize) -> Self {
        LogisticParams {
            l2_lambda: 1.0 / n.max(1) as f64,
            tol: 1e-6,
            max_iter: 1000,
        }
    }
}

/// Mean log-loss plus `(λ/2)‖w‖²`; the intercept is not penalized.
pub fn logistic_objective(x: &SparseMatrix, y: &[f64], w: &[f64], b: f64, lambda: f64) -> f64 {
    let z = x.mul_vec(w);
    let n = y.len() as f64;
    let loss: f64 = z
        .iter()
        .zip(y)
        .map(|(&zi, &yi)| softplus(zi + b) - yi * (zi + b))
        .sum::<f64>()
        / n;
    loss + 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>()
}

/// Gradient of [`logistic_objective`] as `(d/dw, d/db)`.
pub fn logistic_gradient(
    x: &SparseMatrix,
    y: &[f64],
    w: &[f64],
    b: f64,
    lambda: f64,
) -> (Vec<f64>, f64) {
    let n = y.len() as f64;
    let resid: Vec<f64> = x
        .mul_vec(w)
        .iter()
        .zip(y)
        .map(|(&zi, &yi)| (sigmoid(zi + b) - yi) / n)
        .collect();
    let mut gw = x.t_mul_vec(&resid);
    for (g, wi) in gw.iter_mut().zip(w) {
        *g += lambda * wi;
    }
    (gw, resid.iter().sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub model: LinearModel,
    /// Objective after every accepted step, starting with the initial point.
    pub objective: Vec<f64>,
    pub converged: bool,
}

pub fn fit_logistic(x: &SparseMatrix, y: &[f64], params: LogisticParams) -> Result<LinearModel> {
    fit_logistic_traced(x, y, params).map(|f| f.model)
}

pub fn fit_logistic_traced(x: &SparseMatrix, y: &[f64], params: LogisticParams) -> Result<LogisticFit> {
    if x.n_rows() != y.len() {
        return Err(Error::Shape(format!("{} rows but {} labels", x.n_rows(), y.len())));
    }
    if y.is_empty() {
        return Err(Error::InvalidInput("logistic regression needs at least one sample".into()));
    }
    if let Some(bad) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidInput(format!("labels must be 0 or 1, found {bad}")));
    }
    if params.l2_lambda < 0.0 {
        return Err(Error::InvalidInput("l2_lambda must be non-negative".into()));
    }
    let lambda = params.l2_lambda;
    let mut w = vec![0.0; x.n_cols()];
    let mut b = 0.0;
    let mut f = logistic_objective(x, y, &w, b, lambda);
    let mut trace = vec![f];
    let mut step = 1.0;
    let mut converged = false;

    for _ in 0..params.max_iter {
        let (gw, gb) = logistic_gradient(x, y, &w, b, lambda);
        let gnorm2 = gw.iter().map(|g| g * g).sum::<f64>() + gb * gb;
        if gnorm2.sqrt() < params.tol {
            converged = true;
            break;
        }
        // Armijo backtracking
        let mut accepted = false;
        for _ in 0..60 {
            let w_new: Vec<f64> = w.iter().zip(&gw).map(|(wi, g)| wi - step * g).collect();
            let b_new = b - step * gb;
            let f_new = logistic_objective(x, y, &w_new, b_new, lambda);
            if f_new <= f - 0.5 * step * gnorm2 {
                w = w_new;
                b = b_new;
                f = f_new;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        trace.push(f);
        step = (step * 2.0).min(1e4);
    }
    if !f.is_finite() {
        return Err(Error::Numerical("logistic objective is not finite".into()));
    }
    Ok(LogisticFit {
        model: LinearModel {
            weights: w,
            intercept: b,
            task: TaskKind::Classification,
            l2_lambda: lambda,
        },
        objective: trace,
        converged,
    })
}

/// Ridge regression with an unpenalized intercept.
///
/// Columns are centered implicitly and the system
/// `(XcᵀXc + λI) w = Xcᵀ(y − ȳ)` is solved by Cholesky, in the primal when
/// there are no more features than samples and through the equivalent dual
/// `w = Xcᵀ (XcXcᵀ + λI)⁻¹ (y − ȳ)` otherwise. The intercept is `ȳ − x̄·w`.
pub fn fit_ridge(x: &SparseMatrix, y: &[f64], l2_lambda: f64) -> Result<LinearModel> {
    if x.n_rows() != y.len() {
        return Err(Error::Shape(format!("{} rows but {} targets", x.n_rows(), y.len())));
    }
    if y.is_empty() {
        return Err(Error::InvalidInput("ridge regression needs at least one sample".into()));
    }
    if l2_lambda < 0.0 {
        return Err(Error::InvalidInput("l2_lambda must be non-negative".into()));
    }
    let n = y.len();
    let v = x.n_cols();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let yc: Vec<f64> = y.iter().map(|t| t - y_mean).collect();
    let x_mean = x.col_means();

    let weights = if v <= n {
        let xty = centered_t_mul(x, &x_mean, &yc);
        let mut a = DMatrix::<f64>::zeros(v, v);
        for r in 0..n {
            let row = x.row(r);
            for &(i, vi) in row {
                for &(j, vj) in row {
                    a[(i, j)] += vi * vj;
                }
            }
        }
        for i in 0..v {
            for j in 0..v {
                a[(i, j)] -= n as f64 * x_mean[i] * x_mean[j];
            }
            a[(i, i)] += l2_lambda;
        }
        let chol = a
            .cholesky()
            .ok_or_else(|| Error::Numerical("ridge system is not positive definite".into()))?;
        chol.solve(&DVector::from_vec(xty)).as_slice().to_vec()
    } else {
        // dual: Gram matrix of centered rows
        let mean_dots: Vec<f64> = (0..n)
            .map(|r| x.row(r).iter().map(|&(c, val)| val * x_mean[c]).sum())
            .collect();
        let mean_sq: f64 = x_mean.iter().map(|m| m * m).sum();
        let mut k = DMatrix::<f64>::zeros(n, n);
        let mut dense = vec![0.0; v];
        for i in 0..n {
            for &(c, val) in x.row(i) {
                dense[c] = val;
            }
            for j in i..n {
                let dot: f64 = x.row(j).iter().map(|&(c, val)| val * dense[c]).sum();
                let kij = dot - mean_dots[i] - mean_dots[j] + mean_sq;
                k[(i, j)] = kij;
                k[(j, i)] = kij;
            }
            for &(c, _) in x.row(i) {
                dense[c] = 0.0;
            }
            k[(i, i)] += l2_lambda;
        }
        let chol = k
            .cholesky()
            .ok_or_else(|| Error::Numerical("ridge dual system is not positive definite".into()))?;
        let alpha = chol.solve(&DVector::from_vec(yc));
        centered_t_mul(x, &x_mean, alpha.as_slice())
    };
    let intercept = y_mean - weights.iter().zip(&x_mean).map(|(w, m)| w * m).sum::<f64>();
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Numerical("ridge weights are not finite".into()));
    }
    Ok(LinearModel {
        weights,
        intercept,
        task: TaskKind::Regression,
        l2_lambda,
    })
}

/// `Xcᵀ r` where `Xc = X − 1 x̄ᵀ`.
fn centered_t_mul(x: &SparseMatrix, x_mean: &[f64], r: &[f64]) -> Vec<f64> {
    let total: f64 = r.iter().sum();
    let mut out = x.t_mul_vec(r);
    for (o, m) in out.iter_mut().zip(x_mean) {
        *o -= m * total;
    }
    out
}

/// Infinity norm of `(XcᵀXc + λI) w − Xcᵀ(y − ȳ)` for a fitted ridge model,
/// together with a scale for relative comparisons.
pub fn ridge_residual(x: &SparseMatrix, y: &[f64], model: &LinearModel) -> (f64, f64) {
    let n = y.len() as f64;
    let y_mean = y.iter().sum::<f64>() / n;
    let yc: Vec<f64> = y.iter().map(|t| t - y_mean).collect();
    let x_mean = x.col_means();
    let w = &model.weights;
    let mean_w: f64 = x_mean.iter().zip(w).map(|(m, wi)| m * wi).sum();
    let xc_w: Vec<f64> = x.mul_vec(w).iter().map(|v| v - mean_w).collect();
    let lhs: Vec<f64> = centered_t_mul(x, &x_mean, &xc_w)
        .iter()
        .zip(w)
        .map(|(a, wi)| a + model.l2_lambda * wi)
        .collect();
    let rhs = centered_t_mul(x, &x_mean, &yc);
    let resid = lhs
        .iter()
        .zip(&rhs)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let inf = |v: &[f64]| v.iter().map(|a| a.abs()).fold(0.0, f64::max);
    let scale = 1.0f64.max(inf(&rhs)).max(inf(&lhs));
    (resid, scale)
}
