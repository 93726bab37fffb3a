//! L2-regularized multinomial logistic regression.
//!
//! Minimizes `Σ_i −log softmax(W x_i + b)[y_i] + ‖W‖² / (2C)` with the
//! intercepts unpenalized, using L-BFGS with backtracking line search.

use serde::{Deserialize, Serialize};

use super::design::{DesignMatrix, RowView};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LogisticOptions {
    pub max_iterations: usize,
    /// Stop once the gradient ∞-norm drops below this.
    pub gradient_tolerance: f64,
    pub memory: usize,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        LogisticOptions {
            max_iterations: 1000,
            gradient_tolerance: 1e-6,
            memory: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FitReport {
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
    pub objective: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MultinomialLogisticModel {
    /// One row of length `d` per class, in `class_order`.
    pub class_weights: Vec<Vec<f64>>,
    pub class_intercepts: Vec<f64>,
    pub inverse_regularization: f64,
    /// Caller's class ids, ascending; probabilities follow this order.
    pub class_order: Vec<usize>,
    pub fit: FitReport,
}

impl MultinomialLogisticModel {
    /// Model with all parameters zero: uniform probabilities everywhere.
    pub fn zero(dim: usize, class_order: Vec<usize>, inverse_regularization: f64) -> Self {
        let k = class_order.len();
        MultinomialLogisticModel {
            class_weights: vec![vec![0.0; dim]; k],
            class_intercepts: vec![0.0; k],
            inverse_regularization,
            class_order,
            fit: FitReport {
                iterations: 0,
                gradient_norm: 0.0,
                converged: true,
                objective: 0.0,
            },
        }
    }

    pub fn n_classes(&self) -> usize {
        self.class_order.len()
    }

    pub fn dim(&self) -> usize {
        self.class_weights.first().map_or(0, Vec::len)
    }

    pub fn logits(&self, row: RowView<'_>) -> Vec<f64> {
        self.class_weights
            .iter()
            .zip(&self.class_intercepts)
            .map(|(w, b)| b + row.dot(w))
            .collect()
    }

    pub fn predict_proba(&self, row: RowView<'_>) -> Vec<f64> {
        softmax(&self.logits(row))
    }

    /// Position in `class_order` of the most probable class, first on ties.
    pub fn predict_class_position(&self, row: RowView<'_>) -> usize {
        let z = self.logits(row);
        let mut best = 0;
        for (k, v) in z.iter().enumerate() {
            if *v > z[best] {
                best = k;
            }
        }
        best
    }

    /// Mean negative log-likelihood; probabilities are floored at 1e-15.
    pub fn mean_log_loss(&self, x: &DesignMatrix, labels: &[usize]) -> f64 {
        let n = x.n_rows();
        let total: f64 = (0..n)
            .map(|i| {
                let p = self.predict_proba(x.row(i));
                let k = self.class_order.iter().position(|&c| c == labels[i]);
                -k.map_or(1e-15, |k| p[k].max(1e-15)).ln()
            })
            .sum();
        total / n as f64
    }

    fn to_params(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self.class_weights.concat();
        p.extend_from_slice(&self.class_intercepts);
        p
    }
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// The penalized negative log-likelihood as a function of the flat
/// parameter vector `[W (row-major, K×d), b (K)]`.
pub struct LogisticObjective<'a> {
    x: &'a DesignMatrix,
    /// Position of each label in the class order.
    targets: Vec<usize>,
    classes: usize,
    inverse_regularization: f64,
}

impl<'a> LogisticObjective<'a> {
    pub fn new(x: &'a DesignMatrix, labels: &[usize], inverse_regularization: f64) -> Result<(Self, Vec<usize>)> {
        if x.n_rows() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "logistic: {} rows but {} labels",
                x.n_rows(),
                labels.len()
            )));
        }
        if !(inverse_regularization.is_finite() && inverse_regularization > 0.0) {
            return Err(Error::InvalidInput("logistic C must be positive and finite".into()));
        }
        if let DesignMatrix::Dense { data, .. } = x {
            if data.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("logistic features"));
            }
        }
        let mut order: Vec<usize> = labels.to_vec();
        order.sort_unstable();
        order.dedup();
        if order.len() < 2 {
            return Err(Error::SingleClass);
        }
        let targets = labels
            .iter()
            .map(|l| order.binary_search(l).expect("label in class order"))
            .collect();
        Ok((
            LogisticObjective {
                x,
                targets,
                classes: order.len(),
                inverse_regularization,
            },
            order,
        ))
    }

    pub fn n_params(&self) -> usize {
        self.classes * (self.x.n_cols() + 1)
    }

    pub fn value_and_gradient(&self, params: &[f64]) -> (f64, Vec<f64>) {
        let d = self.x.n_cols();
        let k = self.classes;
        let (w, b) = params.split_at(k * d);
        let mut grad = vec![0.0; params.len()];
        let mut value = 0.0;
        let mut z = vec![0.0; k];
        for i in 0..self.x.n_rows() {
            let row = self.x.row(i);
            for c in 0..k {
                z[c] = b[c] + row.dot(&w[c * d..(c + 1) * d]);
            }
            let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for v in z.iter_mut() {
                *v = (*v - m).exp();
                s += *v;
            }
            let t = self.targets[i];
            value += s.ln() - (z[t].ln());
            for c in 0..k {
                let residual = z[c] / s - if c == t { 1.0 } else { 0.0 };
                row.axpy(residual, &mut grad[c * d..(c + 1) * d]);
                grad[k * d + c] += residual;
            }
        }
        let inv_c = 1.0 / self.inverse_regularization;
        for j in 0..k * d {
            value += 0.5 * inv_c * w[j] * w[j];
            grad[j] += inv_c * w[j];
        }
        (value, grad)
    }
}

pub fn fit_multinomial_logistic(
    x: &DesignMatrix,
    labels: &[usize],
    inverse_regularization: f64,
    options: &LogisticOptions,
) -> Result<MultinomialLogisticModel> {
    fit_multinomial_logistic_from(x, labels, inverse_regularization, options, None)
}

/// As [`fit_multinomial_logistic`], starting from `warm` when its shape fits.
pub fn fit_multinomial_logistic_from(
    x: &DesignMatrix,
    labels: &[usize],
    inverse_regularization: f64,
    options: &LogisticOptions,
    warm: Option<&MultinomialLogisticModel>,
) -> Result<MultinomialLogisticModel> {
    let (objective, order) = LogisticObjective::new(x, labels, inverse_regularization)?;
    let d = x.n_cols();
    let k = order.len();
    let start = match warm {
        Some(m) if m.class_order == order && m.dim() == d => m.to_params(),
        _ => {
            // Intercept-only optimum: centered log class frequencies.
            let mut counts = vec![0.0; k];
            for &t in &objective.targets {
                counts[t] += 1.0;
            }
            let logs: Vec<f64> = counts.iter().map(|c: &f64| c.ln()).collect();
            let mean = logs.iter().sum::<f64>() / k as f64;
            let mut p = vec![0.0; k * d];
            p.extend(logs.iter().map(|l| l - mean));
            p
        }
    };
    let (params, report) = lbfgs(|p| objective.value_and_gradient(p), start, options);
    let (w, b) = params.split_at(k * d);
    let mut intercepts = b.to_vec();
    let mean = intercepts.iter().sum::<f64>() / k as f64;
    intercepts.iter_mut().for_each(|v| *v -= mean);
    Ok(MultinomialLogisticModel {
        class_weights: (0..k).map(|c| w[c * d..(c + 1) * d].to_vec()).collect(),
        class_intercepts: intercepts,
        inverse_regularization,
        class_order: order,
        fit: report,
    })
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn lbfgs<F>(eval: F, start: Vec<f64>, options: &LogisticOptions) -> (Vec<f64>, FitReport)
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    const ARMIJO: f64 = 1e-4;
    let mut x = start;
    let (mut f, mut g) = eval(&x);
    let mut history: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = Default::default();
    let mut iterations = 0;
    while iterations < options.max_iterations && inf_norm(&g) >= options.gradient_tolerance {
        iterations += 1;
        // Two-loop recursion.
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        let gamma = history
            .back()
            .map_or(1.0 / (dot(&g, &g).sqrt()).max(1.0), |(s, y, _)| dot(s, y) / dot(y, y));
        q.iter_mut().for_each(|v| *v *= gamma);
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let beta = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - beta) * si);
        }
        let mut dir: Vec<f64> = q.into_iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            history.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + step * b).collect();
            let (ft, gt) = eval(&trial);
            let sufficient = ft <= f + ARMIJO * step * slope;
            // Near the optimum f stops resolving; accept if the gradient shrinks.
            let flat = ft - f <= 1e-12 * f.abs().max(1.0) && inf_norm(&gt) < inf_norm(&g);
            if ft.is_finite() && (sufficient || flat) {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            if history.is_empty() {
                break;
            }
            history.clear();
            continue;
        };
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).max(f64::MIN_POSITIVE) {
            if history.len() == options.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        x = x_new;
        f = f_new;
        g = g_new;
    }
    let gradient_norm = inf_norm(&g);
    (
        x,
        FitReport {
            iterations,
            gradient_norm,
            converged: gradient_norm < options.gradient_tolerance,
            objective: f,
        },
    )
}
