//! Weighted ridge regression with an unpenalized intercept.
//!
//! Minimizes `Σ w_i (y_i − θᵀx_i − b)² + λ‖θ‖²`. After weighted centering the
//! intercept drops out and θ solves `(X_cᵀ W X_c + λI) θ = X_cᵀ W y_c`. When
//! there are fewer rows than columns the equivalent n×n dual system is solved
//! instead; above [`MAX_DIRECT_DIM`] conjugate gradient on the primal system
//! takes over.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::design::{DesignMatrix, RowView};
use crate::error::{Error, Result};

/// Largest system solved by a dense factorization.
pub const MAX_DIRECT_DIM: usize = 4096;
/// Largest system eigendecomposed once to sweep a whole λ path.
const EIGEN_PATH_DIM: usize = 1500;
const CG_TOLERANCE: f64 = 1e-10;
const PINV_RCOND: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub regularization: f64,
}

impl LinearModel {
    pub fn predict_row(&self, row: RowView<'_>) -> f64 {
        self.intercept + row.dot(&self.weights)
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    PrimalCholesky,
    DualCholesky,
    PrimalEigen,
    DualEigen,
    ConjugateGradient,
    InterceptOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit {
    pub model: LinearModel,
    pub method: SolveMethod,
    /// Set when λ = 0 and the system was singular: the minimum-norm
    /// least-squares solution was returned.
    pub min_norm: bool,
}

/// Weighted objective `Σ w r² + λ‖θ‖²` of `model` on the given data.
pub fn objective(x: &DesignMatrix, y: &[f64], w: &[f64], lambda: f64, model: &LinearModel) -> f64 {
    let loss: f64 = (0..x.n_rows())
        .map(|i| {
            let r = y[i] - model.predict_row(x.row(i));
            w[i] * r * r
        })
        .sum();
    loss + lambda * model.weights.iter().map(|v| v * v).sum::<f64>()
}

pub fn fit_weighted_ridge(x: &DesignMatrix, y: &[f64], w: &[f64], lambda: f64) -> Result<RidgeFit> {
    validate(x, y, w, &[lambda])?;
    let centered = Centered::new(x, y, w);
    if x.n_cols() == 0 {
        return Ok(centered.intercept_only(lambda));
    }
    let system = System::build(&centered);
    match system {
        Some(system) if lambda > 0.0 => match system.solve_cholesky(lambda) {
            Some(rhs) => Ok(centered.finish(&system.kind, rhs, lambda, false)),
            None => {
                let eig = system.eigen();
                Ok(centered.finish_eigen(&system, &eig, lambda))
            }
        },
        Some(system) => {
            let eig = system.eigen();
            Ok(centered.finish_eigen(&system, &eig, lambda))
        }
        None => Ok(centered.conjugate_gradient(lambda)),
    }
}

/// Fit one model per λ, sharing one factorization of the centered system.
pub fn fit_weighted_ridge_path(
    x: &DesignMatrix,
    y: &[f64],
    w: &[f64],
    lambdas: &[f64],
) -> Result<Vec<RidgeFit>> {
    validate(x, y, w, lambdas)?;
    let centered = Centered::new(x, y, w);
    if x.n_cols() == 0 {
        return Ok(lambdas.iter().map(|&l| centered.intercept_only(l)).collect());
    }
    match System::build(&centered) {
        Some(system) if system.dim() <= EIGEN_PATH_DIM => {
            let eig = system.eigen();
            Ok(lambdas
                .iter()
                .map(|&l| centered.finish_eigen(&system, &eig, l))
                .collect())
        }
        _ => lambdas
            .iter()
            .map(|&l| fit_weighted_ridge(x, y, w, l))
            .collect(),
    }
}

fn validate(x: &DesignMatrix, y: &[f64], w: &[f64], lambdas: &[f64]) -> Result<()> {
    let n = x.n_rows();
    if n == 0 {
        return Err(Error::InvalidInput("ridge needs at least one row".into()));
    }
    if y.len() != n || w.len() != n {
        return Err(Error::InvalidInput(format!(
            "ridge: {n} rows but {} targets and {} weights",
            y.len(),
            w.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ridge targets"));
    }
    if w.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
        return Err(Error::InvalidInput("ridge weights must be positive and finite".into()));
    }
    if lambdas.iter().any(|&l| !(l.is_finite() && l >= 0.0)) {
        return Err(Error::InvalidInput("ridge penalty must be non-negative and finite".into()));
    }
    Ok(())
}

/// Data after weighted centering.
struct Centered<'a> {
    x: &'a DesignMatrix,
    w: &'a [f64],
    x_mean: Vec<f64>,
    y_mean: f64,
    y_centered: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SystemKind {
    Primal,
    Dual,
}

struct System {
    kind: SystemKind,
    matrix: DMatrix<f64>,
    rhs: DVector<f64>,
}

impl<'a> Centered<'a> {
    fn new(x: &'a DesignMatrix, y: &'a [f64], w: &'a [f64]) -> Self {
        let d = x.n_cols();
        let total: f64 = w.iter().sum();
        let mut x_mean = vec![0.0; d];
        for i in 0..x.n_rows() {
            x.row(i).axpy(w[i], &mut x_mean);
        }
        x_mean.iter_mut().for_each(|v| *v /= total);
        let y_mean = w.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / total;
        let y_centered = y.iter().map(|v| v - y_mean).collect();
        Centered {
            x,
            w,
            x_mean,
            y_mean,
            y_centered,
        }
    }

    fn intercept_only(&self, lambda: f64) -> RidgeFit {
        RidgeFit {
            model: LinearModel {
                weights: vec![0.0; self.x.n_cols()],
                intercept: self.y_mean,
                regularization: lambda,
            },
            method: SolveMethod::InterceptOnly,
            min_norm: false,
        }
    }

    /// Centered row `x_i − x̄` as a dense vector.
    fn centered_row(&self, i: usize) -> Vec<f64> {
        let mut v = self.x.row(i).to_dense(self.x.n_cols());
        v.iter_mut().zip(&self.x_mean).for_each(|(a, m)| *a -= m);
        v
    }

    /// `X_cᵀ W y_c`; equals `Xᵀ W y_c` because `Σ w y_c = 0`.
    fn primal_rhs(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.x.n_cols()];
        for i in 0..self.x.n_rows() {
            self.x.row(i).axpy(self.w[i] * self.y_centered[i], &mut r);
        }
        r
    }

    fn primal_gram(&self) -> DMatrix<f64> {
        let d = self.x.n_cols();
        let mut g = DMatrix::<f64>::zeros(d, d);
        match self.x {
            DesignMatrix::Dense { .. } => {
                for i in 0..self.x.n_rows() {
                    let c = self.centered_row(i);
                    let wi = self.w[i];
                    for a in 0..d {
                        let s = wi * c[a];
                        if s == 0.0 {
                            continue;
                        }
                        for b in a..d {
                            g[(a, b)] += s * c[b];
                        }
                    }
                }
            }
            DesignMatrix::SparseBinary { rows, .. } => {
                for (row, &wi) in rows.iter().zip(self.w) {
                    for (p, &a) in row.iter().enumerate() {
                        for &b in &row[p..] {
                            g[(a as usize, b as usize)] += wi;
                        }
                    }
                }
                let total: f64 = self.w.iter().sum();
                for a in 0..d {
                    for b in a..d {
                        g[(a, b)] -= total * self.x_mean[a] * self.x_mean[b];
                    }
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                g[(a, b)] = g[(b, a)];
            }
        }
        g
    }

    /// `K_ij = sqrt(w_i w_j) (x_i − x̄)·(x_j − x̄)`.
    fn dual_kernel(&self) -> DMatrix<f64> {
        let n = self.x.n_rows();
        let mean_sq: f64 = self.x_mean.iter().map(|v| v * v).sum();
        let proj: Vec<f64> = (0..n).map(|i| self.x.row(i).dot(&self.x_mean)).collect();
        let sw: Vec<f64> = self.w.iter().map(|v| v.sqrt()).collect();
        let mut k = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let raw = self.x.row(i).sq_norm() + self.x.row(j).sq_norm() - self.x.row(i).sq_dist(&self.x.row(j));
                let dot = 0.5 * raw - proj[i] - proj[j] + mean_sq;
                let v = sw[i] * sw[j] * dot;
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }

    fn finish(&self, kind: &SystemKind, solution: DVector<f64>, lambda: f64, min_norm: bool) -> RidgeFit {
        let theta = match kind {
            SystemKind::Primal => solution.iter().copied().collect::<Vec<_>>(),
            SystemKind::Dual => {
                let mut theta = vec![0.0; self.x.n_cols()];
                let mut shift = 0.0;
                for i in 0..self.x.n_rows() {
                    let a = self.w[i].sqrt() * solution[i];
                    self.x.row(i).axpy(a, &mut theta);
                    shift += a;
                }
                theta.iter_mut().zip(&self.x_mean).for_each(|(t, m)| *t -= shift * m);
                theta
            }
        };
        let intercept = self.y_mean - theta.iter().zip(&self.x_mean).map(|(a, b)| a * b).sum::<f64>();
        let method = match kind {
            SystemKind::Primal => SolveMethod::PrimalCholesky,
            SystemKind::Dual => SolveMethod::DualCholesky,
        };
        RidgeFit {
            model: LinearModel {
                weights: theta,
                intercept,
                regularization: lambda,
            },
            method,
            min_norm,
        }
    }

    fn finish_eigen(&self, system: &System, eig: &SymmetricEigen<f64, nalgebra::Dyn>, lambda: f64) -> RidgeFit {
        let max_eig = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let cutoff = max_eig * system.dim() as f64 * PINV_RCOND;
        let proj = eig.eigenvectors.transpose() * &system.rhs;
        let mut singular = false;
        let scaled = DVector::from_iterator(
            proj.len(),
            proj.iter().zip(eig.eigenvalues.iter()).map(|(p, &e)| {
                let e = e.max(0.0);
                if lambda == 0.0 && e <= cutoff {
                    singular = true;
                    0.0
                } else {
                    p / (e + lambda)
                }
            }),
        );
        let solution = &eig.eigenvectors * scaled;
        let mut fit = self.finish(&system.kind, solution, lambda, singular && lambda == 0.0);
        fit.method = match system.kind {
            SystemKind::Primal => SolveMethod::PrimalEigen,
            SystemKind::Dual => SolveMethod::DualEigen,
        };
        fit
    }

    /// `(X_cᵀ W X_c + λI) v` without forming the matrix.
    fn apply_primal(&self, v: &[f64], lambda: f64) -> Vec<f64> {
        let shift: f64 = self.x_mean.iter().zip(v).map(|(a, b)| a * b).sum();
        let mut out = vec![0.0; v.len()];
        let mut total = 0.0;
        for i in 0..self.x.n_rows() {
            let u = self.w[i] * (self.x.row(i).dot(v) - shift);
            self.x.row(i).axpy(u, &mut out);
            total += u;
        }
        for ((o, m), vi) in out.iter_mut().zip(&self.x_mean).zip(v) {
            *o += lambda * vi - total * m;
        }
        out
    }

    fn conjugate_gradient(&self, lambda: f64) -> RidgeFit {
        let b = self.primal_rhs();
        let d = b.len();
        let b_norm = norm(&b);
        let mut x = vec![0.0; d];
        let mut r = b.clone();
        let mut p = r.clone();
        let mut rr: f64 = r.iter().map(|v| v * v).sum();
        for _ in 0..(10 * d).max(100) {
            if rr.sqrt() <= CG_TOLERANCE * b_norm.max(f64::MIN_POSITIVE) {
                break;
            }
            let ap = self.apply_primal(&p, lambda);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if pap <= 0.0 {
                break;
            }
            let alpha = rr / pap;
            for k in 0..d {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            let rr_next: f64 = r.iter().map(|v| v * v).sum();
            let beta = rr_next / rr;
            rr = rr_next;
            for k in 0..d {
                p[k] = r[k] + beta * p[k];
            }
        }
        let mut fit = self.finish(&SystemKind::Primal, DVector::from_vec(x), lambda, lambda == 0.0);
        fit.method = SolveMethod::ConjugateGradient;
        fit
    }
}

impl System {
    /// `None` when the smaller of the primal and dual systems is still too
    /// large for a dense factorization.
    fn build(c: &Centered<'_>) -> Option<System> {
        let (n, d) = (c.x.n_rows(), c.x.n_cols());
        if d <= n {
            if d > MAX_DIRECT_DIM {
                return None;
            }
            Some(System {
                kind: SystemKind::Primal,
                matrix: c.primal_gram(),
                rhs: DVector::from_vec(c.primal_rhs()),
            })
        } else {
            if n > MAX_DIRECT_DIM {
                return None;
            }
            let rhs = c.w.iter().zip(&c.y_centered).map(|(w, y)| w.sqrt() * y);
            Some(System {
                kind: SystemKind::Dual,
                matrix: c.dual_kernel(),
                rhs: DVector::from_iterator(n, rhs),
            })
        }
    }

    fn dim(&self) -> usize {
        self.rhs.len()
    }

    fn solve_cholesky(&self, lambda: f64) -> Option<DVector<f64>> {
        let mut m = self.matrix.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += lambda;
        }
        m.cholesky().map(|ch| ch.solve(&self.rhs))
    }

    fn eigen(&self) -> SymmetricEigen<f64, nalgebra::Dyn> {
        self.matrix.clone().symmetric_eigen()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}
