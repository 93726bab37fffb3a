use serde::{Deserialize, Serialize};

use super::design::{DesignMatrix, RowView};
use crate::error::{Error, Result};

pub trait Kernel: Sync {
    fn eval(&self, a: RowView<'_>, b: RowView<'_>) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Gaussian,
}

/// `k(x, x') = exp(−‖x − x'‖² / (2σ²))`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub bandwidth: f64,
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::InvalidInput(format!("kernel bandwidth must be positive, got {bandwidth}")));
        }
        Ok(KernelSpec {
            kind: KernelKind::Gaussian,
            bandwidth,
        })
    }

    pub fn eval_sq_dist(&self, sq_dist: f64) -> f64 {
        match self.kind {
            KernelKind::Gaussian => (-sq_dist / (2.0 * self.bandwidth * self.bandwidth)).exp(),
        }
    }
}

impl Kernel for KernelSpec {
    fn eval(&self, a: RowView<'_>, b: RowView<'_>) -> f64 {
        self.eval_sq_dist(a.sq_dist(&b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidth {
    pub sigma: f64,
    /// All pooled points coincided; `sigma` fell back to 1.
    pub fallback: bool,
}

/// Median Euclidean distance over all unordered pairs of the pooled sample.
pub fn median_heuristic_bandwidth(a: &DesignMatrix, b: &DesignMatrix) -> Result<Bandwidth> {
    let pooled: Vec<RowView<'_>> = (0..a.n_rows()).map(|i| a.row(i)).chain((0..b.n_rows()).map(|i| b.row(i))).collect();
    if pooled.len() < 2 {
        return Err(Error::InvalidInput("median heuristic needs at least two points".into()));
    }
    let mut dists = Vec::with_capacity(pooled.len() * (pooled.len() - 1) / 2);
    for i in 0..pooled.len() {
        for j in i + 1..pooled.len() {
            dists.push(pooled[i].sq_dist(&pooled[j]).max(0.0).sqrt());
        }
    }
    let median = median(&mut dists);
    if median > 0.0 {
        return Ok(Bandwidth {
            sigma: median,
            fallback: false,
        });
    }
    // Half the pairs may be zero while others are not.
    if dists.iter().any(|&d| d > 0.0) {
        let smallest_positive = dists.iter().copied().filter(|&d| d > 0.0).fold(f64::INFINITY, f64::min);
        log::warn!("median pairwise distance is zero; using smallest positive distance {smallest_positive}");
        return Ok(Bandwidth {
            sigma: smallest_positive,
            fallback: true,
        });
    }
    Ok(Bandwidth {
        sigma: 1.0,
        fallback: true,
    })
}

fn median(values: &mut [f64]) -> f64 {
    let n = values.len();
    values.sort_unstable_by(f64::total_cmp);
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
