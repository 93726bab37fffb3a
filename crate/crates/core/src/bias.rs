//! Selection-bias diagnostics: unbiased MMD² between venue covariate
//! distributions with label-permutation significance tests.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::numeric::{median_heuristic_bandwidth, DesignMatrix, Kernel, KernelSpec, RowView};
use crate::rng::substream;

pub const DEFAULT_PERMUTATIONS: usize = 1000;
pub const MIN_PERMUTATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmdResult {
    /// `(s, t)` when produced by a venue report.
    pub venue_pair: Option<(String, String)>,
    pub mmd2: f64,
    pub p_value: f64,
    pub permutations: usize,
    pub bandwidth: f64,
    /// Bandwidth came from a fallback rather than a positive median distance.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmdReport {
    pub venues: Vec<String>,
    /// Row `s` holds the pairs `(s, t)` for every `t < s`.
    pub results: Vec<Vec<MmdResult>>,
    pub alpha: f64,
}

fn rows(x: &DesignMatrix) -> Vec<RowView<'_>> {
    (0..x.n_rows()).map(|i| x.row(i)).collect()
}

/// Mean taken in ascending order, relative to the smallest term, so the
/// result does not depend on how the terms were enumerated and equal terms
/// average to themselves exactly.
fn ordered_mean(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    let base = terms[0];
    base + terms.iter().map(|t| t - base).sum::<f64>() / terms.len() as f64
}

fn within_mean<K: Kernel>(a: &[RowView<'_>], kernel: &K) -> f64 {
    let mut terms = Vec::with_capacity(a.len() * (a.len() - 1) / 2);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            terms.push(kernel.eval(a[i], a[j]));
        }
    }
    ordered_mean(terms)
}

/// Unbiased estimate
/// `1/(m(m−1)) Σ_{i≠j} k(a_i,a_j) + 1/(n(n−1)) Σ_{i≠j} k(b_i,b_j) − 2/(mn) Σ_{i,j} k(a_i,b_j)`.
/// May be negative.
pub fn mmd2_unbiased<K: Kernel>(a: &DesignMatrix, b: &DesignMatrix, kernel: &K) -> Result<f64> {
    if a.n_rows() < 2 || b.n_rows() < 2 {
        return Err(Error::InvalidInput(format!(
            "MMD needs at least two points per sample (got {} and {})",
            a.n_rows(),
            b.n_rows()
        )));
    }
    if a.n_cols() != b.n_cols() {
        return Err(Error::InvalidInput("MMD samples have different dimensions".into()));
    }
    let (ra, rb) = (rows(a), rows(b));
    let mut cross = Vec::with_capacity(ra.len() * rb.len());
    for x in &ra {
        for y in &rb {
            cross.push(kernel.eval(*x, *y));
        }
    }
    let cross_mean = ordered_mean(cross);
    Ok(within_mean(&ra, kernel) + within_mean(&rb, kernel) - 2.0 * cross_mean)
}

/// Pooled Gram matrix, scored under arbitrary size-preserving relabelings.
struct PooledGram {
    n: usize,
    k: Vec<f64>,
}

impl PooledGram {
    fn new(pooled: &[RowView<'_>], kernel: &KernelSpec) -> Self {
        let n = pooled.len();
        let upper: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| (i..n).map(|j| kernel.eval(pooled[i], pooled[j])).collect())
            .collect();
        let mut k = vec![0.0; n * n];
        for (i, row) in upper.iter().enumerate() {
            for (off, &v) in row.iter().enumerate() {
                let j = i + off;
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        PooledGram { n, k }
    }

    fn statistic(&self, in_a: &[bool], m: usize) -> f64 {
        let n = self.n;
        let (mut aa, mut bb, mut ab) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let row = &self.k[i * n..(i + 1) * n];
            let (mut to_a, mut to_b) = (0.0, 0.0);
            for (j, &v) in row.iter().enumerate() {
                if j == i {
                    continue;
                }
                if in_a[j] {
                    to_a += v;
                } else {
                    to_b += v;
                }
            }
            if in_a[i] {
                aa += to_a;
                ab += to_b;
            } else {
                bb += to_b;
            }
        }
        let (mf, nf) = (m as f64, (n - m) as f64);
        aa / (mf * (mf - 1.0)) + bb / (nf * (nf - 1.0)) - 2.0 * ab / (mf * nf)
    }
}

pub fn mmd_permutation_test(a: &DesignMatrix, b: &DesignMatrix, permutations: usize, seed: u64) -> Result<MmdResult> {
    permutation_test(a, b, permutations, seed, "mmd-permutation")
}

fn permutation_test(a: &DesignMatrix, b: &DesignMatrix, permutations: usize, seed: u64, purpose: &str) -> Result<MmdResult> {
    if permutations < MIN_PERMUTATIONS {
        return Err(Error::Config(format!("need at least {MIN_PERMUTATIONS} permutations, got {permutations}")));
    }
    let bandwidth = median_heuristic_bandwidth(a, b)?;
    let kernel = KernelSpec::gaussian(bandwidth.sigma)?;
    let mmd2 = mmd2_unbiased(a, b, &kernel)?;

    let pooled: Vec<RowView<'_>> = rows(a).into_iter().chain(rows(b)).collect();
    let (m, n) = (a.n_rows(), pooled.len());
    let gram = PooledGram::new(&pooled, &kernel);
    let labels: Vec<bool> = (0..n).map(|i| i < m).collect();
    let observed = gram.statistic(&labels, m);

    let exceed = (0..permutations)
        .into_par_iter()
        .filter(|&r| {
            let mut rng = substream(seed, purpose, r as u64);
            let mut perm: Vec<usize> = (0..n).collect();
            rand::seq::SliceRandom::shuffle(&mut perm[..], &mut rng);
            let mut in_a = vec![false; n];
            for &i in &perm[..m] {
                in_a[i] = true;
            }
            gram.statistic(&in_a, m) >= observed
        })
        .count();

    Ok(MmdResult {
        venue_pair: None,
        mmd2,
        p_value: (1 + exceed) as f64 / (permutations + 1) as f64,
        permutations,
        bandwidth: bandwidth.sigma,
        degenerate: bandwidth.fallback,
    })
}

pub fn pairwise_bias_report(dataset: &Dataset, permutations: usize, alpha: f64, seed: u64) -> Result<MmdReport> {
    if dataset.venues.len() < 2 {
        return Err(Error::InvalidInput("bias report needs at least two venues".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let samples: Vec<DesignMatrix> = dataset.indices_by_venue().iter().map(|idx| dataset.design_for(idx)).collect();
    let mut results = Vec::with_capacity(samples.len());
    for s in 0..samples.len() {
        let mut row = Vec::with_capacity(s);
        for t in 0..s {
            let mut r = permutation_test(&samples[s], &samples[t], permutations, seed, &format!("mmd-permutation/{s}-{t}"))?;
            r.venue_pair = Some((dataset.venues[s].clone(), dataset.venues[t].clone()));
            row.push(r);
        }
        results.push(row);
    }
    Ok(MmdReport {
        venues: dataset.venues.clone(),
        results,
        alpha,
    })
}

impl MmdReport {
    pub fn pairs(&self) -> impl Iterator<Item = &MmdResult> {
        self.results.iter().flatten()
    }

    pub fn significant(&self, r: &MmdResult) -> bool {
        r.p_value < self.alpha
    }

    /// Lower-triangular table of MMD² × 10³; `*` marks p < alpha.
    pub fn to_text(&self) -> String {
        let cells: Vec<Vec<String>> = self
            .results
            .iter()
            .map(|row| {
                row.iter()
                    .map(|r| format!("{:.1}{}", r.mmd2 * 1e3, if self.significant(r) { "*" } else { "" }))
                    .collect()
            })
            .collect();
        let label_width = self.venues.iter().map(String::len).max().unwrap_or(0);
        let cols = &self.venues[..self.venues.len() - 1];
        let width = cells
            .iter()
            .flatten()
            .map(String::len)
            .chain(cols.iter().map(String::len))
            .max()
            .unwrap_or(0);
        let mut out = format!("MMD^2 x 1e3 (* p < {})\n{:label_width$}", self.alpha, "");
        for c in cols {
            out.push_str(&format!("  {c:>width$}"));
        }
        out.push('\n');
        for (s, row) in cells.iter().enumerate().skip(1) {
            out.push_str(&format!("{:label_width$}", self.venues[s]));
            for cell in row {
                out.push_str(&format!("  {cell:>width$}"));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Constant(f64);
    impl Kernel for Constant {
        fn eval(&self, _: RowView<'_>, _: RowView<'_>) -> f64 {
            self.0
        }
    }

    fn dense(rows: &[Vec<f64>]) -> DesignMatrix {
        DesignMatrix::from_dense_rows(rows).unwrap()
    }

    #[test]
    fn constant_kernel_gives_zero() {
        let a = dense(&[vec![0.0], vec![1.0], vec![5.0]]);
        let b = dense(&[vec![2.0], vec![-3.0]]);
        assert_eq!(mmd2_unbiased(&a, &b, &Constant(0.7)).unwrap(), 0.0);
    }

    #[test]
    fn same_two_points() {
        let a = dense(&[vec![0.0, 0.0], vec![1.0, 2.0]]);
        let k = KernelSpec::gaussian(1.5).unwrap();
        let kpq = (-5.0f64 / (2.0 * 2.25)).exp();
        let got = mmd2_unbiased(&a, &a, &k).unwrap();
        assert!((got - (kpq - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn too_small_samples_rejected() {
        let a = dense(&[vec![0.0]]);
        let b = dense(&[vec![1.0], vec![2.0]]);
        assert!(mmd2_unbiased(&a, &b, &Constant(1.0)).is_err());
        assert!(mmd_permutation_test(&b, &b, 50, 0).is_err());
    }

    #[test]
    fn gram_statistic_agrees_with_direct_estimate() {
        let a = dense(&[vec![0.0, 1.0], vec![1.0, 0.3], vec![2.0, 2.0]]);
        let b = dense(&[vec![0.5, 0.5], vec![-1.0, 0.0], vec![3.0, 1.0], vec![0.0, 0.0]]);
        let k = KernelSpec::gaussian(0.8).unwrap();
        let pooled: Vec<_> = rows(&a).into_iter().chain(rows(&b)).collect();
        let g = PooledGram::new(&pooled, &k);
        let labels: Vec<bool> = (0..7).map(|i| i < 3).collect();
        assert!((g.statistic(&labels, 3) - mmd2_unbiased(&a, &b, &k).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn identical_points_are_flagged() {
        let a = dense(&[vec![1.0], vec![1.0], vec![1.0]]);
        let r = mmd_permutation_test(&a, &a, 100, 3).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.bandwidth, 1.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn deterministic_given_seed() {
        let a = dense(&(0..10).map(|i| vec![i as f64 * 0.1]).collect::<Vec<_>>());
        let b = dense(&(0..8).map(|i| vec![i as f64 * 0.13 + 0.2]).collect::<Vec<_>>());
        let r1 = mmd_permutation_test(&a, &b, 200, 9).unwrap();
        let r2 = mmd_permutation_test(&a, &b, 200, 9).unwrap();
        assert_eq!(r1, r2);
    }
}
