//! Independent reference implementations and fixtures shared by the
//! integration tests. Nothing here calls into the code paths it checks.
#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/dblp_mini.json")
}

/// Gaussian elimination with partial pivoting.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Weighted ridge with unpenalized intercept from the augmented normal
/// equations `[XᵀWX + λI, XᵀW1; 1ᵀWX, 1ᵀW1] [θ; b] = [XᵀWy; 1ᵀWy]`.
pub fn ridge_oracle(x: &[Vec<f64>], y: &[f64], w: &[f64], lambda: f64) -> (Vec<f64>, f64) {
    let d = x[0].len();
    let mut a = vec![vec![0.0; d + 1]; d + 1];
    let mut rhs = vec![0.0; d + 1];
    for ((row, &yi), &wi) in x.iter().zip(y).zip(w) {
        let mut aug = row.clone();
        aug.push(1.0);
        for j in 0..=d {
            rhs[j] += wi * aug[j] * yi;
            for k in 0..=d {
                a[j][k] += wi * aug[j] * aug[k];
            }
        }
    }
    for (j, row) in a.iter_mut().enumerate().take(d) {
        row[j] += lambda;
    }
    let mut sol = solve_dense(a, rhs);
    let b = sol.pop().unwrap();
    (sol, b)
}

pub fn gaussian_kernel(a: &[f64], b: &[f64], sigma: f64) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-sq / (2.0 * sigma * sigma)).exp()
}

/// The three-term unbiased MMD² by explicit loops.
pub fn mmd2_oracle(a: &[Vec<f64>], b: &[Vec<f64>], sigma: f64) -> f64 {
    let (m, n) = (a.len() as f64, b.len() as f64);
    let mut xx = 0.0;
    for i in 0..a.len() {
        for j in 0..a.len() {
            if i != j {
                xx += gaussian_kernel(&a[i], &a[j], sigma);
            }
        }
    }
    let mut yy = 0.0;
    for i in 0..b.len() {
        for j in 0..b.len() {
            if i != j {
                yy += gaussian_kernel(&b[i], &b[j], sigma);
            }
        }
    }
    let mut xy = 0.0;
    for p in a {
        for q in b {
            xy += gaussian_kernel(p, q, sigma);
        }
    }
    xx / (m * (m - 1.0)) + yy / (n * (n - 1.0)) - 2.0 * xy / (m * n)
}

/// Rank by counting: strictly smaller values plus the midpoint of the tie block.
pub fn ranks_oracle(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let below = v.iter().filter(|&&y| y < x).count() as f64;
            let equal = v.iter().filter(|&&y| y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn pearson_oracle(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va.sqrt() * vb.sqrt())
}

pub fn spearman_oracle(a: &[f64], b: &[f64]) -> f64 {
    pearson_oracle(&ranks_oracle(a), &ranks_oracle(b))
}

pub fn normal_vec(r: &mut impl Rng, len: usize, mean: f64, std: f64) -> Vec<f64> {
    (0..len)
        .map(|_| {
            // Box-Muller
            let u1: f64 = 1.0 - r.random::<f64>();
            let u2: f64 = r.random();
            mean + std * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        })
        .collect()
}
