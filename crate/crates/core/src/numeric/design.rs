use crate::error::{Error, Result};

/// Row-major covariate matrix, either dense reals or sparse 0/1 rows.
#[derive(Debug, Clone, PartialEq)]
pub enum DesignMatrix {
    Dense {
        cols: usize,
        data: Vec<f64>,
    },
    /// Each row lists the (sorted, distinct) column indices equal to one.
    SparseBinary {
        cols: usize,
        rows: Vec<Vec<u32>>,
    },
}

/// Borrowed view of one row.
#[derive(Debug, Clone, Copy)]
pub enum RowView<'a> {
    Dense(&'a [f64]),
    SparseBinary(&'a [u32]),
}

impl DesignMatrix {
    pub fn dense(cols: usize, data: Vec<f64>) -> Result<Self> {
        if cols == 0 && !data.is_empty() {
            return Err(Error::InvalidInput("dense matrix with zero columns".into()));
        }
        if cols > 0 && data.len() % cols != 0 {
            return Err(Error::InvalidInput(format!(
                "dense data length {} is not a multiple of {cols} columns",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design matrix"));
        }
        Ok(DesignMatrix::Dense { cols, data })
    }

    pub fn from_dense_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidInput("ragged dense rows".into()));
        }
        Self::dense(cols, rows.concat())
    }

    pub fn sparse_binary(cols: usize, rows: Vec<Vec<u32>>) -> Result<Self> {
        for row in &rows {
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidInput("sparse row indices must be strictly increasing".into()));
            }
            if row.last().is_some_and(|&j| j as usize >= cols) {
                return Err(Error::InvalidInput(format!("sparse index out of range for {cols} columns")));
            }
        }
        Ok(DesignMatrix::SparseBinary { cols, rows })
    }

    pub fn n_rows(&self) -> usize {
        match self {
            DesignMatrix::Dense { cols, data } => {
                if *cols == 0 {
                    0
                } else {
                    data.len() / cols
                }
            }
            DesignMatrix::SparseBinary { rows, .. } => rows.len(),
        }
    }

    pub fn n_cols(&self) -> usize {
        match self {
            DesignMatrix::Dense { cols, .. } | DesignMatrix::SparseBinary { cols, .. } => *cols,
        }
    }

    pub fn row(&self, i: usize) -> RowView<'_> {
        match self {
            DesignMatrix::Dense { cols, data } => RowView::Dense(&data[i * cols..(i + 1) * cols]),
            DesignMatrix::SparseBinary { rows, .. } => RowView::SparseBinary(&rows[i]),
        }
    }

    pub fn select_rows(&self, idx: &[usize]) -> DesignMatrix {
        match self {
            DesignMatrix::Dense { cols, data } => {
                let mut out = Vec::with_capacity(idx.len() * cols);
                for &i in idx {
                    out.extend_from_slice(&data[i * cols..(i + 1) * cols]);
                }
                DesignMatrix::Dense { cols: *cols, data: out }
            }
            DesignMatrix::SparseBinary { cols, rows } => DesignMatrix::SparseBinary {
                cols: *cols,
                rows: idx.iter().map(|&i| rows[i].clone()).collect(),
            },
        }
    }

    /// Append `levels` indicator columns; row `i` gets a one in column
    /// `n_cols() + level[i]`.
    pub fn with_one_hot(&self, level: &[usize], levels: usize) -> DesignMatrix {
        assert_eq!(level.len(), self.n_rows());
        match self {
            DesignMatrix::Dense { cols, data } => {
                let width = cols + levels;
                let mut out = Vec::with_capacity(level.len() * width);
                for (i, &l) in level.iter().enumerate() {
                    out.extend_from_slice(&data[i * cols..(i + 1) * cols]);
                    out.extend((0..levels).map(|k| if k == l { 1.0 } else { 0.0 }));
                }
                DesignMatrix::Dense { cols: width, data: out }
            }
            DesignMatrix::SparseBinary { cols, rows } => DesignMatrix::SparseBinary {
                cols: cols + levels,
                rows: rows
                    .iter()
                    .zip(level)
                    .map(|(r, &l)| {
                        let mut r = r.clone();
                        r.push((cols + l) as u32);
                        r
                    })
                    .collect(),
            },
        }
    }

    pub fn to_dense_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_rows()).map(|i| self.row(i).to_dense(self.n_cols())).collect()
    }
}

impl<'a> RowView<'a> {
    #[inline]
    pub fn dot(&self, w: &[f64]) -> f64 {
        match self {
            RowView::Dense(x) => x.iter().zip(w).map(|(a, b)| a * b).sum(),
            RowView::SparseBinary(idx) => idx.iter().map(|&j| w[j as usize]).sum(),
        }
    }

    /// `out += alpha * row`
    #[inline]
    pub fn axpy(&self, alpha: f64, out: &mut [f64]) {
        match self {
            RowView::Dense(x) => {
                for (o, v) in out.iter_mut().zip(x.iter()) {
                    *o += alpha * v;
                }
            }
            RowView::SparseBinary(idx) => {
                for &j in idx.iter() {
                    out[j as usize] += alpha;
                }
            }
        }
    }

    pub fn to_dense(&self, cols: usize) -> Vec<f64> {
        match self {
            RowView::Dense(x) => x.to_vec(),
            RowView::SparseBinary(idx) => {
                let mut v = vec![0.0; cols];
                for &j in idx.iter() {
                    v[j as usize] = 1.0;
                }
                v
            }
        }
    }

    pub fn sq_norm(&self) -> f64 {
        match self {
            RowView::Dense(x) => x.iter().map(|v| v * v).sum(),
            RowView::SparseBinary(idx) => idx.len() as f64,
        }
    }

    /// Squared Euclidean distance; both rows must have the same layout.
    pub fn sq_dist(&self, other: &RowView<'_>) -> f64 {
        match (self, other) {
            (RowView::Dense(a), RowView::Dense(b)) => {
                a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
            }
            (RowView::SparseBinary(a), RowView::SparseBinary(b)) => {
                // |A Δ B| for 0/1 vectors
                let (mut i, mut j, mut common) = (0, 0, 0usize);
                while i < a.len() && j < b.len() {
                    match a[i].cmp(&b[j]) {
                        std::cmp::Ordering::Less => i += 1,
                        std::cmp::Ordering::Greater => j += 1,
                        std::cmp::Ordering::Equal => {
                            common += 1;
                            i += 1;
                            j += 1;
                        }
                    }
                }
                (a.len() + b.len() - 2 * common) as f64
            }
            (RowView::Dense(d), RowView::SparseBinary(s)) | (RowView::SparseBinary(s), RowView::Dense(d)) => {
                let mut total: f64 = d.iter().map(|v| v * v).sum();
                for &j in s.iter() {
                    let v = d[j as usize];
                    total += (v - 1.0) * (v - 1.0) - v * v;
                }
                total
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_and_dense_views_agree() {
        let s = DesignMatrix::sparse_binary(4, vec![vec![0, 2], vec![1, 2, 3], vec![]]).unwrap();
        let d = DesignMatrix::from_dense_rows(&s.to_dense_rows()).unwrap();
        let w = [0.5, -1.0, 2.0, 3.0];
        for i in 0..3 {
            assert_eq!(s.row(i).dot(&w), d.row(i).dot(&w));
            for j in 0..3 {
                assert_eq!(s.row(i).sq_dist(&s.row(j)), d.row(i).sq_dist(&d.row(j)));
                assert_eq!(s.row(i).sq_dist(&d.row(j)), d.row(i).sq_dist(&d.row(j)));
            }
        }
    }

    #[test]
    fn one_hot_appends_indicator() {
        let s = DesignMatrix::sparse_binary(2, vec![vec![0], vec![1]]).unwrap();
        let t = s.with_one_hot(&[1, 0], 2);
        assert_eq!(t.n_cols(), 4);
        assert_eq!(t.to_dense_rows(), vec![vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 1.0, 1.0, 0.0]]);
        let d = DesignMatrix::from_dense_rows(&[vec![2.0], vec![3.0]]).unwrap();
        assert_eq!(d.with_one_hot(&[0, 1], 2).to_dense_rows(), vec![vec![2.0, 1.0, 0.0], vec![3.0, 0.0, 1.0]]);
    }

    #[test]
    fn rejects_bad_sparse_rows() {
        assert!(DesignMatrix::sparse_binary(3, vec![vec![2, 1]]).is_err());
        assert!(DesignMatrix::sparse_binary(3, vec![vec![3]]).is_err());
        assert!(DesignMatrix::dense(2, vec![1.0, f64::NAN]).is_err());
    }
}
