use serde::{Deserialize, Serialize};

/// Compressed sparse rows; the AL → MB projection is about 85% zeros.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_triplets_by_row(rows: usize, cols: usize, entries: Vec<Vec<(usize, f64)>>) -> Self {
        debug_assert_eq!(entries.len(), rows);
        let mut indptr = Vec::with_capacity(rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in entries {
            for (c, v) in row {
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn from_dense(dense: &ndarray::Array2<f64>) -> Self {
        let entries = dense
            .outer_iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(c, v)| (c, *v))
                    .collect()
            })
            .collect();
        Self::from_triplets_by_row(dense.nrows(), dense.ncols(), entries)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Stored entries (the connectivity support, including any that decayed to 0).
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn density(&self) -> f64 {
        self.nnz() as f64 / (self.rows * self.cols).max(1) as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn row_mut(&mut self, r: usize) -> (&[usize], &mut [f64]) {
        let span = self.indptr[r]..self.indptr[r + 1];
        (&self.indices[span.clone()], &mut self.values[span])
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| {
                let span = self.indptr[r]..self.indptr[r + 1];
                self.indices[span.clone()]
                    .iter()
                    .zip(&self.values[span])
                    .map(|(&c, &v)| v * x[c])
                    .sum()
            })
            .collect()
    }

    pub fn to_dense(&self) -> ndarray::Array2<f64> {
        let mut out = ndarray::Array2::zeros((self.rows, self.cols));
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                out[[r, c]] = v;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn matvec_matches_dense() {
        let dense = array![[0.0, 2.0, 0.0], [1.0, 0.0, 3.0]];
        let sp = SparseMatrix::from_dense(&dense);
        assert_eq!(sp.nnz(), 3);
        assert_eq!(sp.matvec(&[1.0, 2.0, 3.0]), vec![4.0, 10.0]);
        assert_eq!(sp.to_dense(), dense);
    }
}
