use faer::sparse::{SparseColMat, Triplet};

use crate::error::LinalgError;

/// Compressed sparse row matrix with sorted, duplicate-free column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` entries; duplicates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Self {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0; nrows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            assert!(i < nrows && j < ncols, "entry ({i}, {j}) out of bounds");
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self::from_triplets(nrows, ncols, std::iter::empty())
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        Self::from_triplets(
            d.len(),
            d.len(),
            d.iter().enumerate().map(|(i, &v)| (i, i, v)),
        )
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// Mutable access to an existing nonzero.
    pub fn get_mut(&mut self, i: usize, j: usize) -> Option<&mut f64> {
        let start = self.row_ptr[i];
        let cols = &self.col_idx[start..self.row_ptr[i + 1]];
        cols.binary_search(&j).ok().map(move |k| &mut self.values[start + k])
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.row(i).1.iter().sum()).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_add(1.0, x, &mut y);
        y
    }

    /// `y += alpha * self * x`
    pub fn mul_vec_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            let s: f64 = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
            *yi += alpha * s;
        }
    }

    /// `xᵀ self y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.nrows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                x[i] * cols.iter().zip(vals).map(|(&j, &v)| v * y[j]).sum::<f64>()
            })
            .sum()
    }

    /// The block `self[rows, cols]`.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.ncols];
        for (k, &j) in cols.iter().enumerate() {
            map[j] = k;
        }
        let mut triplets = Vec::new();
        for (r, &i) in rows.iter().enumerate() {
            let (cs, vs) = self.row(i);
            for (&j, &v) in cs.iter().zip(vs) {
                if map[j] != usize::MAX {
                    triplets.push((r, map[j], v));
                }
            }
        }
        Self::from_triplets(rows.len(), cols.len(), triplets)
    }

    /// `self + alpha * other`
    pub fn add_scaled(&self, alpha: f64, other: &CsrMatrix) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        Self::from_triplets(
            self.nrows,
            self.ncols,
            self.triplets()
                .chain(other.triplets().map(|(i, j, v)| (i, j, alpha * v))),
        )
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(
            self.ncols,
            self.nrows,
            self.triplets().map(|(i, j, v)| (j, i, v)),
        )
    }

    /// Symmetric permutation `P self Pᵀ` with `new[perm[i]] = old[i]`.
    pub fn permute_symmetric(&self, perm: &[usize]) -> Self {
        Self::from_triplets(
            self.nrows,
            self.ncols,
            self.triplets().map(|(i, j, v)| (perm[i], perm[j], v)),
        )
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.nrows == self.ncols
            && self
                .triplets()
                .all(|(i, j, v)| (v - self.get(j, i)).abs() <= rel_tol * scale)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            d[i][j] = v;
        }
        d
    }

    pub(crate) fn to_faer(&self) -> Result<SparseColMat<usize, f64>, LinalgError> {
        let triplets: Vec<Triplet<usize, usize, f64>> = self
            .triplets()
            .map(|(i, j, v)| Triplet::new(i, j, v))
            .collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &triplets).map_err(|_| {
            LinalgError::Dimension {
                expected: self.nrows,
                got: self.ncols,
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let a = CsrMatrix::from_triplets(2, 2, [(0, 0, 1.0), (1, 1, 2.0), (0, 0, 3.0)]);
        assert_eq!(a.get(0, 0), 4.0);
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.mul_vec(&[1.0, 1.0]), vec![4.0, 2.0]);
    }

    #[test]
    fn submatrix_picks_block() {
        let a = CsrMatrix::from_triplets(
            3,
            3,
            [(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0), (2, 0, 4.0), (2, 2, 5.0)],
        );
        let s = a.submatrix(&[2, 0], &[0, 2]);
        assert_eq!(s.to_dense(), vec![vec![4.0, 5.0], vec![1.0, 2.0]]);
        assert!(!a.is_symmetric(0.0));
        assert_eq!(a.transpose().get(0, 2), 4.0);
    }
}
