//! Row-compressed sparse matrices and ordered index sets.
//!
//! A [`SparseMatrix`] doubles as the adjacency of the bipartite graph between
//! columns (left nodes, cells) and rows (right nodes, rays): an edge exists
//! wherever a value is stored. Stored values are never zero. Unless the
//! matrix is flagged as signed, they are also strictly positive.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing list of indices below a known bound.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SupportSet(Vec<usize>);

impl SupportSet {
    pub fn empty() -> Self {
        SupportSet(Vec::new())
    }

    /// Validates that `indices` is strictly increasing and below `bound`.
    pub fn new(indices: Vec<usize>, bound: usize) -> Result<Self> {
        for w in indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidArgument(format!(
                    "support indices not strictly increasing: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if let Some(&last) = indices.last() {
            if last >= bound {
                return Err(Error::IndexOutOfBounds { index: last, bound });
            }
        }
        Ok(SupportSet(indices))
    }

    /// Sorts and deduplicates before validating.
    pub fn from_unsorted(mut indices: Vec<usize>, bound: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        Self::new(indices, bound)
    }

    pub(crate) fn from_sorted_unchecked(indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        SupportSet(indices)
    }

    /// Indices of the strictly positive (above `tol`) entries of `x`.
    pub fn of_vector(x: &[f64], tol: f64) -> Self {
        SupportSet(x.iter().enumerate().filter(|(_, v)| v.abs() > tol).map(|(i, _)| i).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn complement(&self, bound: usize) -> Self {
        let mut out = Vec::with_capacity(bound.saturating_sub(self.0.len()));
        let mut it = self.0.iter().peekable();
        for i in 0..bound {
            if it.peek() == Some(&&i) {
                it.next();
            } else {
                out.push(i);
            }
        }
        SupportSet(out)
    }

    /// Elements of `self` not in `other`.
    pub fn difference(&self, other: &SupportSet) -> Self {
        SupportSet(self.0.iter().copied().filter(|&i| !other.contains(i)).collect())
    }

    /// 0/1 indicator vector of length `n`.
    pub fn indicator(&self, n: usize) -> Vec<f64> {
        let mut x = vec![0.0; n];
        for &i in &self.0 {
            x[i] = 1.0;
        }
        x
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }
}

/// Compressed sparse row matrix with `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    signed: bool,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets.
    ///
    /// Duplicate coordinates are summed; entries that end up exactly zero are
    /// dropped. Negative values are rejected unless `signed` is set.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
        signed: bool,
    ) -> Result<Self> {
        for &(i, j, v) in &triplets {
            if i >= rows {
                return Err(Error::IndexOutOfBounds { index: i, bound: rows });
            }
            if j >= cols {
                return Err(Error::IndexOutOfBounds { index: j, bound: cols });
            }
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite entry at ({i}, {j})")));
            }
        }
        triplets.sort_unstable_by_key(|t| (t.0, t.1));

        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        let mut row_of = Vec::with_capacity(triplets.len());
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_of.push(i);
                last = Some((i, j));
            }
        }
        // drop cancellations
        let mut keep_cols = Vec::with_capacity(col_idx.len());
        let mut keep_vals = Vec::with_capacity(values.len());
        for ((j, v), i) in col_idx.into_iter().zip(values).zip(row_of) {
            if v == 0.0 {
                continue;
            }
            if v < 0.0 && !signed {
                return Err(Error::NegativeEntry { index: i * cols + j, value: v });
            }
            keep_cols.push(j);
            keep_vals.push(v);
            row_ptr[i + 1] += 1;
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(SparseMatrix { rows, cols, row_ptr, col_idx: keep_cols, values: keep_vals, signed })
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
            signed: false,
        }
    }

    /// `1 x n` matrix of ones.
    pub fn ones_row(n: usize) -> Self {
        SparseMatrix {
            rows: 1,
            cols: n,
            row_ptr: vec![0, n],
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
            signed: false,
        }
    }

    pub fn from_dense(dense: &[Vec<f64>], signed: bool) -> Result<Self> {
        let rows = dense.len();
        let cols = dense.first().map_or(0, Vec::len);
        let mut trip = Vec::new();
        for (i, row) in dense.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::DimensionMismatch("ragged dense matrix".into()));
            }
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(rows, cols, trip, signed)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_signed(&self) -> bool {
        self.signed
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |p| vals[p])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Triplets in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&j, &x)| (i, j, x))
        })
    }

    /// Per-column `(row, value)` lists, rows increasing.
    pub fn columns(&self) -> Vec<Vec<(usize, f64)>> {
        let mut out = vec![Vec::new(); self.cols];
        for (i, j, v) in self.triplets() {
            out[j].push((i, v));
        }
        out
    }

    pub fn col_nnz(&self) -> Vec<usize> {
        let mut out = vec![0; self.cols];
        for &j in &self.col_idx {
            out[j] += 1;
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let trip = self.triplets().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.cols, self.rows, trip, self.signed).expect("transpose of valid matrix")
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} for matrix with {} columns",
                x.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter().zip(v).map(|(&j, &a)| a * x[j]).sum()
            })
            .collect())
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &SparseMatrix) -> Self {
        let mut trip = Vec::with_capacity(self.nnz() * other.nnz());
        for (i1, j1, v1) in self.triplets() {
            for (i2, j2, v2) in other.triplets() {
                trip.push((i1 * other.rows + i2, j1 * other.cols + j2, v1 * v2));
            }
        }
        Self::from_triplets(self.rows * other.rows, self.cols * other.cols, trip, self.signed || other.signed)
            .expect("kronecker product of valid matrices")
    }

    /// Stacks blocks with equal column counts on top of each other.
    pub fn vstack(blocks: &[SparseMatrix]) -> Result<Self> {
        let cols = blocks.first().map_or(0, |b| b.cols);
        let mut trip = Vec::new();
        let mut offset = 0;
        let mut signed = false;
        for b in blocks {
            if b.cols != cols {
                return Err(Error::DimensionMismatch(format!("vstack of blocks with {} and {} columns", cols, b.cols)));
            }
            trip.extend(b.triplets().map(|(i, j, v)| (i + offset, j, v)));
            offset += b.rows;
            signed |= b.signed;
        }
        Self::from_triplets(offset, cols, trip, signed)
    }

    /// Submatrix on the given (sorted) rows and columns.
    pub fn submatrix(&self, rows: &SupportSet, cols: &SupportSet) -> Self {
        let mut col_map = vec![usize::MAX; self.cols];
        for (new, old) in cols.iter().enumerate() {
            col_map[old] = new;
        }
        let mut trip = Vec::new();
        for (new_i, old_i) in rows.iter().enumerate() {
            let (c, v) = self.row(old_i);
            for (&j, &x) in c.iter().zip(v) {
                if col_map[j] != usize::MAX {
                    trip.push((new_i, col_map[j], x));
                }
            }
        }
        Self::from_triplets(rows.len(), cols.len(), trip, self.signed).expect("submatrix of valid matrix")
    }

    /// Applies `f` to every stored value, keeping the pattern.
    pub(crate) fn map_values(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.rows {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                out.values[p] = f(i, self.col_idx[p], self.values[p]);
            }
        }
        out
    }

    pub fn same_pattern(&self, other: &SparseMatrix) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.row_ptr == other.row_ptr
            && self.col_idx == other.col_idx
    }

    pub fn is_integer(&self) -> bool {
        self.values.iter().all(|v| v.fract() == 0.0 && v.abs() < 1e15)
    }

    /// Dense integer copy, `None` if any value is not integral.
    pub fn to_integer_dense(&self) -> Option<Vec<Vec<i64>>> {
        if !self.is_integer() {
            return None;
        }
        let mut out = vec![vec![0i64; self.cols]; self.rows];
        for (i, j, v) in self.triplets() {
            out[i][j] = v as i64;
        }
        Some(out)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.cols]; self.rows];
        for (i, j, v) in self.triplets() {
            out[i][j] = v;
        }
        out
    }

    /// Exact integer product `self * other`, `None` if either is non-integral.
    pub fn integer_product(&self, other: &SparseMatrix) -> Option<Vec<(usize, usize, i64)>> {
        if self.cols != other.rows || !self.is_integer() || !other.is_integer() {
            return None;
        }
        let mut out = Vec::new();
        let mut acc = vec![0i64; other.cols];
        let mut touched = Vec::new();
        for i in 0..self.rows {
            let (c, v) = self.row(i);
            for (&k, &a) in c.iter().zip(v) {
                let (c2, v2) = other.row(k);
                for (&j, &b) in c2.iter().zip(v2) {
                    if acc[j] == 0 {
                        touched.push(j);
                    }
                    acc[j] += a as i64 * b as i64;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                if acc[j] != 0 {
                    out.push((i, j, acc[j]));
                }
                acc[j] = 0;
            }
            touched.clear();
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn support_set_rejects_unsorted_and_out_of_range() {
        assert!(SupportSet::new(vec![2, 1], 5).is_err());
        assert!(SupportSet::new(vec![1, 1], 5).is_err());
        assert!(SupportSet::new(vec![1, 5], 5).is_err());
        let s = SupportSet::from_unsorted(vec![4, 1, 1, 3], 5).unwrap();
        assert_eq!(s.as_slice(), &[1, 3, 4]);
        assert_eq!(s.complement(5).as_slice(), &[0, 2]);
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let m =
            SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 0, 2.0), (1, 1, 1.0), (1, 1, -1.0)], true).unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 0), 3.0);
        assert!(SparseMatrix::from_triplets(1, 1, vec![(0, 0, -1.0)], false).is_err());
    }

    #[test]
    fn kron_of_identity_and_ones() {
        let k = SparseMatrix::identity(2).kron(&SparseMatrix::ones_row(3));
        assert_eq!((k.rows(), k.cols()), (2, 6));
        assert_eq!(k.to_dense()[1], vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    }
}
