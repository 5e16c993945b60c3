//! Compressed sparse column storage and the handful of kernels the solver needs.

use crate::scalar::Scalar;

/// Sparse matrix in compressed sparse column (CSC) form.
///
/// Row indices within each column are sorted and unique.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix<T> {
    nrows: usize,
    ncols: usize,
    colptr: Vec<usize>,
    rowind: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CscMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            colptr: vec![0; ncols + 1],
            rowind: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            colptr: (0..=n).collect(),
            rowind: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed;
    /// explicit zeros that result from summation are kept so the sparsity pattern
    /// depends only on the triplet positions.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut counts = vec![0usize; ncols + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            counts[c + 1] += 1;
        }
        for c in 0..ncols {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut rows = vec![0usize; triplets.len()];
        let mut vals = vec![T::zero(); triplets.len()];
        for &(r, c, v) in triplets {
            let k = next[c];
            rows[k] = r;
            vals[k] = v;
            next[c] += 1;
        }

        let mut colptr = Vec::with_capacity(ncols + 1);
        let mut rowind = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        colptr.push(0);
        let mut scratch: Vec<(usize, T)> = Vec::new();
        for c in 0..ncols {
            scratch.clear();
            scratch.extend((counts[c]..counts[c + 1]).map(|k| (rows[k], vals[k])));
            scratch.sort_by_key(|&(r, _)| r);
            for &(r, v) in &scratch {
                if rowind.len() > colptr[c] && *rowind.last().unwrap() == r {
                    *values.last_mut().unwrap() += v;
                } else {
                    rowind.push(r);
                    values.push(v);
                }
            }
            colptr.push(rowind.len());
        }
        Self {
            nrows,
            ncols,
            colptr,
            rowind,
            values,
        }
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

    pub fn colptr(&self) -> &[usize] {
        &self.colptr
    }

    pub fn rowind(&self) -> &[usize] {
        &self.rowind
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    /// Iterates `(row, col, value)` over stored entries in column-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.ncols).flat_map(move |c| {
            (self.colptr[c]..self.colptr[c + 1]).map(move |k| (self.rowind[k], c, self.values[k]))
        })
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        let range = self.colptr[col]..self.colptr[col + 1];
        match self.rowind[range.clone()].binary_search(&row) {
            Ok(k) => self.values[range.start + k],
            Err(_) => T::zero(),
        }
    }

    pub fn transpose(&self) -> Self {
        let trip: Vec<_> = self.triplets().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &trip)
    }

    /// Keeps only the entries on or above the diagonal.
    pub fn upper_triangle(&self) -> Self {
        let trip: Vec<_> = self.triplets().filter(|&(r, c, _)| r <= c).collect();
        Self::from_triplets(self.nrows, self.ncols, &trip)
    }

    pub fn is_upper_triangular(&self) -> bool {
        self.triplets().all(|(r, c, _)| r <= c)
    }

    /// `out = self * x`
    pub fn mul_vec_into(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(out.len(), self.nrows);
        out.iter_mut().for_each(|o| *o = T::zero());
        for c in 0..self.ncols {
            let xc = x[c];
            if xc == T::zero() {
                continue;
            }
            for k in self.colptr[c]..self.colptr[c + 1] {
                out[self.rowind[k]] += self.values[k] * xc;
            }
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.nrows];
        self.mul_vec_into(x, &mut out);
        out
    }

    /// `out = selfᵀ * x`
    pub fn tr_mul_vec_into(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(out.len(), self.ncols);
        for c in 0..self.ncols {
            let mut acc = T::zero();
            for k in self.colptr[c]..self.colptr[c + 1] {
                acc += self.values[k] * x[self.rowind[k]];
            }
            out[c] = acc;
        }
    }

    pub fn tr_mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.ncols];
        self.tr_mul_vec_into(x, &mut out);
        out
    }

    /// `out = S * x` where `self` holds the upper triangle of the symmetric matrix `S`.
    pub fn sym_upper_mul_vec_into(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(self.nrows, self.ncols);
        out.iter_mut().for_each(|o| *o = T::zero());
        for c in 0..self.ncols {
            for k in self.colptr[c]..self.colptr[c + 1] {
                let r = self.rowind[k];
                let v = self.values[k];
                out[r] += v * x[c];
                if r != c {
                    out[c] += v * x[r];
                }
            }
        }
    }

    pub fn sym_upper_mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.nrows];
        self.sym_upper_mul_vec_into(x, &mut out);
        out
    }

    /// Scales in place: `self ← diag(left) · self · diag(right)`.
    pub(crate) fn scale_rows_cols(&mut self, left: &[T], right: &[T]) {
        for c in 0..self.ncols {
            for k in self.colptr[c]..self.colptr[c + 1] {
                self.values[k] = self.values[k] * left[self.rowind[k]] * right[c];
            }
        }
    }

    /// Infinity norm of each column.
    pub(crate) fn col_norms_inf(&self) -> Vec<T> {
        (0..self.ncols)
            .map(|c| {
                self.values[self.colptr[c]..self.colptr[c + 1]]
                    .iter()
                    .fold(T::zero(), |m, v| m.max(v.abs()))
            })
            .collect()
    }

    /// Infinity norm of each row.
    pub(crate) fn row_norms_inf(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.nrows];
        for (r, _, v) in self.triplets() {
            out[r] = out[r].max(v.abs());
        }
        out
    }

    /// Column infinity norms of the full symmetric matrix represented by this upper triangle.
    pub(crate) fn sym_upper_col_norms_inf(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.ncols];
        for (r, c, v) in self.triplets() {
            out[c] = out[c].max(v.abs());
            out[r] = out[r].max(v.abs());
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.ncols]; self.nrows];
        for (r, c, v) in self.triplets() {
            d[r][c] = v;
        }
        d
    }
}
