//! Sparse LDLᵀ factorization of symmetric quasi-definite matrices.
//!
//! Up-looking factorization driven by the elimination tree. The symbolic phase
//! (ordering, tree, column counts) is computed once; numeric refactorization
//! reuses it whenever only the values change.

use crate::error::{Error, Result};
use crate::qp::ordering::{inverse_permutation, minimum_degree};
use crate::scalar::Scalar;
use crate::sparse::CscMatrix;

const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct LdlFactor<T> {
    n: usize,
    perm: Vec<usize>,
    // permuted upper triangle and, for each input entry, its slot in it
    pa: CscMatrix<T>,
    slot: Vec<usize>,
    etree: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<T>,
    d: Vec<T>,
    dinv: Vec<T>,
    // expected pivot signs in permuted order
    signs: Vec<i8>,
    reg_eps: T,
    reg_delta: T,
    regularized: usize,
    work: Vec<T>,
}

impl<T: Scalar> LdlFactor<T> {
    /// Factors the symmetric matrix whose upper triangle is `upper`.
    ///
    /// `signs[i]` is the expected sign of pivot `i` (+1 or −1). A pivot that comes out
    /// with the wrong sign or magnitude below `reg_eps` is replaced by `signs[i]·reg_delta`.
    pub fn new(upper: &CscMatrix<T>, signs: &[i8], reg_eps: T, reg_delta: T) -> Result<Self> {
        let n = upper.ncols();
        if upper.nrows() != n || signs.len() != n {
            return Err(Error::InvalidParameter("LDL input must be square".into()));
        }
        if !upper.is_upper_triangular() {
            return Err(Error::InvalidParameter("LDL input must be upper triangular".into()));
        }
        let perm = minimum_degree(upper);
        let iperm = inverse_permutation(&perm);

        let trip: Vec<_> = upper
            .triplets()
            .map(|(r, c, v)| {
                let (a, b) = (iperm[r], iperm[c]);
                (a.min(b), a.max(b), v)
            })
            .collect();
        let pa = CscMatrix::from_triplets(n, n, &trip);
        let slot = trip
            .iter()
            .map(|&(r, c, _)| {
                let range = pa.colptr()[c]..pa.colptr()[c + 1];
                range.start + pa.rowind()[range].binary_search(&r).unwrap()
            })
            .collect();
        let psigns = perm.iter().map(|&p| signs[p]).collect();

        let (etree, lnz) = elimination_tree(&pa);
        let mut lp = vec![0usize; n + 1];
        for i in 0..n {
            lp[i + 1] = lp[i] + lnz[i];
        }
        let total = lp[n];

        let mut f = Self {
            n,
            perm,
            pa,
            slot,
            etree,
            lp,
            li: vec![0; total],
            lx: vec![T::zero(); total],
            d: vec![T::zero(); n],
            dinv: vec![T::zero(); n],
            signs: psigns,
            reg_eps,
            reg_delta,
            regularized: 0,
            work: vec![T::zero(); n],
        };
        f.factor_numeric()?;
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Nonzeros in the strictly lower factor `L`.
    pub fn nnz_l(&self) -> usize {
        self.lp[self.n]
    }

    /// Number of pivots replaced by static regularization in the last factorization.
    pub fn regularized_pivots(&self) -> usize {
        self.regularized
    }

    /// Refactors with new values on the same sparsity pattern as the original input.
    pub fn refactor(&mut self, upper: &CscMatrix<T>) -> Result<()> {
        if upper.nnz() != self.slot.len() {
            return Err(Error::InvalidParameter("refactor: pattern changed".into()));
        }
        let vals = self.pa.values_mut();
        vals.iter_mut().for_each(|v| *v = T::zero());
        for (k, (_, _, v)) in upper.triplets().enumerate() {
            vals[self.slot[k]] += v;
        }
        self.factor_numeric()
    }

    fn factor_numeric(&mut self) -> Result<()> {
        let n = self.n;
        let ap = self.pa.colptr();
        let ai = self.pa.rowind();
        let ax = self.pa.values();

        let mut y_vals = vec![T::zero(); n];
        let mut y_used = vec![false; n];
        let mut y_idx: Vec<usize> = Vec::with_capacity(n);
        let mut elim: Vec<usize> = Vec::with_capacity(n);
        let mut next_space: Vec<usize> = self.lp[..n].to_vec();
        self.regularized = 0;

        for k in 0..n {
            y_idx.clear();
            self.d[k] = T::zero();
            for p in ap[k]..ap[k + 1] {
                let b = ai[p];
                if b == k {
                    self.d[k] = ax[p];
                    continue;
                }
                y_vals[b] = ax[p];
                if y_used[b] {
                    continue;
                }
                // walk the etree from b up to k, collecting the reach in topological order
                elim.clear();
                let mut next = b;
                while next != NONE && next < k && !y_used[next] {
                    y_used[next] = true;
                    elim.push(next);
                    next = self.etree[next];
                }
                y_idx.extend(elim.iter().rev());
            }

            for &c in y_idx.iter().rev() {
                let yc = y_vals[c];
                let end = next_space[c];
                for j in self.lp[c]..end {
                    y_vals[self.li[j]] -= self.lx[j] * yc;
                }
                let l = yc * self.dinv[c];
                self.li[end] = k;
                self.lx[end] = l;
                self.d[k] -= yc * l;
                next_space[c] += 1;
                y_vals[c] = T::zero();
                y_used[c] = false;
            }

            let s = T::lit(self.signs[k] as f64);
            if !(self.d[k] * s > self.reg_eps) {
                self.d[k] = s * self.reg_delta;
                self.regularized += 1;
            }
            if !self.d[k].is_finite() {
                return Err(Error::InvalidValue(format!("LDL pivot {k} is not finite")));
            }
            self.dinv[k] = T::one() / self.d[k];
        }
        Ok(())
    }

    /// Solves `K x = b` in place.
    pub fn solve_in_place(&mut self, b: &mut [T]) {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        let x = &mut self.work;
        for k in 0..n {
            x[k] = b[self.perm[k]];
        }
        for i in 0..n {
            let xi = x[i];
            if xi != T::zero() {
                for j in self.lp[i]..self.lp[i + 1] {
                    x[self.li[j]] -= self.lx[j] * xi;
                }
            }
        }
        for i in 0..n {
            x[i] *= self.dinv[i];
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                acc -= self.lx[j] * x[self.li[j]];
            }
            x[i] = acc;
        }
        for k in 0..n {
            b[self.perm[k]] = x[k];
        }
    }
}

/// Elimination tree and per-column nonzero counts of `L` for an upper-triangular CSC pattern.
fn elimination_tree<T: Scalar>(a: &CscMatrix<T>) -> (Vec<usize>, Vec<usize>) {
    let n = a.ncols();
    let mut work = vec![NONE; n];
    let mut lnz = vec![0usize; n];
    let mut etree = vec![NONE; n];
    for j in 0..n {
        work[j] = j;
        for p in a.colptr()[j]..a.colptr()[j + 1] {
            let mut i = a.rowind()[p];
            while work[i] != j {
                if etree[i] == NONE {
                    etree[i] = j;
                }
                lnz[i] += 1;
                work[i] = j;
                i = etree[i];
            }
        }
    }
    (etree, lnz)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mul(upper: &CscMatrix<f64>, x: &[f64]) -> Vec<f64> {
        upper.sym_upper_mul_vec(x)
    }

    #[test]
    fn solves_quasi_definite_system() {
        // [[4, 1, 2], [1, 3, 0], [2, 0, -1]]
        let u = CscMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 4.0), (0, 1, 1.0), (1, 1, 3.0), (0, 2, 2.0), (2, 2, -1.0)],
        );
        let mut f = LdlFactor::new(&u, &[1, 1, -1], 1e-14, 1e-9).unwrap();
        let b = [1.0, 2.0, 3.0];
        let mut x = b;
        f.solve_in_place(&mut x);
        let r = dense_mul(&u, &x);
        for i in 0..3 {
            assert!((r[i] - b[i]).abs() < 1e-12);
        }
        assert_eq!(f.regularized_pivots(), 0);
    }

    #[test]
    fn refactor_with_new_values() {
        let mut trip = vec![];
        let n = 30;
        for i in 0..n {
            trip.push((i, i, 4.0 + i as f64));
            if i + 1 < n {
                trip.push((i, i + 1, -1.0));
            }
            if i + 7 < n {
                trip.push((i, i + 7, 0.5));
            }
        }
        let u = CscMatrix::from_triplets(n, n, &trip);
        let mut f = LdlFactor::new(&u, &vec![1; n], 1e-14, 1e-9).unwrap();
        let trip2: Vec<_> = trip.iter().map(|&(r, c, v)| (r, c, if r == c { v * 2.0 } else { v })).collect();
        let u2 = CscMatrix::from_triplets(n, n, &trip2);
        f.refactor(&u2).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = b.clone();
        f.solve_in_place(&mut x);
        let r = dense_mul(&u2, &x);
        for i in 0..n {
            assert!((r[i] - b[i]).abs() < 1e-12);
        }
    }
}
