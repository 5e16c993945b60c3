//! Standard-form sparse QP
//!
//! ```text
//! minimize    ½ zᵀ P z + qᵀ z
//! subject to  l ≤ A z ≤ u
//! ```
//!
//! together with the reformulation of the soiling decomposition into this form and
//! an operator-splitting solver for it.

mod admm;
pub mod ldl;
pub mod ordering;
mod reformulate;

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};
use crate::sparse::CscMatrix;

pub use admm::{solve, Solution, SolveReport, SolveStatus, SolverSettings, ResidualSample};
pub use reformulate::{reformulate, QpLayout};

/// A convex QP in standard form. `p` stores only the upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardQp<T> {
    pub p: CscMatrix<T>,
    pub q: Vec<T>,
    pub a: CscMatrix<T>,
    pub l: Vec<T>,
    pub u: Vec<T>,
}

impl<T: Scalar> StandardQp<T> {
    pub fn new(p: CscMatrix<T>, q: Vec<T>, a: CscMatrix<T>, l: Vec<T>, u: Vec<T>) -> Result<Self> {
        let qp = Self { p, q, a, l, u };
        qp.validate()?;
        Ok(qp)
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn m(&self) -> usize {
        self.l.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.q.len();
        let m = self.l.len();
        if self.p.nrows() != n || self.p.ncols() != n {
            return Err(Error::InvalidParameter(format!(
                "P is {}x{}, expected {n}x{n}",
                self.p.nrows(),
                self.p.ncols()
            )));
        }
        if !self.p.is_upper_triangular() {
            return Err(Error::InvalidParameter("P must be stored as its upper triangle".into()));
        }
        if self.a.ncols() != n || self.a.nrows() != m || self.u.len() != m {
            return Err(Error::InvalidParameter(format!(
                "A is {}x{}, l has {m} and u has {} entries, n = {n}",
                self.a.nrows(),
                self.a.ncols(),
                self.u.len()
            )));
        }
        if let Some(i) = (0..m).find(|&i| !(self.l[i] <= self.u[i]) || self.l[i] == T::infinity() || self.u[i] == T::neg_infinity()) {
            return Err(Error::InvalidParameter(format!(
                "bounds of row {i} are inconsistent: [{}, {}]",
                self.l[i], self.u[i]
            )));
        }
        if self.q.iter().any(|v| !v.is_finite()) || self.p.values().iter().chain(self.a.values()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue("QP data must be finite".into()));
        }
        Ok(())
    }

    pub fn objective(&self, z: &[T]) -> T {
        let pz = self.p.sym_upper_mul_vec(z);
        T::lit(0.5) * dot(z, &pz) + dot(&self.q, z)
    }

    /// Writes the problem in a matrix-market style text format:
    ///
    /// ```text
    /// %%SoilQP 1
    /// <n> <m>
    /// P <nnz>            followed by nnz lines "<row> <col> <value>" (1-based, upper triangle)
    /// A <nnz>            followed by nnz lines "<row> <col> <value>" (1-based)
    /// q                  followed by n values, one per line
    /// l                  followed by m values (inf/-inf allowed)
    /// u                  followed by m values
    /// ```
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "%%SoilQP 1")?;
        writeln!(w, "{} {}", self.n(), self.m())?;
        for (name, mat) in [("P", &self.p), ("A", &self.a)] {
            writeln!(w, "{name} {}", mat.nnz())?;
            for (r, c, v) in mat.triplets() {
                writeln!(w, "{} {} {}", r + 1, c + 1, v.to_f64_lossy())?;
            }
        }
        for (name, vec) in [("q", &self.q), ("l", &self.l), ("u", &self.u)] {
            writeln!(w, "{name}")?;
            for v in vec.iter() {
                writeln!(w, "{}", v.to_f64_lossy())?;
            }
        }
        Ok(())
    }

    pub fn read_dump<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = move || -> Result<String> {
            loop {
                match lines.next() {
                    Some(l) => {
                        let l = l?;
                        let t = l.trim();
                        if !t.is_empty() {
                            return Ok(t.to_string());
                        }
                    }
                    None => return Err(Error::Parse("unexpected end of QP dump".into())),
                }
            }
        };
        let bad = |what: &str| Error::Parse(format!("QP dump: bad {what}"));
        if next()? != "%%SoilQP 1" {
            return Err(bad("header"));
        }
        let dims = next()?;
        let mut it = dims.split_whitespace().map(|s| s.parse::<usize>());
        let (n, m) = match (it.next(), it.next()) {
            (Some(Ok(n)), Some(Ok(m))) => (n, m),
            _ => return Err(bad("dimensions")),
        };
        let mut read_matrix = |name: &str, rows: usize| -> Result<CscMatrix<T>> {
            let head = next()?;
            let nnz: usize = head
                .strip_prefix(name)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| bad(name))?;
            let mut trip = Vec::with_capacity(nnz);
            for _ in 0..nnz {
                let line = next()?;
                let f: Vec<&str> = line.split_whitespace().collect();
                if f.len() != 3 {
                    return Err(bad("triplet"));
                }
                let r: usize = f[0].parse().map_err(|_| bad("row index"))?;
                let c: usize = f[1].parse().map_err(|_| bad("column index"))?;
                let v: f64 = f[2].parse().map_err(|_| bad("value"))?;
                if r == 0 || c == 0 || r > rows || c > n {
                    return Err(bad("index range"));
                }
                trip.push((r - 1, c - 1, T::lit(v)));
            }
            Ok(CscMatrix::from_triplets(rows, n, &trip))
        };
        let p = read_matrix("P", n)?;
        let a = read_matrix("A", m)?;
        let mut read_vec = |name: &str, len: usize| -> Result<Vec<T>> {
            if next()? != name {
                return Err(bad(name));
            }
            (0..len)
                .map(|_| {
                    next()?
                        .parse::<f64>()
                        .map(T::lit)
                        .map_err(|_| bad("vector entry"))
                })
                .collect()
        };
        let q = read_vec("q", n)?;
        let l = read_vec("l", m)?;
        let u = read_vec("u", m)?;
        Self::new(p, q, a, l, u)
    }
}
