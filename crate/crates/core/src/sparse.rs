//! Compressed-row storage for the assembled operators and a thin wrapper
//! around faer's sparse LU.

use std::io::Write;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::MatMut;

use crate::error::{Error, Result};

/// Square CSR matrix. Column indices are sorted within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row entry lists. Duplicate columns are summed, exact
    /// zeros dropped.
    pub fn from_rows(n: usize, rows: impl IntoIterator<Item = Vec<(usize, f64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                debug_assert!(c < n);
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        assert_eq!(row_ptr.len(), n + 1, "row count mismatch");
        let mut m = Self { n, row_ptr, cols, vals };
        m.drop_zeros();
        m
    }

    fn drop_zeros(&mut self) {
        let mut row_ptr = Vec::with_capacity(self.n + 1);
        let mut cols = Vec::with_capacity(self.cols.len());
        let mut vals = Vec::with_capacity(self.vals.len());
        row_ptr.push(0);
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.vals[k] != 0.0 {
                    cols.push(self.cols[k]);
                    vals.push(self.vals[k]);
                }
            }
            row_ptr.push(cols.len());
        }
        self.row_ptr = row_ptr;
        self.cols = cols;
        self.vals = vals;
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn row_nnz(&self, r: usize) -> usize {
        self.row_ptr[r + 1] - self.row_ptr[r]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(cc, _)| cc == c).map_or(0.0, |(_, v)| v)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    /// New matrix with every row rewritten by `f(row, entries)`.
    pub fn map_rows(&self, mut f: impl FnMut(usize, &mut Vec<(usize, f64)>)) -> Self {
        let rows = (0..self.n).map(|r| {
            let mut e: Vec<(usize, f64)> = self.row(r).collect();
            f(r, &mut e);
            e
        });
        Self::from_rows(self.n, rows.collect::<Vec<_>>())
    }

    /// Coordinate text dump, one `row col value` triple per line.
    pub fn write_coordinate<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "% {} {} {}", self.n, self.n, self.nnz())?;
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                writeln!(w, "{r} {c} {v:.17e}")?;
            }
        }
        Ok(())
    }

    pub fn factorize(&self) -> Result<LuFactor> {
        LuFactor::new(self)
    }
}

/// LU factors of a square sparse matrix, computed once and reused.
pub struct LuFactor {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl std::fmt::Debug for LuFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LuFactor").field("n", &self.n).finish_non_exhaustive()
    }
}

impl LuFactor {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let mut triplets = Vec::with_capacity(a.nnz());
        for r in 0..a.n {
            for (c, v) in a.row(r) {
                triplets.push(Triplet::new(r, c, v));
            }
        }
        let csc = SparseColMat::<usize, f64>::try_new_from_triplets(a.n, a.n, &triplets)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        let lu = csc.sp_lu().map_err(|e| Error::Factorization(format!("{e:?}")))?;
        Ok(Self { n: a.n, lu })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) -> Result<()> {
        assert_eq!(rhs.len(), self.n);
        self.lu.solve_in_place(MatMut::from_column_major_slice_mut(rhs, self.n, 1));
        if let Some(node) = rhs.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { level: 0, node });
        }
        Ok(())
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }
}
