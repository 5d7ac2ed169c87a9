//! Compressed sparse row matrices over complex numbers.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<Complex64>,
}

impl CsrMatrix {
    /// Build from (row, col, value) triplets; duplicates are summed and exact
    /// zeros dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, Complex64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}×{ncols}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                rows.push(r);
                last = Some((r, c));
            }
        }
        let mut keep_idx = Vec::with_capacity(indices.len());
        let mut keep_val = Vec::with_capacity(values.len());
        for ((r, c), v) in rows.into_iter().zip(indices).zip(values) {
            if v != Complex64::new(0.0, 0.0) {
                indptr[r + 1] += 1;
                keep_idx.push(c);
                keep_val.push(v);
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Self { nrows, ncols, indptr, indices: keep_idx, values: keep_val }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self::from_triplets(nrows, ncols, Vec::new())
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        let n = diag.len();
        Self::from_triplets(n, n, diag.iter().enumerate().map(|(i, &v)| (i, i, v)).collect())
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

    /// Iterate over (col, value) pairs of one row.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.row(r).find(|&(j, _)| j == c).map(|(_, v)| v).unwrap_or_default()
    }

    /// `out = self · x`.
    pub fn matvec_into(&self, x: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(out.len(), self.nrows);
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *o = acc;
        }
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.nrows];
        self.matvec_into(x, &mut out);
        out
    }

    /// `self · rho` for a dense right-hand side.
    pub fn mul_dense(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(self.nrows, rho.ncols());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                for col in 0..rho.ncols() {
                    out[(r, col)] += v * rho[(c, col)];
                }
            }
        }
        out
    }

    /// `rho · self†` for a dense left-hand side.
    pub fn dense_mul_adjoint(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(rho.nrows(), self.nrows);
        for b in 0..self.nrows {
            for (c, v) in self.row(b) {
                let vc = v.conj();
                for a in 0..rho.nrows() {
                    out[(a, b)] += rho[(a, c)] * vc;
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                t.push((c, r, v.conj()));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, t)
    }

    pub fn matmul(&self, other: &CsrMatrix) -> Self {
        assert_eq!(self.ncols, other.nrows, "matmul shape mismatch");
        let mut t = Vec::new();
        for r in 0..self.nrows {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    t.push((r, c, a * b));
                }
            }
        }
        Self::from_triplets(self.nrows, other.ncols, t)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn add(&self, other: &CsrMatrix) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols), "add shape mismatch");
        let mut t = Vec::with_capacity(self.nnz() + other.nnz());
        for m in [self, other] {
            for r in 0..m.nrows {
                t.extend(m.row(r).map(|(c, v)| (r, c, v)));
            }
        }
        Self::from_triplets(self.nrows, self.ncols, t)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }

    /// Largest |A_ij − conj(A_ji)|.
    pub fn hermiticity_deviation(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    /// Upper bound on the spectral norm, √(‖A‖₁ ‖A‖∞).
    pub fn norm_bound(&self) -> f64 {
        let mut col = vec![0.0f64; self.ncols];
        let mut row_max = 0.0f64;
        for r in 0..self.nrows {
            let mut s = 0.0;
            for (c, v) in self.row(r) {
                s += v.norm();
                col[c] += v.norm();
            }
            row_max = row_max.max(s);
        }
        let col_max = col.into_iter().fold(0.0, f64::max);
        (row_max * col_max).sqrt()
    }

    /// Squared Frobenius norm.
    pub fn frobenius_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// A sparse matrix tagged with the particle-number sectors it connects.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    pub matrix: CsrMatrix,
    /// Particle number of the domain sector.
    pub domain: usize,
    /// Particle number of the codomain sector.
    pub codomain: usize,
    hermitian: bool,
}

impl SparseOperator {
    pub fn new(matrix: CsrMatrix, domain: usize, codomain: usize) -> Self {
        Self { matrix, domain, codomain, hermitian: false }
    }

    /// Tag as hermitian after checking numerically.
    pub fn hermitian(matrix: CsrMatrix, sector: usize) -> Result<Self> {
        let deviation = matrix.hermiticity_deviation();
        let scale = matrix.norm_bound().max(1.0);
        if deviation > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self { matrix, domain: sector, codomain: sector, hermitian: true })
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.matrix.matvec(x)
    }
}
