//! Compressed sparse rows and a preconditioned BiCGSTAB for the implicit
//! stepper.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Square sparse matrix in CSR layout.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Csr {
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
    /// Rows sum to zero in exact arithmetic; rows are then applied as
    /// `Σ a_ij (x_j - x_i)` so constants map to exactly zero.
    pub zero_row_sum: bool,
}

impl Csr {
    pub fn with_capacity(rows: usize, nnz: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(rows + 1);
        row_ptr.push(0);
        Self { row_ptr, cols: Vec::with_capacity(nnz), vals: Vec::with_capacity(nnz), zero_row_sum: false }
    }

    /// Marks the rows as summing to zero (difference operators).
    pub fn with_zero_row_sum(mut self) -> Self {
        self.zero_row_sum = true;
        self
    }

    /// Appends a row, merging repeated columns.
    pub fn push_row(&mut self, entries: &[(usize, f64)]) {
        let start = self.cols.len();
        for &(c, v) in entries {
            if let Some(k) = self.cols[start..].iter().position(|&x| x == c) {
                self.vals[start + k] += v;
            } else {
                self.cols.push(c);
                self.vals.push(v);
            }
        }
        self.row_ptr.push(self.cols.len());
    }

    pub fn rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    #[inline]
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    #[inline]
    pub fn apply_row(&self, i: usize, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        if self.zero_row_sum {
            let xi = x[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * (x[self.cols[k]] - xi);
            }
        } else {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
        }
        acc
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.apply_row(i, x);
        }
    }

    pub fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows()];
        self.apply(x, &mut y);
        y
    }

    /// Coefficient at (i, j), zero when absent.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).filter(|&(c, _)| c == j).map(|(_, v)| v).sum()
    }

    /// `self · other`.
    pub fn compose(&self, other: &Csr) -> Csr {
        let mut out = Csr::with_capacity(self.rows(), self.cols.len() * 3);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for i in 0..self.rows() {
            scratch.clear();
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    scratch.push((j, a * b));
                }
            }
            out.push_row(&scratch);
        }
        out.zero_row_sum = other.zero_row_sum;
        out
    }
}

/// Solves `A x = b` where `A` is given as a matrix-free closure, with a
/// diagonal (Jacobi) preconditioner. `x` holds the initial guess on entry.
pub fn bicgstab<F>(apply: F, diag: &[f64], b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<usize>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let dot = |a: &[f64], c: &[f64]| a.iter().zip(c).map(|(p, q)| p * q).sum::<f64>();
    let norm = |a: &[f64]| libm::sqrt(dot(a, a));
    let bnorm = norm(b).max(1e-300);

    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    if norm(&r) / bnorm < tol {
        return Ok(0);
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() < 1e-300 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            y[i] = p[i] / diag[i];
        }
        apply(&y, &mut v);
        alpha = rho / dot(&r_hat, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) / bnorm < tol {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            return Ok(it);
        }
        for i in 0..n {
            z[i] = s[i] / diag[i];
        }
        apply(&z, &mut t);
        omega = dot(&t, &s) / dot(&t, &t);
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm(&r) / bnorm < tol {
            return Ok(it);
        }
    }
    let mut res = vec![0.0; n];
    apply(x, &mut res);
    let residual = res.iter().zip(b).map(|(a, c)| (a - c) * (a - c)).sum::<f64>();
    Err(Error::SolverDiverged { iterations: max_iter, residual: libm::sqrt(residual) / bnorm })
}
