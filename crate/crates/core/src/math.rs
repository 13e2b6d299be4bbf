//! Scalar math for `no_std` plus small symmetric-matrix helpers.

use core::ops::{Add, Sub};

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

pub use core::f64::consts::{E, PI, TAU};

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}
#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}
#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}
#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}
#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}
#[inline]
pub fn powi(x: f64, n: i32) -> f64 {
    let mut acc = 1.0;
    for _ in 0..n.unsigned_abs() {
        acc *= x;
    }
    if n < 0 {
        1.0 / acc
    } else {
        acc
    }
}

/// Symmetric 2×2 tensor in coordinate components.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const ZERO: Sym2 = Sym2 { xx: 0.0, xy: 0.0, yy: 0.0 };

    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Self { xx, xy, yy }
    }

    pub const fn diag(xx: f64, yy: f64) -> Self {
        Self { xx, xy: 0.0, yy }
    }

    pub fn outer(a: [f64; 2]) -> Self {
        Self::new(a[0] * a[0], a[0] * a[1], a[1] * a[1])
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(self.xx * s, self.xy * s, self.yy * s)
    }

    pub fn det(self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn trace(self) -> f64 {
        self.xx + self.yy
    }

    pub fn inverse(self) -> Self {
        let d = self.det();
        Self::new(self.yy / d, -self.xy / d, self.xx / d)
    }

    /// `T(a, b)`.
    pub fn bilinear(self, a: [f64; 2], b: [f64; 2]) -> f64 {
        self.xx * a[0] * b[0] + self.xy * (a[0] * b[1] + a[1] * b[0]) + self.yy * a[1] * b[1]
    }

    pub fn apply(self, a: [f64; 2]) -> [f64; 2] {
        [self.xx * a[0] + self.xy * a[1], self.xy * a[0] + self.yy * a[1]]
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(self) -> [f64; 2] {
        let m = 0.5 * (self.xx + self.yy);
        let d = 0.5 * (self.xx - self.yy);
        let r = sqrt(d * d + self.xy * self.xy);
        [m - r, m + r]
    }

    /// Smallest λ with `det(self - λ g) = 0` for SPD `g`, i.e. the smallest
    /// eigenvalue of `self` measured in the metric `g`.
    pub fn min_eigenvalue_in(self, g: Sym2) -> f64 {
        // Whiten with the Cholesky factor of g: g = L Lᵀ, L = [[l11, 0], [l21, l22]].
        let l11 = sqrt(g.xx);
        let l21 = g.xy / l11;
        let l22 = sqrt(g.yy - l21 * l21);
        // C = L⁻¹ self L⁻ᵀ
        let i11 = 1.0 / l11;
        let i22 = 1.0 / l22;
        let i21 = -l21 * i11 * i22;
        let row = |a: f64, b: f64| -> [f64; 2] {
            // (a, b) row of L⁻¹ times self
            [a * self.xx + b * self.xy, a * self.xy + b * self.yy]
        };
        let r1 = row(i11, 0.0);
        let r2 = row(i21, i22);
        let c = Sym2::new(r1[0] * i11, r1[0] * i21 + r1[1] * i22, r2[0] * i21 + r2[1] * i22);
        c.eigenvalues()[0]
    }

    /// `|T|²_g = g^{ik} g^{jl} T_ij T_kl`, with `ginv` the inverse metric.
    pub fn norm_sq_in(self, ginv: Sym2) -> f64 {
        let a = ginv.xx * self.xx + ginv.xy * self.xy;
        let b = ginv.xx * self.xy + ginv.xy * self.yy;
        let c = ginv.xy * self.xx + ginv.yy * self.xy;
        let d = ginv.xy * self.xy + ginv.yy * self.yy;
        // tr((G⁻¹T)²)
        a * a + 2.0 * b * c + d * d
    }

    /// `g^{ij} T_ij`.
    pub fn trace_in(self, ginv: Sym2) -> f64 {
        ginv.xx * self.xx + 2.0 * ginv.xy * self.xy + ginv.yy * self.yy
    }
}

impl Add for Sym2 {
    type Output = Sym2;
    fn add(self, o: Sym2) -> Sym2 {
        Sym2::new(self.xx + o.xx, self.xy + o.xy, self.yy + o.yy)
    }
}

impl Sub for Sym2 {
    type Output = Sym2;
    fn sub(self, o: Sym2) -> Sym2 {
        Sym2::new(self.xx - o.xx, self.xy - o.xy, self.yy - o.yy)
    }
}

/// Dense symmetric matrix stored row-major, for the small local problems of
/// graph curvature.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSym {
    pub n: usize,
    pub data: Vec<f64>,
}

impl DenseSym {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Adds `v` to entries (i, j) and (j, i); the diagonal gets `v` once.
    #[inline]
    pub fn add_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
        if i != j {
            self.data[j * self.n + i] += v;
        }
    }

    /// Smallest eigenvalue by cyclic Jacobi rotations.
    pub fn min_eigenvalue(&self) -> f64 {
        let n = self.n;
        if n == 0 {
            return 0.0;
        }
        let mut a = self.data.clone();
        for _sweep in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a[p * n + q] * a[p * n + q];
                }
            }
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let app = a[p * n + p];
                    let aqq = a[q * n + q];
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + sqrt(theta * theta + 1.0));
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / sqrt(t * t + 1.0);
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                }
            }
        }
        (0..n).map(|i| a[i * n + i]).fold(f64::INFINITY, f64::min)
    }
}

/// Least-squares slope of `log(err)` against `log(h)`: the observed order of
/// convergence.
pub fn fitted_order(h: &[f64], err: &[f64]) -> f64 {
    let n = h.len().min(err.len()) as f64;
    let xs: Vec<f64> = h.iter().map(|&x| ln(x)).collect();
    let ys: Vec<f64> = err.iter().map(|&y| ln(y.abs().max(1e-300))).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}
