//! Structured two-dimensional parameter grids with a diagonal analytic
//! background metric `g₀ = diag(a, b)`.
//!
//! The physical metric is conformal to the background, `g = e^{2σ} g₀`, so in
//! two dimensions `Δ_g = e^{-2σ} Δ₀` and the Gaussian curvature is
//! `K = e^{-2σ}(K₀ - Δ₀σ)`.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::linsolve::Csr;
use crate::math::{self, Sym2};

/// How an axis closes up at its ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AxisBoundary {
    Periodic,
    /// Colatitude axis of a lat-long sphere grid: stepping past a pole lands
    /// on the same row, half a turn around the periodic partner axis.
    PoleReflect,
    /// Patch edge; stencils go one-sided.
    Open,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub n: usize,
    pub origin: f64,
    pub spacing: f64,
    /// 0 for vertex-centred, 0.5 for cell-centred nodes.
    pub offset: f64,
    pub boundary: AxisBoundary,
}

impl Axis {
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        self.origin + (i as f64 + self.offset) * self.spacing
    }

    pub fn period(&self) -> f64 {
        self.n as f64 * self.spacing
    }
}

/// Analytic background metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Background {
    /// `dx² + dy²`.
    Flat,
    /// `dθ² + sin²θ dφ²` with `x = (θ, φ)`.
    UnitSphere,
}

impl Background {
    /// Diagonal entries `(a, b)` of `g₀`.
    #[inline]
    pub fn metric_diag(self, x: [f64; 2]) -> (f64, f64) {
        match self {
            Background::Flat => (1.0, 1.0),
            Background::UnitSphere => {
                let s = math::sin(x[0]);
                (1.0, s * s)
            }
        }
    }

    #[inline]
    pub fn area_density(self, x: [f64; 2]) -> f64 {
        match self {
            Background::Flat => 1.0,
            Background::UnitSphere => math::sin(x[0]),
        }
    }

    /// `√(ab)/a` on axis 0 and `√(ab)/b` on axis 1.
    #[inline]
    pub fn flux_coeff(self, axis: usize, x: [f64; 2]) -> f64 {
        match (self, axis) {
            (Background::Flat, _) => 1.0,
            (Background::UnitSphere, 0) => math::sin(x[0]),
            (Background::UnitSphere, _) => 1.0 / math::sin(x[0]),
        }
    }

    #[inline]
    pub fn gauss_curvature(self) -> f64 {
        match self {
            Background::Flat => 0.0,
            Background::UnitSphere => 1.0,
        }
    }

    /// Christoffel symbols `Γ^m_{kl}` of `g₀`, indexed `[m][k][l]`.
    pub fn christoffel(self, x: [f64; 2]) -> [[[f64; 2]; 2]; 2] {
        match self {
            Background::Flat => [[[0.0; 2]; 2]; 2],
            Background::UnitSphere => {
                let (s, c) = (math::sin(x[0]), math::cos(x[0]));
                let mut g = [[[0.0; 2]; 2]; 2];
                g[0][1][1] = -s * c;
                g[1][0][1] = c / s;
                g[1][1][0] = c / s;
                g
            }
        }
    }

    /// Unit-sphere embedding, used for chordal distances and test fields.
    pub fn embed(self, x: [f64; 2]) -> [f64; 3] {
        match self {
            Background::Flat => [x[0], x[1], 0.0],
            Background::UnitSphere => {
                let (st, ct) = (math::sin(x[0]), math::cos(x[0]));
                [st * math::cos(x[1]), st * math::sin(x[1]), ct]
            }
        }
    }
}

/// A squared distance-like function with its coordinate derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistSq {
    pub q: f64,
    pub dq: [f64; 2],
    pub ddq: Sym2,
}

/// Derivative stencils that depend only on the grid, never on the metric
/// scale factor.
#[derive(Debug, Clone, PartialEq)]
pub struct GridStencils {
    pub d: [Csr; 2],
    pub dd: [Csr; 2],
    /// `∂₁∂₀`, always differentiating along axis 1 last so pole-reflected
    /// ghosts are only ever read for scalars.
    pub mixed: Csr,
    /// Background Laplace–Beltrami operator `Δ₀` in flux form.
    pub lap0: Csr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridGeometry {
    pub axes: [Axis; 2],
    pub background: Background,
    pub stencils: GridStencils,
}

impl GridGeometry {
    pub fn new(axes: [Axis; 2], background: Background) -> Self {
        let mut g = Self {
            axes,
            background,
            stencils: GridStencils {
                d: [Csr::default(), Csr::default()],
                dd: [Csr::default(), Csr::default()],
                mixed: Csr::default(),
                lap0: Csr::default(),
            },
        };
        let d0 = g.build_first(0);
        let d1 = g.build_first(1);
        let dd0 = g.build_second(0);
        let dd1 = g.build_second(1);
        let mixed = d1.compose(&d0);
        let lap0 = g.build_laplacian();
        g.stencils = GridStencils { d: [d0, d1], dd: [dd0, dd1], mixed, lap0 };
        g
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.axes[0].n * self.axes[1].n
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.axes[1].n + j
    }

    #[inline]
    pub fn split(&self, node: usize) -> (usize, usize) {
        (node / self.axes[1].n, node % self.axes[1].n)
    }

    #[inline]
    pub fn coords(&self, node: usize) -> [f64; 2] {
        let (i, j) = self.split(node);
        [self.axes[0].coord(i), self.axes[1].coord(j)]
    }

    /// Neighbour `step` nodes away along `axis`, honouring periodicity and
    /// pole reflection. `None` past an open edge.
    pub fn neighbor(&self, i: usize, j: usize, axis: usize, step: isize) -> Option<usize> {
        let ax = &self.axes[axis];
        let pos = if axis == 0 { i } else { j } as isize + step;
        let n = ax.n as isize;
        let inside = (0..n).contains(&pos);
        let (ii, jj) = match ax.boundary {
            _ if inside => {
                if axis == 0 {
                    (pos as usize, j)
                } else {
                    (i, pos as usize)
                }
            }
            AxisBoundary::Periodic => {
                let w = pos.rem_euclid(n) as usize;
                if axis == 0 {
                    (w, j)
                } else {
                    (i, w)
                }
            }
            AxisBoundary::PoleReflect => {
                let mirrored = if pos < 0 { -pos - 1 } else { 2 * n - 1 - pos };
                let half = self.axes[1].n / 2;
                (mirrored as usize, (j + half) % self.axes[1].n)
            }
            AxisBoundary::Open => return None,
        };
        Some(self.index(ii, jj))
    }

    /// True when every axis closes up (no open edges).
    pub fn is_closed(&self) -> bool {
        self.axes.iter().all(|a| a.boundary != AxisBoundary::Open)
    }

    /// Nodes on an open edge.
    pub fn is_edge(&self, node: usize) -> bool {
        let (i, j) = self.split(node);
        (0..2).any(|k| {
            let ax = &self.axes[k];
            let p = if k == 0 { i } else { j };
            ax.boundary == AxisBoundary::Open && (p == 0 || p + 1 == ax.n)
        })
    }

    /// Smallest physical spacing at a node for a given log scale factor.
    pub fn local_spacing_sq(&self, node: usize, log_scale: f64) -> f64 {
        let x = self.coords(node);
        let (a, b) = self.background.metric_diag(x);
        let e = math::exp(2.0 * log_scale);
        let h0 = e * a * self.axes[0].spacing * self.axes[0].spacing;
        let h1 = e * b * self.axes[1].spacing * self.axes[1].spacing;
        // harmonic combination: the explicit-diffusion stability scale
        2.0 / (1.0 / h0 + 1.0 / h1)
    }

    fn axis_pos(&self, node: usize, axis: usize) -> (usize, usize, usize) {
        let (i, j) = self.split(node);
        (i, j, if axis == 0 { i } else { j })
    }

    fn build_first(&self, axis: usize) -> Csr {
        let n = self.node_count();
        let h = self.axes[axis].spacing;
        let mut m = Csr::with_capacity(n, 3 * n);
        for node in 0..n {
            let (i, j, p) = self.axis_pos(node, axis);
            let row = match (self.neighbor(i, j, axis, -1), self.neighbor(i, j, axis, 1)) {
                (Some(l), Some(r)) => alloc::vec![(l, -0.5 / h), (r, 0.5 / h)],
                (None, Some(_)) => {
                    let at = |s| self.neighbor(i, j, axis, s).unwrap();
                    alloc::vec![(node, -1.5 / h), (at(1), 2.0 / h), (at(2), -0.5 / h)]
                }
                (Some(_), None) => {
                    let at = |s| self.neighbor(i, j, axis, s).unwrap();
                    alloc::vec![(node, 1.5 / h), (at(-1), -2.0 / h), (at(-2), 0.5 / h)]
                }
                (None, None) => unreachable!("axis {axis} with one node at {p}"),
            };
            m.push_row(&row);
        }
        m.with_zero_row_sum()
    }

    fn build_second(&self, axis: usize) -> Csr {
        let n = self.node_count();
        let h2 = self.axes[axis].spacing * self.axes[axis].spacing;
        let mut m = Csr::with_capacity(n, 4 * n);
        for node in 0..n {
            let (i, j, _) = self.axis_pos(node, axis);
            m.push_row(&self.second_row(node, i, j, axis, h2));
        }
        m.with_zero_row_sum()
    }

    fn second_row(&self, node: usize, i: usize, j: usize, axis: usize, h2: f64) -> Vec<(usize, f64)> {
        let at = |s| self.neighbor(i, j, axis, s).unwrap();
        match (self.neighbor(i, j, axis, -1), self.neighbor(i, j, axis, 1)) {
            (Some(l), Some(r)) => alloc::vec![(l, 1.0 / h2), (node, -2.0 / h2), (r, 1.0 / h2)],
            (None, _) => alloc::vec![(node, 2.0 / h2), (at(1), -5.0 / h2), (at(2), 4.0 / h2), (at(3), -1.0 / h2)],
            (_, None) => alloc::vec![(node, 2.0 / h2), (at(-1), -5.0 / h2), (at(-2), 4.0 / h2), (at(-3), -1.0 / h2)],
        }
    }

    fn build_laplacian(&self) -> Csr {
        let n = self.node_count();
        let mut m = Csr::with_capacity(n, 5 * n);
        let mut row = Vec::with_capacity(8);
        for node in 0..n {
            row.clear();
            let (i, j) = self.split(node);
            let x = self.coords(node);
            let area = self.background.area_density(x);
            for axis in 0..2 {
                let h = self.axes[axis].spacing;
                match (self.neighbor(i, j, axis, -1), self.neighbor(i, j, axis, 1)) {
                    (Some(l), Some(r)) => {
                        let mut xm = x;
                        let mut xp = x;
                        xm[axis] -= 0.5 * h;
                        xp[axis] += 0.5 * h;
                        let cm = self.background.flux_coeff(axis, xm);
                        let cp = self.background.flux_coeff(axis, xp);
                        let w = 1.0 / (area * h * h);
                        row.push((l, w * cm));
                        row.push((r, w * cp));
                        row.push((node, -w * (cm + cp)));
                    }
                    _ => {
                        // open edges only occur on flat patches, where Δ₀ = Σ ∂²
                        debug_assert_eq!(self.background, Background::Flat);
                        row.extend(self.second_row(node, i, j, axis, h * h));
                    }
                }
            }
            m.push_row(&row);
        }
        m.with_zero_row_sum()
    }

    /// Squared distance to `center` with coordinate derivatives: Euclidean
    /// (wrapped on periodic axes) on flat grids, chordal on the unit sphere.
    pub fn dist_sq(&self, center: [f64; 2], x: [f64; 2]) -> DistSq {
        match self.background {
            Background::Flat => {
                let mut d = [x[0] - center[0], x[1] - center[1]];
                for (k, dk) in d.iter_mut().enumerate() {
                    if self.axes[k].boundary == AxisBoundary::Periodic {
                        let p = self.axes[k].period();
                        *dk -= p * libm::floor(*dk / p + 0.5);
                    }
                }
                DistSq { q: d[0] * d[0] + d[1] * d[1], dq: [2.0 * d[0], 2.0 * d[1]], ddq: Sym2::diag(2.0, 2.0) }
            }
            Background::UnitSphere => {
                let (st, ct) = (math::sin(x[0]), math::cos(x[0]));
                let (sc, cc) = (math::sin(center[0]), math::cos(center[0]));
                let (sd, cd) = (math::sin(x[1] - center[1]), math::cos(x[1] - center[1]));
                let dot = st * sc * cd + ct * cc;
                DistSq {
                    q: 2.0 - 2.0 * dot,
                    dq: [-2.0 * (ct * sc * cd - st * cc), 2.0 * st * sc * sd],
                    ddq: Sym2::new(2.0 * dot, 2.0 * ct * sc * sd, 2.0 * st * sc * cd),
                }
            }
        }
    }
}
