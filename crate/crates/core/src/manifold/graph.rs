//! Weighted graphs: drift Laplacian, carré du champ and the Bakry–Émery
//! curvature-dimension bound `CD(K, m)` computed from the local Γ₂ form.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::linsolve::Csr;
use crate::math::DenseSym;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "graph", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GraphSpec {
    Cycle {
        nodes: usize,
    },
    Complete {
        nodes: usize,
    },
    /// Undirected edges `(a, b, weight)`.
    Edges {
        nodes: usize,
        edges: Vec<(usize, usize, f64)>,
    },
}

/// Graph with vertex measure `μ` and symmetric edge weights `w`.
///
/// `Δu(x) = μ_x⁻¹ Σ_y w_xy (u_y - u_x)` and
/// `Γ(u)(x) = (2μ_x)⁻¹ Σ_y w_xy (u_y - u_x)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    pub measure: Vec<f64>,
    /// Off-diagonal edge weights.
    pub adjacency: Csr,
    pub laplacian: Csr,
}

impl WeightedGraph {
    pub fn from_spec(spec: &GraphSpec) -> Result<Self> {
        let (n, edges): (usize, Vec<(usize, usize, f64)>) = match spec {
            GraphSpec::Cycle { nodes } => (*nodes, (0..*nodes).map(|i| (i, (i + 1) % nodes, 1.0)).collect()),
            GraphSpec::Complete { nodes } => {
                let mut e = Vec::new();
                for a in 0..*nodes {
                    for b in (a + 1)..*nodes {
                        e.push((a, b, 1.0));
                    }
                }
                (*nodes, e)
            }
            GraphSpec::Edges { nodes, edges } => (*nodes, edges.clone()),
        };
        if n < 3 {
            return Err(Error::InvalidParameter(format!("graph needs at least 3 nodes, got {n}")));
        }
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(a, b, w) in &edges {
            if a >= n || b >= n || a == b || !(w > 0.0) {
                return Err(Error::InvalidParameter(format!("bad edge ({a}, {b}, {w})")));
            }
            rows[a].push((b, w));
            rows[b].push((a, w));
        }
        let measure = vec![1.0; n];
        let mut adjacency = Csr::with_capacity(n, 2 * edges.len());
        let mut laplacian = Csr::with_capacity(n, 2 * edges.len() + n);
        for (x, row) in rows.iter().enumerate() {
            if row.is_empty() {
                return Err(Error::InvalidParameter(format!("isolated node {x}")));
            }
            adjacency.push_row(row);
            let deg: f64 = row.iter().map(|e| e.1).sum();
            let mut lrow: Vec<(usize, f64)> = row.iter().map(|&(y, w)| (y, w / measure[x])).collect();
            lrow.push((x, -deg / measure[x]));
            laplacian.push_row(&lrow);
        }
        Ok(Self { measure, adjacency, laplacian: laplacian.with_zero_row_sum() })
    }

    pub fn node_count(&self) -> usize {
        self.measure.len()
    }

    pub fn min_edge_weight(&self) -> f64 {
        self.adjacency.vals.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `Γ(u)` at every node.
    pub fn carre_du_champ(&self, u: &[f64]) -> Vec<f64> {
        (0..self.node_count())
            .map(|x| {
                let s: f64 = self.adjacency.row(x).map(|(y, w)| w * (u[y] - u[x]) * (u[y] - u[x])).sum();
                s / (2.0 * self.measure[x])
            })
            .collect()
    }

    /// Largest `K` with `Γ₂(u) ≥ (Δu)²/m + K Γ(u)` at `x` for all `u`
    /// (`m = ∞` allowed).
    pub fn bakry_emery_curvature(&self, x: usize, m: f64) -> f64 {
        // local coordinates: the 2-ball around x, with u_x pinned to 0
        let mut ball: Vec<usize> = vec![x];
        for (y, _) in self.adjacency.row(x) {
            if !ball.contains(&y) {
                ball.push(y);
            }
        }
        let first_ring = ball.len();
        for k in 1..first_ring {
            for (z, _) in self.adjacency.row(ball[k]) {
                if !ball.contains(&z) {
                    ball.push(z);
                }
            }
        }
        let dim = ball.len();
        let loc = |g: usize| ball.iter().position(|&b| b == g).unwrap();

        // quadratic form of Γ(u)(y), y in the 1-ball
        let gamma_form = |y: usize| {
            let mut q = DenseSym::zeros(dim);
            let ly = loc(y);
            for (z, w) in self.adjacency.row(y) {
                let lz = loc(z);
                let c = w / (2.0 * self.measure[y]);
                q.add_sym(ly, ly, c);
                q.add_sym(lz, lz, c);
                q.add_sym(ly, lz, -c);
            }
            q
        };
        // linear functional Δu(y)
        let lap_form = |y: usize| {
            let mut l = vec![0.0; dim];
            for (z, w) in self.laplacian.row(y) {
                l[loc(z)] += w;
            }
            l
        };

        let mu = self.measure[x];
        let gx = gamma_form(x);
        let lx = lap_form(x);
        let mut a = DenseSym::zeros(dim);
        for (y, w) in self.adjacency.row(x) {
            let gy = gamma_form(y);
            let ly = lap_form(y);
            let ey = loc(y);
            for i in 0..dim {
                for j in 0..dim {
                    // ½ Δ Γ(u)(x)
                    a.data[i * dim + j] += 0.5 * w / mu * (gy.get(i, j) - gx.get(i, j));
                }
            }
            // - Γ(u, Δu)(x), symmetrised
            let c = w / (2.0 * mu);
            for j in 0..dim {
                let dl = ly[j] - lx[j];
                for (i, e) in [(ey, 1.0), (0usize, -1.0)] {
                    a.data[i * dim + j] -= 0.5 * c * e * dl;
                    a.data[j * dim + i] -= 0.5 * c * e * dl;
                }
            }
        }
        if m.is_finite() {
            for i in 0..dim {
                for j in 0..dim {
                    a.data[i * dim + j] -= lx[i] * lx[j] / m;
                }
            }
        }
        // drop the pinned coordinate
        let reduce = |s: &DenseSym, shift: f64, b: &DenseSym| {
            let mut r = DenseSym::zeros(dim - 1);
            for i in 1..dim {
                for j in 1..dim {
                    r.data[(i - 1) * (dim - 1) + (j - 1)] = s.get(i, j) - shift * b.get(i, j);
                }
            }
            r
        };
        let scale = a.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
        let feasible = |k: f64| reduce(&a, k, &gx).min_eigenvalue() >= -1e-12 * scale;
        let (mut lo, mut hi) = (-1.0, 1.0);
        while !feasible(lo) {
            lo *= 2.0;
        }
        while feasible(hi) {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-12 * (1.0 + lo.abs()) {
                break;
            }
        }
        lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycle_is_flat_without_dimension_term() {
        let g = WeightedGraph::from_spec(&GraphSpec::Cycle { nodes: 10 }).unwrap();
        assert!(g.bakry_emery_curvature(3, f64::INFINITY).abs() < 1e-9);
    }

    #[test]
    fn complete_graph_curvature() {
        for n in [3usize, 4, 6] {
            let g = WeightedGraph::from_spec(&GraphSpec::Complete { nodes: n }).unwrap();
            let k = g.bakry_emery_curvature(0, f64::INFINITY);
            assert!((k - (1.0 + n as f64 / 2.0)).abs() < 1e-8, "K_{n}: {k}");
        }
    }

    #[test]
    fn finite_dimension_lowers_curvature() {
        let g = WeightedGraph::from_spec(&GraphSpec::Cycle { nodes: 10 }).unwrap();
        let k_inf = g.bakry_emery_curvature(0, f64::INFINITY);
        let k4 = g.bakry_emery_curvature(0, 4.0);
        let k2 = g.bakry_emery_curvature(0, 2.0);
        assert!(k2 < k4 && k4 < k_inf);
    }

    #[test]
    fn rejects_isolated_nodes() {
        let spec = GraphSpec::Edges { nodes: 4, edges: vec![(0, 1, 1.0), (1, 2, 1.0)] };
        assert!(WeightedGraph::from_spec(&spec).is_err());
    }
}
