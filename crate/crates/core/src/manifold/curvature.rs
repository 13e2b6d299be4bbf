//! Curvature data attached to a manifold snapshot.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::grid::GridGeometry;

/// Per-node curvature and the certified Bakry–Émery lower bound `K` with
/// `Ric_f^{m-n} ≥ -K g` (`K ≥ 0`).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CurvatureData {
    /// Gaussian curvature (grids); empty on graphs.
    pub gauss: Vec<f64>,
    /// Smallest eigenvalue of `Ric_f^{m-n}` measured in `g` (grids), or the
    /// local `CD(·, m)` curvature (graphs).
    pub bakry_emery_min: Vec<f64>,
    pub lower_bound: f64,
    /// Node attaining the minimum.
    pub witness: usize,
}

impl CurvatureData {
    pub(crate) fn from_minima(gauss: Vec<f64>, bakry_emery_min: Vec<f64>) -> Self {
        let mut witness = 0;
        let mut lowest = f64::INFINITY;
        // fixed-order reduction
        for (i, &v) in bakry_emery_min.iter().enumerate() {
            if v < lowest {
                lowest = v;
                witness = i;
            }
        }
        Self { gauss, bakry_emery_min, lower_bound: (-lowest).max(0.0), witness }
    }
}

/// Gaussian curvature of an orthogonal metric `E dx₀² + G dx₁²` from its
/// sampled components by the Brioschi formula
/// `K = -(2√(EG))⁻¹ [∂₀(G₀/√(EG)) + ∂₁(E₁/√(EG))]`,
/// with nested centred differences.
///
/// Returns `None` at nodes whose stencil would cross an open edge or a
/// pole, where lat-long charts are singular.
pub fn brioschi_curvature(geo: &GridGeometry, e: &[f64], g: &[f64]) -> Vec<Option<f64>> {
    let n = geo.node_count();
    let root: Vec<f64> = e.iter().zip(g).map(|(a, b)| libm::sqrt(a * b)).collect();
    let mut out = Vec::with_capacity(n);
    for node in 0..n {
        let (i, j) = geo.split(node);
        let mut total = 0.0;
        let mut ok = true;
        for (axis, comp) in [(0usize, g), (1usize, e)] {
            let h = geo.axes[axis].spacing;
            // flux at the two half points
            let mut flux = [0.0; 2];
            for (slot, step) in [(0usize, -1isize), (1, 1)] {
                let inner = if geo.axes[axis].boundary == super::grid::AxisBoundary::PoleReflect {
                    let p = if axis == 0 { i } else { j } as isize + step;
                    (0..geo.axes[axis].n as isize).contains(&p)
                } else {
                    true
                };
                match geo.neighbor(i, j, axis, step) {
                    Some(nb) if inner => {
                        let d = (comp[nb] - comp[node]) / h * step as f64;
                        flux[slot] = d / (0.5 * (root[nb] + root[node]));
                    }
                    _ => ok = false,
                }
            }
            total += (flux[1] - flux[0]) / h;
        }
        out.push(if ok { Some(-total / (2.0 * root[node])) } else { None });
    }
    out
}
