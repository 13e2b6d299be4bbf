//! Catalog of weight functions `f` for the measure `e^{-f} dμ`.

use core::ops::Sub;

use serde::{Deserialize, Serialize};

use super::grid::GridGeometry;
use crate::math::{self, Sym2};

/// Weight function catalog. Parameters are in grid coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightKind {
    Zero,
    /// `f = slope · x_axis`.
    Linear {
        axis: usize,
        slope: f64,
    },
    /// `f = amplitude · sin(wavenumber · x_axis)`.
    Sine {
        axis: usize,
        amplitude: f64,
        wavenumber: f64,
    },
    /// `f = amplitude · exp(-d²/(2 width²))`, `d` the grid distance to `center`.
    RadialGaussian {
        center: [f64; 2],
        amplitude: f64,
        width: f64,
    },
}

/// `f` and its coordinate derivatives at a node.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WeightSample {
    pub value: f64,
    pub d: [f64; 2],
    pub dd: Sym2,
}

impl WeightKind {
    pub fn is_zero(&self) -> bool {
        matches!(self, WeightKind::Zero)
    }

    pub fn sample(&self, geo: &GridGeometry, x: [f64; 2]) -> WeightSample {
        match *self {
            WeightKind::Zero => WeightSample::default(),
            WeightKind::Linear { axis, slope } => {
                let mut d = [0.0; 2];
                d[axis] = slope;
                WeightSample { value: slope * x[axis], d, dd: Sym2::ZERO }
            }
            WeightKind::Sine { axis, amplitude, wavenumber } => {
                let arg = wavenumber * x[axis];
                let mut d = [0.0; 2];
                d[axis] = amplitude * wavenumber * math::cos(arg);
                let second = -amplitude * wavenumber * wavenumber * math::sin(arg);
                let dd = if axis == 0 { Sym2::diag(second, 0.0) } else { Sym2::diag(0.0, second) };
                WeightSample { value: amplitude * math::sin(arg), d, dd }
            }
            WeightKind::RadialGaussian { center, amplitude, width } => {
                let ds = geo.dist_sq(center, x);
                let w2 = width * width;
                let e = amplitude * math::exp(-ds.q / (2.0 * w2));
                WeightSample {
                    value: e,
                    d: [-e * ds.dq[0] / (2.0 * w2), -e * ds.dq[1] / (2.0 * w2)],
                    dd: Sym2::outer(ds.dq).scale(e / (4.0 * w2 * w2)).sub(ds.ddq.scale(e / (2.0 * w2))),
                }
            }
        }
    }
}

/// A weight together with its certified bounds at one metric snapshot:
/// `|∇f| ≤ grad_sup` and `Hess f ≥ -hessian_lower · g` at every node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub kind: WeightKind,
    /// K₁
    pub grad_sup: f64,
    /// K₂ (also written K_H)
    pub hessian_lower: f64,
}
