//! Cutoff functions `χ` with analytic derivatives.
//!
//! Bumps are `(1 - p)^k` on a normalised parameter `p ∈ [0, 1]`; `k ≥ 3`
//! makes them C².

use core::ops::{Add, Sub};

use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::grid::{AxisBoundary, Background, DistSq};
use super::DiscreteManifold;
use crate::math::{self, Sym2};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "region", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CutoffRegion {
    /// `χ ≡ 1`; closed manifolds only.
    Whole,
    /// `χ ≡ 0`.
    Vanishing,
    /// Bump in the squared normalised distance `d²/ρ²`.
    Ball { center: [f64; 2], radius: f64 },
    /// Bump across the ring `inner < d < outer`.
    Annulus { center: [f64; 2], inner: f64, outer: f64 },
}

/// Value and coordinate derivatives of `χ` at a node.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CutoffSample {
    pub value: f64,
    pub d: [f64; 2],
    pub dd: Sym2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffProfile {
    pub region: CutoffRegion,
    pub power: u32,
    pub samples: Vec<CutoffSample>,
    /// Node membership in the closed domain Ω ⊇ supp χ.
    pub omega: Vec<bool>,
    pub whole_manifold: bool,
}

fn bump(p: f64, dp: [f64; 2], ddp: Sym2, k: u32) -> CutoffSample {
    if p >= 1.0 {
        return CutoffSample::default();
    }
    let k = k as i32;
    let kf = k as f64;
    let s = 1.0 - p;
    CutoffSample {
        value: math::powi(s, k),
        d: [-kf * math::powi(s, k - 1) * dp[0], -kf * math::powi(s, k - 1) * dp[1]],
        dd: Sym2::outer(dp).scale(kf * (kf - 1.0) * math::powi(s, k - 2)).sub(ddp.scale(kf * math::powi(s, k - 1))),
    }
}

/// Normalised parameter `p` with derivatives.
fn ring_param(ds: DistSq, inner: f64, outer: f64) -> (f64, [f64; 2], Sym2) {
    let r = math::sqrt(ds.q);
    let mid = 0.5 * (inner + outer);
    let half = 0.5 * (outer - inner);
    if r <= 0.0 {
        return (f64::INFINITY, [0.0; 2], Sym2::ZERO);
    }
    let dr = [ds.dq[0] / (2.0 * r), ds.dq[1] / (2.0 * r)];
    let ddr = ds.ddq.scale(0.5 / r).sub(Sym2::outer(dr).scale(1.0 / r));
    let s = (r - mid) / half;
    let dsv = [dr[0] / half, dr[1] / half];
    let dds = ddr.scale(1.0 / half);
    (s * s, [2.0 * s * dsv[0], 2.0 * s * dsv[1]], Sym2::outer(dsv).scale(2.0).add(dds.scale(2.0 * s)))
}

/// Builds `χ` on `man`. Regions must sit strictly inside open patch edges;
/// `Whole` needs a closed manifold.
pub fn build_cutoff(man: &DiscreteManifold, region: CutoffRegion, power: u32) -> Result<CutoffProfile> {
    if power < 3 {
        return Err(Error::InvalidParameter(format!("bump power {power} < 3 is not C²")));
    }
    let nodes = man.node_count();
    let full = |value: f64| CutoffProfile {
        region,
        power,
        samples: alloc::vec![CutoffSample { value, ..Default::default() }; nodes],
        omega: alloc::vec![true; nodes],
        whole_manifold: value == 1.0,
    };
    match region {
        CutoffRegion::Whole => {
            if !man.is_closed() {
                return Err(Error::BadCutoffRegion("`whole` requires a closed manifold".into()));
            }
            return Ok(full(1.0));
        }
        CutoffRegion::Vanishing => return Ok(full(0.0)),
        _ => {}
    }
    let geo = man.grid().ok_or(Error::Unsupported("localised cutoff on a weighted graph"))?;
    let (center, reach) = match region {
        CutoffRegion::Ball { center, radius } if radius > 0.0 => (center, radius),
        CutoffRegion::Annulus { center, inner, outer } if 0.0 < inner && inner < outer => (center, outer),
        _ => return Err(Error::BadCutoffRegion(format!("{region:?} has invalid radii"))),
    };
    match geo.background {
        Background::Flat => {
            for (k, ax) in geo.axes.iter().enumerate() {
                match ax.boundary {
                    AxisBoundary::Periodic if reach >= 0.5 * ax.period() => {
                        return Err(Error::BadCutoffRegion(format!("radius {reach} wraps around periodic axis {k}")));
                    }
                    AxisBoundary::Open => {
                        let lo = ax.coord(0);
                        let hi = ax.coord(ax.n - 1);
                        if center[k] - reach <= lo || center[k] + reach >= hi {
                            return Err(Error::BadCutoffRegion(format!("support touches the open boundary of axis {k} ([{lo}, {hi}])")));
                        }
                    }
                    _ => {}
                }
            }
        }
        Background::UnitSphere => {
            if reach >= 2.0 {
                return Err(Error::BadCutoffRegion(format!("chordal radius {reach} covers the sphere")));
            }
        }
    }
    let mut samples = Vec::with_capacity(nodes);
    let mut omega = Vec::with_capacity(nodes);
    for node in 0..nodes {
        let ds = geo.dist_sq(center, geo.coords(node));
        let (p, dp, ddp) = match region {
            CutoffRegion::Ball { radius, .. } => {
                let r2 = radius * radius;
                (ds.q / r2, [ds.dq[0] / r2, ds.dq[1] / r2], ds.ddq.scale(1.0 / r2))
            }
            CutoffRegion::Annulus { inner, outer, .. } => ring_param(ds, inner, outer),
            _ => unreachable!(),
        };
        omega.push(p <= 1.0);
        samples.push(bump(p, dp, ddp, power));
    }
    for node in 0..nodes {
        if geo.is_edge(node) && samples[node].value > 0.0 {
            return Err(Error::BadCutoffRegion(format!("χ > 0 on edge node {node}")));
        }
    }
    Ok(CutoffProfile { region, power, samples, omega, whole_manifold: false })
}

impl CutoffProfile {
    #[inline]
    pub fn value(&self, node: usize) -> f64 {
        self.samples[node].value
    }

    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.value).collect()
    }

    pub fn squared(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.value * s.value).collect()
    }

    /// Coordinate differential `dχ`.
    #[inline]
    pub fn differential(&self, node: usize) -> [f64; 2] {
        self.samples[node].d
    }

    /// `|∇χ|²` in the metric of `man`.
    pub fn grad_sq(&self, man: &DiscreteManifold, node: usize) -> f64 {
        let d = self.samples[node].d;
        man.inverse_metric(node).bilinear(d, d)
    }

    /// Covariant Hessian of `χ`.
    pub fn hessian(&self, man: &DiscreteManifold, node: usize) -> Sym2 {
        man.covariant_hessian(node, self.samples[node].d, self.samples[node].dd)
    }

    /// `Δχ` in the metric of `man`.
    pub fn laplacian(&self, man: &DiscreteManifold, node: usize) -> f64 {
        self.hessian(man, node).trace_in(man.inverse_metric(node))
    }

    /// `Δ_f χ = Δχ - ⟨∇f, ∇χ⟩`.
    pub fn drift_laplacian(&self, man: &DiscreteManifold, node: usize) -> f64 {
        let df = man.weight_sample(node).d;
        self.laplacian(man, node) - man.inverse_metric(node).bilinear(df, self.samples[node].d)
    }

    /// Nodes in Ω adjacent to a node outside Ω: the lateral parabolic boundary.
    pub fn omega_boundary(&self, man: &DiscreteManifold) -> Vec<bool> {
        let n = self.omega.len();
        let mut out = alloc::vec![false; n];
        if let Some(geo) = man.grid() {
            for node in 0..n {
                if !self.omega[node] {
                    continue;
                }
                let (i, j) = geo.split(node);
                let mut edge = geo.is_edge(node);
                for axis in 0..2 {
                    for step in [-1, 1] {
                        if let Some(nb) = geo.neighbor(i, j, axis, step) {
                            edge |= !self.omega[nb];
                        }
                    }
                }
                out[node] = edge;
            }
        }
        out
    }
}
