//! Weighted differential operators on a manifold snapshot, the residuals
//! of the identities the estimates rest on, and the pointwise inequalities
//! used to close them.
//!
//! Norms and contractions always use the metric of the snapshot passed in;
//! [`ScalarField`] records which snapshot time that was so a stale field
//! is caught rather than silently measured in the wrong metric.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::manifold::grid::{AxisBoundary, Background};
use crate::manifold::{CutoffProfile, DiscreteManifold, Geometry};
use crate::math::{self, Sym2, PI, TAU};
use crate::{Error, Result};

/// Node values bound to the metric snapshot taken at `metric_time`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub name: String,
    pub values: Vec<f64>,
    pub metric_time: f64,
}

impl ScalarField {
    pub fn new(man: &DiscreteManifold, name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if values.len() != man.node_count() {
            return Err(Error::LengthMismatch { name, len: values.len(), nodes: man.node_count() });
        }
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { name, node, time: man.time() });
        }
        Ok(Self { name, values, metric_time: man.time() })
    }

    /// Samples `f(x)` at grid coordinates (node index on graphs).
    pub fn from_fn(man: &DiscreteManifold, name: impl Into<String>, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let values = match man.geometry() {
            Geometry::Grid(geo) => (0..geo.node_count()).map(|k| f(geo.coords(k))).collect(),
            Geometry::Graph(g) => (0..g.node_count()).map(|k| f([k as f64, 0.0])).collect(),
        };
        Self::new(man, name, values)
    }

    pub fn constant(man: &DiscreteManifold, name: impl Into<String>, c: f64) -> Result<Self> {
        Self::new(man, name, alloc::vec![c; man.node_count()])
    }

    /// Errors unless this field belongs to `man`'s snapshot.
    pub fn check_bound(&self, man: &DiscreteManifold) -> Result<()> {
        if self.values.len() != man.node_count() {
            return Err(Error::LengthMismatch { name: self.name.clone(), len: self.values.len(), nodes: man.node_count() });
        }
        if self.metric_time != man.time() {
            return Err(Error::StaleMetric { name: self.name.clone(), field_time: self.metric_time, metric_time: man.time() });
        }
        Ok(())
    }

    fn derived(&self, man: &DiscreteManifold, name: String, values: Vec<f64>) -> ScalarField {
        ScalarField { name, values, metric_time: man.time() }
    }
}

/// Contravariant vector field `∇u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorField {
    pub components: Vec<[f64; 2]>,
}

/// Covariant symmetric 2-tensor field; symmetric by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorField {
    pub components: Vec<Sym2>,
}

fn grid_only<'a>(man: &'a DiscreteManifold, op: &'static str) -> Result<&'a crate::manifold::grid::GridGeometry> {
    man.grid().ok_or(Error::Unsupported(op))
}

/// Coordinate differential `(∂₀u, ∂₁u)`.
pub fn differential(man: &DiscreteManifold, u: &[f64]) -> Result<Vec<[f64; 2]>> {
    let geo = grid_only(man, "coordinate differential on a weighted graph")?;
    let d0 = geo.stencils.d[0].apply_vec(u);
    let d1 = geo.stencils.d[1].apply_vec(u);
    Ok(d0.into_iter().zip(d1).map(|(a, b)| [a, b]).collect())
}

pub fn gradient(man: &DiscreteManifold, u: &ScalarField) -> Result<VectorField> {
    u.check_bound(man)?;
    let du = differential(man, &u.values)?;
    Ok(VectorField { components: du.iter().enumerate().map(|(k, &d)| man.inverse_metric(k).apply(d)).collect() })
}

/// `|∇u|²` in the snapshot metric; the carré du champ `Γ(u)` on graphs.
pub fn grad_norm_sq(man: &DiscreteManifold, u: &[f64]) -> Vec<f64> {
    match man.geometry() {
        Geometry::Graph(g) => g.carre_du_champ(u),
        Geometry::Grid(geo) => {
            let a = &geo.stencils.d[0];
            let b = &geo.stencils.d[1];
            (0..u.len())
                .map(|k| {
                    let d = [a.apply_row(k, u), b.apply_row(k, u)];
                    man.inverse_metric(k).bilinear(d, d)
                })
                .collect()
        }
    }
}

/// `Δ_f u` at every node.
pub fn drift_laplacian(man: &DiscreteManifold, u: &[f64]) -> Vec<f64> {
    let op = man.drift_operator();
    (0..u.len()).map(|k| man.row_scale(k) * op.apply_row(k, u)).collect()
}

/// `Δ_f u = Δu - ⟨∇f, ∇u⟩` with the analytic `∇f`.
pub fn weighted_laplacian(man: &DiscreteManifold, u: &ScalarField) -> Result<ScalarField> {
    u.check_bound(man)?;
    Ok(u.derived(man, format!("lap_f({})", u.name), drift_laplacian(man, &u.values)))
}

/// Coordinate second derivatives.
fn second_partials(man: &DiscreteManifold, u: &[f64]) -> Result<Vec<Sym2>> {
    let geo = grid_only(man, "Hessian on a weighted graph")?;
    let s = &geo.stencils;
    Ok((0..u.len()).map(|k| Sym2::new(s.dd[0].apply_row(k, u), s.mixed.apply_row(k, u), s.dd[1].apply_row(k, u))).collect())
}

/// Covariant Hessian `∂²u - Γᵏ ∂_k u`.
pub fn hessian(man: &DiscreteManifold, u: &ScalarField) -> Result<TensorField> {
    u.check_bound(man)?;
    let du = differential(man, &u.values)?;
    let dd = second_partials(man, &u.values)?;
    Ok(TensorField { components: (0..du.len()).map(|k| man.covariant_hessian(k, du[k], dd[k])).collect() })
}

/// `Δ_f(u²) - 2|∇u|² - 2u Δ_f u`.
pub fn delta_f_square_residual(man: &DiscreteManifold, u: &ScalarField) -> Result<ScalarField> {
    u.check_bound(man)?;
    let sq: Vec<f64> = u.values.iter().map(|x| x * x).collect();
    let lsq = drift_laplacian(man, &sq);
    let lu = drift_laplacian(man, &u.values);
    let g = grad_norm_sq(man, &u.values);
    let r = (0..sq.len()).map(|k| lsq[k] - 2.0 * g[k] - 2.0 * u.values[k] * lu[k]).collect();
    Ok(u.derived(man, format!("sq_residual({})", u.name), r))
}

/// `½Δ_f|∇u|² - |Hess u|² - ⟨∇u, ∇Δ_f u⟩ - Ric_f(∇u, ∇u)`.
pub fn bochner_residual(man: &DiscreteManifold, u: &ScalarField) -> Result<ScalarField> {
    u.check_bound(man)?;
    let du = differential(man, &u.values)?;
    let hess = hessian(man, u)?;
    let g = grad_norm_sq(man, &u.values);
    let lg = drift_laplacian(man, &g);
    let lu = drift_laplacian(man, &u.values);
    let dlu = differential(man, &lu)?;
    let r = (0..du.len())
        .map(|k| {
            let ginv = man.inverse_metric(k);
            let grad = ginv.apply(du[k]);
            0.5 * lg[k] - hess.components[k].norm_sq_in(ginv) - ginv.bilinear(du[k], dlu[k]) - man.weighted_ricci(k).bilinear(grad, grad)
        })
        .collect();
    Ok(u.derived(man, format!("bochner_residual({})", u.name), r))
}

/// Polar caps excluded from residual norms on sphere grids. Lat-long
/// charts degenerate at the poles, where the stencils lose their order.
pub const POLAR_CAP: f64 = PI / 6.0;

/// Sup norm over nodes at least `margin` steps away from any open edge.
pub fn interior_sup_norm(man: &DiscreteManifold, r: &[f64], margin: usize) -> f64 {
    regular_sup_norm(man, r, margin, 0.0)
}

/// [`interior_sup_norm`] that also drops sphere nodes within `polar_cap`
/// radians of a pole.
pub fn regular_sup_norm(man: &DiscreteManifold, r: &[f64], margin: usize, polar_cap: f64) -> f64 {
    let keep = |k: usize| match man.grid() {
        Some(geo) => {
            let (i, j) = geo.split(k);
            let away_from_edges = (0..2).all(|a| {
                let ax = &geo.axes[a];
                let p = if a == 0 { i } else { j };
                ax.boundary != AxisBoundary::Open || (p >= margin && p + margin < ax.n)
            });
            let theta = geo.coords(k)[0];
            let away_from_poles = geo.background != Background::UnitSphere || (theta >= polar_cap && theta <= PI - polar_cap);
            away_from_edges && away_from_poles
        }
        None => true,
    };
    r.iter().enumerate().filter(|(k, _)| keep(*k)).map(|(_, v)| v.abs()).fold(0.0, f64::max)
}

/// Finite sum of plane waves `Σ c cos(w·P) + s sin(w·P)` evaluated at the
/// embedded point `P` (the sphere) or at `(x₀, x₁, 0)` (flat grids).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandLimited {
    pub modes: Vec<Mode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub freq: [f64; 3],
    pub cos: f64,
    pub sin: f64,
}

impl BandLimited {
    /// Random modes with integer wavenumbers `|k| ≤ max_wavenumber` per
    /// axis; periodic on tori. `uniform` must return values in `[-1, 1]`.
    pub fn random(man: &DiscreteManifold, modes: usize, max_wavenumber: u32, mut uniform: impl FnMut() -> f64) -> Self {
        let kmax = max_wavenumber as f64;
        let mut out = Vec::with_capacity(modes);
        let base = match man.grid() {
            Some(geo) if geo.background == Background::Flat => {
                let ext = |a: usize| {
                    let ax = &geo.axes[a];
                    if ax.period() > 0.0 {
                        ax.period()
                    } else {
                        ax.spacing * (ax.n - 1) as f64
                    }
                };
                [TAU / ext(0), TAU / ext(1), 0.0]
            }
            _ => [1.0, 1.0, 1.0],
        };
        let amp = 1.0 / modes.max(1) as f64;
        for _ in 0..modes {
            let mut freq = [0.0; 3];
            for (a, f) in freq.iter_mut().enumerate() {
                // round toward the nearest integer in [-kmax, kmax]
                let k = libm_round(uniform() * (kmax + 0.499));
                *f = k * base[a];
            }
            out.push(Mode { freq, cos: amp * uniform(), sin: amp * uniform() });
        }
        Self { modes: out }
    }

    fn point(man: &DiscreteManifold, x: [f64; 2]) -> [f64; 3] {
        match man.grid() {
            Some(geo) if geo.background == Background::UnitSphere => geo.background.embed(x),
            _ => [x[0], x[1], 0.0],
        }
    }

    pub fn eval(&self, p: [f64; 3]) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let arg = m.freq[0] * p[0] + m.freq[1] * p[1] + m.freq[2] * p[2];
                m.cos * math::cos(arg) + m.sin * math::sin(arg)
            })
            .sum()
    }

    pub fn sample(&self, man: &DiscreteManifold, name: impl Into<String>) -> Result<ScalarField> {
        ScalarField::from_fn(man, name, |x| self.eval(Self::point(man, x)))
    }
}

fn libm_round(x: f64) -> f64 {
    if x >= 0.0 {
        libm::floor(x + 0.5)
    } else {
        -libm::floor(-x + 0.5)
    }
}

/// One pointwise inequality `lhs ≤ rhs` evaluated at every node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub name: String,
    /// Largest `(lhs - rhs) / scale`, `scale = max(1, |lhs| + |rhs|)`.
    pub max_violation: f64,
    pub witness: usize,
    /// Nodes with a scaled violation above the tolerance.
    pub violations: usize,
    /// Part of the proof as used; diagnostics are reported but not gated.
    pub gated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub tolerance: f64,
    pub checks: Vec<InequalityCheck>,
}

impl InequalityReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().filter(|c| c.gated).all(|c| c.violations == 0)
    }
}

struct Accumulator {
    check: InequalityCheck,
    tol: f64,
}

impl Accumulator {
    fn new(name: &str, gated: bool, tol: f64) -> Self {
        Self { check: InequalityCheck { name: name.into(), max_violation: f64::NEG_INFINITY, witness: 0, violations: 0, gated }, tol }
    }

    fn push(&mut self, node: usize, lhs: f64, rhs: f64) {
        let v = (lhs - rhs) / (lhs.abs() + rhs.abs()).max(1.0);
        if v > self.check.max_violation {
            self.check.max_violation = v;
            self.check.witness = node;
        }
        if v > self.tol {
            self.check.violations += 1;
        }
    }
}

/// Evaluates the pointwise inequalities behind the gradient estimates for
/// a pair `(u, v)` and cutoff `χ`:
///
/// - `(1/m)(Δ_f u)² ≤ |Hess u|² + ⟨∇f,∇u⟩²/(m-n)`
/// - `4χ³Δ_f u⟨∇u,∇χ⟩ ≤ 16mχ²|∇u|²|∇χ|² + χ⁴|Hess u|² + 2χ⁴⟨∇f,∇u⟩²/(m-n)`
/// - `-8χ³ Hess u(∇χ,∇u) ≤ 16χ²|∇u|²|∇χ|² + χ⁴|Hess u|²`
/// - `2|∇u||∇v| ≤ |∇u|²/2 + 2|∇v|²`
///
/// `Δ_f u` is taken as the metric trace of the discrete Hessian minus the
/// drift, so the algebra behind each bound holds exactly node by node.
/// The Hessian bound is also evaluated with `χ²` in place of `χ³` as an
/// ungated diagnostic.
pub fn proof_inequalities_check(
    man: &DiscreteManifold,
    u: &ScalarField,
    v: &ScalarField,
    chi: &CutoffProfile,
    tolerance: f64,
) -> Result<InequalityReport> {
    v.check_bound(man)?;
    let m = man.synthetic_dimension();
    let mn = m - man.dimension() as f64;
    let du = differential(man, &u.values)?;
    let dv = differential(man, &v.values)?;
    let hess = hessian(man, u)?;
    let mut trace = Accumulator::new("trace-bound", true, tolerance);
    let mut cross = Accumulator::new("laplacian-cross-term", true, tolerance);
    let mut hcross = Accumulator::new("hessian-cross-term", true, tolerance);
    let mut hcross2 = Accumulator::new("hessian-cross-term-chi-squared", false, tolerance);
    let mut young = Accumulator::new("young", true, tolerance);
    for k in 0..du.len() {
        let ginv = man.inverse_metric(k);
        let h = hess.components[k];
        let df = man.weight_sample(k).d;
        let dchi = chi.differential(k);
        let c = chi.value(k);
        let gu = ginv.apply(du[k]);
        let gchi = ginv.apply(dchi);
        let grad_u2 = ginv.bilinear(du[k], du[k]);
        let grad_v2 = ginv.bilinear(dv[k], dv[k]);
        let grad_chi2 = ginv.bilinear(dchi, dchi);
        let fu = ginv.bilinear(df, du[k]);
        let lap_f = h.trace_in(ginv) - fu;
        let hs = h.norm_sq_in(ginv);
        let (c2, c3, c4) = (c * c, c * c * c, c * c * c * c);

        trace.push(k, lap_f * lap_f / m, hs + fu * fu / mn);
        cross.push(
            k,
            4.0 * c3 * lap_f * ginv.bilinear(du[k], dchi),
            16.0 * m * c2 * grad_u2 * grad_chi2 + c4 * hs + 2.0 * c4 * fu * fu / mn,
        );
        let hb = h.bilinear(gchi, gu);
        hcross.push(k, -8.0 * c3 * hb, 16.0 * c2 * grad_u2 * grad_chi2 + c4 * hs);
        hcross2.push(k, -8.0 * c2 * hb, 16.0 * c2 * grad_u2 * grad_chi2 + c4 * hs);
        let (a, b) = (math::sqrt(grad_u2), math::sqrt(grad_v2));
        young.push(k, 2.0 * a * b, 0.5 * a * a + 2.0 * b * b);
    }
    Ok(InequalityReport { tolerance, checks: [trace, cross, hcross, young, hcross2].into_iter().map(|a| a.check).collect() })
}
