//! Time integration of the coupled systems
//!
//! ```text
//! linear:       u_t = χ²Δ_f u - v,      v_t = χ²Δ_f v - u
//! exponential:  u_t = χ²Δ_f u + a e^v,  v_t = χ²Δ_f v + b e^u
//! ```
//!
//! on a fixed snapshot or together with the local Ricci flow. In the
//! evolving case the log scale factor `σ` is part of the state, so every
//! RK4 stage sees the metric of that stage.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::calculus::{differential, drift_laplacian, grad_norm_sq, hessian, regular_sup_norm, ScalarField, POLAR_CAP};
use crate::linsolve::bicgstab;
use crate::manifold::{flow_rate, CutoffProfile, DiscreteManifold, DEGENERATE_METRIC_EIG};
use crate::math;
use crate::{Error, Result};

/// Values below `-POSITIVITY_TOL` count as a loss of positivity.
pub const POSITIVITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SystemKind {
    Linear,
    Exponential { a: f64, b: f64 },
}

impl SystemKind {
    /// Reaction terms `(F, G)` with `u_t = χ²Δ_f u + F`, `v_t = χ²Δ_f v + G`.
    #[inline]
    pub fn reaction(self, u: f64, v: f64) -> (f64, f64) {
        match self {
            SystemKind::Linear => (-v, -u),
            SystemKind::Exponential { a, b } => (a * math::exp(v), b * math::exp(u)),
        }
    }

    /// `[[F_u, F_v], [G_u, G_v]]`.
    #[inline]
    pub fn jacobian(self, u: f64, v: f64) -> [[f64; 2]; 2] {
        match self {
            SystemKind::Linear => [[0.0, -1.0], [-1.0, 0.0]],
            SystemKind::Exponential { a, b } => [[0.0, a * math::exp(v)], [b * math::exp(u), 0.0]],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stepper {
    #[default]
    ExplicitRk4,
    /// Diffusion (and the flow's `Δ₀σ`) implicit, reactions explicit.
    ImplicitEuler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flow {
    #[default]
    None,
    LocalRicci,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub kind: SystemKind,
    pub u0: Vec<f64>,
    pub v0: Vec<f64>,
    pub horizon: f64,
    pub stepper: Stepper,
    /// `dt ≤ cfl · h² / max χ²` for explicit stepping.
    pub cfl: f64,
    /// Requested step; `None` takes the stability limit (RK4) or `h²/max χ²`
    /// (implicit Euler). Always shortened to divide the snapshot interval.
    pub dt: Option<f64>,
    /// Number of snapshot intervals on `[0, T]`.
    pub snapshots: usize,
    /// `(ln b₁, ln b₂)` caps monitored for the exponential system.
    pub caps: Option<[f64; 2]>,
}

impl SystemSpec {
    pub fn new(kind: SystemKind, u0: Vec<f64>, v0: Vec<f64>, horizon: f64) -> Self {
        Self { kind, u0, v0, horizon, stepper: Stepper::ExplicitRk4, cfl: 0.25, dt: None, snapshots: 64, caps: None }
    }

    fn validate(&self, man: &DiscreteManifold) -> Result<()> {
        let n = man.node_count();
        for (name, f) in [("u0", &self.u0), ("v0", &self.v0)] {
            if f.len() != n {
                return Err(Error::LengthMismatch { name: name.into(), len: f.len(), nodes: n });
            }
            if let Some(node) = f.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite { name: name.into(), node, time: 0.0 });
            }
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.cfl > 0.0) {
            return Err(Error::InvalidParameter(format!("cfl must be positive, got {}", self.cfl)));
        }
        if self.snapshots == 0 {
            return Err(Error::InvalidParameter("at least one snapshot interval is required".into()));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
            }
        }
        Ok(())
    }
}

/// Scalar diagnostics recorded after every step (and at `t = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub t: f64,
    pub min_u: f64,
    pub min_v: f64,
    pub max_u: f64,
    pub max_v: f64,
    /// `max_Ω χ² t |∇u|²` in the metric at `t`.
    pub max_chi2t_grad_u2: f64,
    pub max_chi2t_grad_v2: f64,
    pub metric_min_eig: f64,
    /// Mean of `e^{2σ}`; `r²` on a round sphere.
    pub radius_sq: f64,
}

/// Full fields at a snapshot time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Log scale factor; shared with the snapshot manifold.
    pub log_scale: Arc<Vec<f64>>,
}

/// First node and time at which a standing hypothesis broke.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisBreak {
    pub time: f64,
    pub node: usize,
    pub field: String,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub kind: SystemKind,
    pub flow: Flow,
    pub horizon: f64,
    /// Manifold at `t = 0`.
    pub base: DiscreteManifold,
    pub chi: CutoffProfile,
    pub snapshots: Vec<Snapshot>,
    pub diagnostics: Vec<Diagnostics>,
    /// First time `min u` or `min v` dropped below `-POSITIVITY_TOL`.
    pub positivity_lost: Option<HypothesisBreak>,
    /// First time a cap `u ≤ ln b₁`, `v ≤ ln b₂` was exceeded.
    pub cap_exceeded: Option<HypothesisBreak>,
    /// The hypothesis-valid window ends before the horizon.
    pub truncated: bool,
    pub steps: usize,
    /// Snapshot intervals requested on `[0, T]`.
    pub intervals: usize,
}

impl Trajectory {
    /// Manifold snapshot matching `snapshots[k]`.
    pub fn manifold_at(&self, k: usize) -> Result<DiscreteManifold> {
        let s = &self.snapshots[k];
        match self.flow {
            Flow::None => Ok(self.base.at_time(s.t)),
            Flow::LocalRicci => self.base.with_log_scale(s.log_scale.as_ref().clone(), s.t),
        }
    }

    /// Recomputes the diagnostics of snapshot `k` from the stored fields.
    pub fn recompute_diagnostics(&self, k: usize) -> Result<Diagnostics> {
        let man = self.manifold_at(k)?;
        let s = &self.snapshots[k];
        Ok(diagnose(&man, &self.chi.squared(), &self.chi.omega, s.t, &s.u, &s.v))
    }

    /// End of the interval on which positivity and the caps held.
    pub fn hypothesis_window_end(&self) -> f64 {
        let mut end = self.horizon;
        for b in [&self.positivity_lost, &self.cap_exceeded].into_iter().flatten() {
            end = end.min(b.time);
        }
        end
    }

    /// Uniform spacing between stored snapshots.
    pub fn snapshot_interval(&self) -> f64 {
        self.horizon / self.intervals as f64
    }
}

pub(crate) fn diagnose(man: &DiscreteManifold, chi_sq: &[f64], omega: &[bool], t: f64, u: &[f64], v: &[f64]) -> Diagnostics {
    let gu = grad_norm_sq(man, u);
    let gv = grad_norm_sq(man, v);
    let mut d = Diagnostics {
        t,
        min_u: f64::INFINITY,
        min_v: f64::INFINITY,
        max_u: f64::NEG_INFINITY,
        max_v: f64::NEG_INFINITY,
        max_chi2t_grad_u2: 0.0,
        max_chi2t_grad_v2: 0.0,
        metric_min_eig: man.metric_min_eigenvalue(),
        radius_sq: man.conformal_radius_sq(),
    };
    for k in 0..u.len() {
        d.min_u = d.min_u.min(u[k]);
        d.min_v = d.min_v.min(v[k]);
        d.max_u = d.max_u.max(u[k]);
        d.max_v = d.max_v.max(v[k]);
        if omega[k] {
            d.max_chi2t_grad_u2 = d.max_chi2t_grad_u2.max(chi_sq[k] * t * gu[k]);
            d.max_chi2t_grad_v2 = d.max_chi2t_grad_v2.max(chi_sq[k] * t * gv[k]);
        }
    }
    d
}

/// Mutable integration state.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Log scale factor (empty on graphs).
    pub sigma: Vec<f64>,
}

struct Rates {
    du: Vec<f64>,
    dv: Vec<f64>,
    ds: Vec<f64>,
}

impl Rates {
    fn zeros(n: usize, ns: usize) -> Self {
        Self { du: vec![0.0; n], dv: vec![0.0; n], ds: vec![0.0; ns] }
    }
}

fn is_held(man: &DiscreteManifold, k: usize) -> bool {
    man.grid().is_some_and(|g| g.is_edge(k))
}

fn field_rates(
    man: &DiscreteManifold,
    kind: SystemKind,
    chi_sq: &[f64],
    flow: Flow,
    u: &[f64],
    v: &[f64],
    sigma: &[f64],
    out: &mut Rates,
) -> Result<()> {
    let op = man.drift_operator();
    for k in 0..u.len() {
        if is_held(man, k) {
            out.du[k] = 0.0;
            out.dv[k] = 0.0;
            continue;
        }
        let (f, g) = kind.reaction(u[k], v[k]);
        let c = chi_sq[k];
        if c == 0.0 {
            out.du[k] = f;
            out.dv[k] = g;
        } else {
            let s = if sigma.is_empty() { c } else { c * math::exp(-2.0 * sigma[k]) };
            out.du[k] = s * op.apply_row(k, u) + f;
            out.dv[k] = s * op.apply_row(k, v) + g;
        }
    }
    if flow == Flow::LocalRicci {
        flow_rate(man, chi_sq, sigma, &mut out.ds)?;
    }
    Ok(())
}

fn check_finite(name: &str, x: &[f64], t: f64) -> Result<()> {
    match x.iter().position(|v| !v.is_finite()) {
        Some(node) => Err(Error::NonFinite { name: name.into(), node, time: t }),
        None => Ok(()),
    }
}

/// One step of the coupled pair (and of `σ` when the flow is active).
/// `man` supplies the grid, weight and, for static runs, the metric.
pub fn step_system(state: &State, man: &DiscreteManifold, chi: &CutoffProfile, spec: &SystemSpec, flow: Flow, dt: f64) -> Result<State> {
    let chi_sq = chi.squared();
    step_with(state, man, &chi_sq, spec, flow, dt)
}

fn step_with(state: &State, man: &DiscreteManifold, chi_sq: &[f64], spec: &SystemSpec, flow: Flow, dt: f64) -> Result<State> {
    if flow == Flow::LocalRicci && man.grid().is_none() {
        return Err(Error::Unsupported("metric flow on a weighted graph"));
    }
    let next = match spec.stepper {
        Stepper::ExplicitRk4 => rk4(state, man, chi_sq, spec.kind, flow, dt)?,
        Stepper::ImplicitEuler => imex_euler(state, man, chi_sq, spec.kind, flow, dt)?,
    };
    check_finite("u", &next.u, next.t)?;
    check_finite("v", &next.v, next.t)?;
    check_finite("log scale", &next.sigma, next.t)?;
    Ok(next)
}

fn rk4(state: &State, man: &DiscreteManifold, chi_sq: &[f64], kind: SystemKind, flow: Flow, dt: f64) -> Result<State> {
    let n = state.u.len();
    let ns = if flow == Flow::LocalRicci { state.sigma.len() } else { 0 };
    let mut k: [Rates; 4] = core::array::from_fn(|_| Rates::zeros(n, ns));
    let mut su = state.u.clone();
    let mut sv = state.v.clone();
    let mut ss = state.sigma.clone();
    field_rates(man, kind, chi_sq, flow, &state.u, &state.v, &state.sigma, &mut k[0])?;
    for (s, c) in [(1usize, 0.5), (2, 0.5), (3, 1.0)] {
        let (prev, rest) = k.split_at_mut(s);
        let p = &prev[s - 1];
        for i in 0..n {
            su[i] = state.u[i] + c * dt * p.du[i];
            sv[i] = state.v[i] + c * dt * p.dv[i];
        }
        for i in 0..ns {
            ss[i] = state.sigma[i] + c * dt * p.ds[i];
        }
        field_rates(man, kind, chi_sq, flow, &su, &sv, &ss, &mut rest[0])?;
    }
    // an all-zero increment leaves the value bit-identical
    let combine = |x: &[f64], sel: fn(&Rates) -> &Vec<f64>| -> Vec<f64> {
        let (a, b, c, d) = (sel(&k[0]), sel(&k[1]), sel(&k[2]), sel(&k[3]));
        (0..x.len())
            .map(|i| {
                let incr = a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i];
                if incr == 0.0 {
                    x[i]
                } else {
                    x[i] + dt / 6.0 * incr
                }
            })
            .collect()
    };
    let u = combine(&state.u, |r| &r.du);
    let v = combine(&state.v, |r| &r.dv);
    let sigma = if ns > 0 { combine(&state.sigma, |r| &r.ds) } else { state.sigma.clone() };
    Ok(State { t: state.t + dt, u, v, sigma })
}

/// Solves `(I - dt·s_k L) x = b` row-wise, where `L` is the background
/// drift operator and held rows are the identity.
fn implicit_solve(man: &DiscreteManifold, scale: &[f64], dt: f64, b: &[f64], guess: &[f64]) -> Result<Vec<f64>> {
    let op = man.drift_operator();
    let n = b.len();
    let diag: Vec<f64> = (0..n).map(|k| 1.0 - dt * scale[k] * op.get(k, k)).collect();
    let apply = |x: &[f64], y: &mut [f64]| {
        for k in 0..n {
            y[k] = if scale[k] == 0.0 { x[k] } else { x[k] - dt * scale[k] * op.apply_row(k, x) };
        }
    };
    let mut x = guess.to_vec();
    bicgstab(apply, &diag, b, &mut x, 1e-12, 2000)?;
    // rows with zero scale are exact copies; undo round-off from the solve
    for k in 0..n {
        if scale[k] == 0.0 {
            x[k] = b[k];
        }
    }
    Ok(x)
}

fn imex_euler(state: &State, man: &DiscreteManifold, chi_sq: &[f64], kind: SystemKind, flow: Flow, dt: f64) -> Result<State> {
    let n = state.u.len();
    let sigma = if flow == Flow::LocalRicci {
        let geo = man.grid().ok_or(Error::Unsupported("metric flow on a weighted graph"))?;
        let k0 = man.background_gauss();
        let mut scale = vec![0.0; n];
        let mut rhs = state.sigma.clone();
        for k in 0..n {
            if chi_sq[k] != 0.0 && !geo.is_edge(k) {
                scale[k] = chi_sq[k] * math::exp(-2.0 * state.sigma[k]);
                rhs[k] -= dt * scale[k] * k0[k];
            }
        }
        // the flow operator is Δ₀ alone; strip the drift by using lap0
        let lap = &geo.stencils.lap0;
        let diag: Vec<f64> = (0..n).map(|k| 1.0 - dt * scale[k] * lap.get(k, k)).collect();
        let apply = |x: &[f64], y: &mut [f64]| {
            for k in 0..n {
                y[k] = if scale[k] == 0.0 { x[k] } else { x[k] - dt * scale[k] * lap.apply_row(k, x) };
            }
        };
        let mut x = state.sigma.clone();
        bicgstab(apply, &diag, &rhs, &mut x, 1e-13, 2000)?;
        for k in 0..n {
            if scale[k] == 0.0 {
                x[k] = state.sigma[k];
            }
        }
        x
    } else {
        state.sigma.clone()
    };
    let mut scale = vec![0.0; n];
    let mut bu = state.u.clone();
    let mut bv = state.v.clone();
    for k in 0..n {
        if is_held(man, k) {
            continue;
        }
        let (f, g) = kind.reaction(state.u[k], state.v[k]);
        bu[k] += dt * f;
        bv[k] += dt * g;
        scale[k] = if sigma.is_empty() { chi_sq[k] } else { chi_sq[k] * math::exp(-2.0 * sigma[k]) };
    }
    let u = implicit_solve(man, &scale, dt, &bu, &state.u)?;
    let v = implicit_solve(man, &scale, dt, &bv, &state.v)?;
    Ok(State { t: state.t + dt, u, v, sigma })
}

/// Largest stable RK4 step `cfl · min h² / max χ²` on the given metric.
pub fn explicit_step_limit(man: &DiscreteManifold, chi_sq: &[f64], cfl: f64) -> f64 {
    let max_c = chi_sq.iter().copied().fold(0.0, f64::max);
    if max_c == 0.0 {
        return f64::INFINITY;
    }
    cfl * man.min_spacing_sq(chi_sq) / max_c
}

/// Integrates `spec` to its horizon, calling `observer` with every
/// diagnostics row as it is produced.
///
/// Snapshots are stored at `spec.snapshots + 1` evenly spaced times. A loss
/// of positivity or a cap violation is recorded with its first time and the
/// run continues; `truncated` marks that the valid window ends before `T`.
pub fn solve_trajectory(
    man: &DiscreteManifold,
    chi: &CutoffProfile,
    spec: &SystemSpec,
    flow: Flow,
    observer: &mut dyn FnMut(&Diagnostics),
) -> Result<Trajectory> {
    spec.validate(man)?;
    if chi.samples.len() != man.node_count() {
        return Err(Error::LengthMismatch { name: "chi".into(), len: chi.samples.len(), nodes: man.node_count() });
    }
    if flow == Flow::LocalRicci && man.grid().is_none() {
        return Err(Error::Unsupported("metric flow on a weighted graph"));
    }
    let chi_sq = chi.squared();
    let omega = &chi.omega;
    let mut state = State { t: 0.0, u: spec.u0.clone(), v: spec.v0.clone(), sigma: man.log_scale().as_ref().clone() };
    let mut current = man.at_time(0.0);
    let first = diagnose(&current, &chi_sq, omega, 0.0, &state.u, &state.v);
    observer(&first);
    let mut traj = Trajectory {
        kind: spec.kind,
        flow,
        horizon: spec.horizon,
        base: current.clone(),
        chi: chi.clone(),
        snapshots: vec![Snapshot { t: 0.0, u: state.u.clone(), v: state.v.clone(), log_scale: current.log_scale().clone() }],
        diagnostics: vec![first],
        positivity_lost: None,
        cap_exceeded: None,
        truncated: false,
        steps: 0,
        intervals: spec.snapshots,
    };
    monitor(&mut traj, &state, spec);
    let interval = spec.horizon / spec.snapshots as f64;
    for s in 0..spec.snapshots {
        let t_start = s as f64 * interval;
        let t_end = (s + 1) as f64 * interval;
        let limit = match spec.stepper {
            Stepper::ExplicitRk4 => explicit_step_limit(&current, &chi_sq, spec.cfl),
            Stepper::ImplicitEuler => f64::INFINITY,
        };
        let want = spec.dt.unwrap_or(if limit.is_finite() { limit } else { interval });
        if spec.stepper == Stepper::ExplicitRk4 && want > limit * (1.0 + 1e-9) {
            return Err(Error::InvalidParameter(format!("dt = {want} exceeds the explicit stability limit {limit} at t = {t_start}")));
        }
        let sub = libm::ceil(interval / want - 1e-9).max(1.0) as usize;
        let dt = interval / sub as f64;
        for j in 0..sub {
            let mut next = step_with(&state, &current, &chi_sq, spec, flow, dt)?;
            // land exactly on the snapshot grid
            next.t = if j + 1 == sub { t_end } else { t_start + (j + 1) as f64 * dt };
            if flow == Flow::LocalRicci {
                current = current.with_log_scale(next.sigma.clone(), next.t)?;
                if current.metric_min_eigenvalue() < DEGENERATE_METRIC_EIG {
                    return Err(Error::MetricDegenerated { node: 0, time: next.t, eig: current.metric_min_eigenvalue() });
                }
            } else {
                current = current.at_time(next.t);
            }
            state = next;
            traj.steps += 1;
            let d = diagnose(&current, &chi_sq, omega, state.t, &state.u, &state.v);
            observer(&d);
            traj.diagnostics.push(d);
            monitor(&mut traj, &state, spec);
        }
        traj.snapshots.push(Snapshot { t: state.t, u: state.u.clone(), v: state.v.clone(), log_scale: current.log_scale().clone() });
    }
    traj.truncated = traj.positivity_lost.is_some() || traj.cap_exceeded.is_some();
    Ok(traj)
}

fn first_break(field: &str, x: &[f64], t: f64, broken: impl Fn(f64) -> bool) -> Option<HypothesisBreak> {
    x.iter().position(|&v| broken(v)).map(|node| HypothesisBreak { time: t, node, field: field.into(), value: x[node] })
}

fn monitor(traj: &mut Trajectory, state: &State, spec: &SystemSpec) {
    if traj.positivity_lost.is_none() {
        traj.positivity_lost = first_break("u", &state.u, state.t, |v| v < -POSITIVITY_TOL)
            .or_else(|| first_break("v", &state.v, state.t, |v| v < -POSITIVITY_TOL));
    }
    if let (None, Some([cu, cv])) = (&traj.cap_exceeded, spec.caps) {
        traj.cap_exceeded = first_break("u", &state.u, state.t, |v| v > cu + POSITIVITY_TOL)
            .or_else(|| first_break("v", &state.v, state.t, |v| v > cv + POSITIVITY_TOL));
    }
}

/// Which tensor `h` drives `∂_t g = -2h` in the evolution identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowTensor {
    Zero,
    /// `h = χ² Ric`.
    LocalRicci,
}

/// Which right-hand side to compare against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LemmaForm {
    /// Derived from `∂_t g^{ij} = 2h^{ij}` and the Bochner formula.
    Derived,
    /// Term by term as printed in the source statement, reading the
    /// potential as `(∂_t - χ²Δ_f)u = -λ₁`.
    AsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaSample {
    pub t: f64,
    /// Sup over interior nodes of `|LHS - RHS|`.
    pub residual: f64,
    /// Sup of `|LHS|`, for scale.
    pub lhs_scale: f64,
}

/// Residual of the evolution identity for `Q = χ²|∇u|²` (`for_v` mirrors
/// it for `v`), measured away from open edges and polar caps:
///
/// ```text
/// (∂_t - χ²Δ_f) Q = 2χ²h(∇u,∇u) - 2χ⁴Ric_f(∇u,∇u) - 2χ⁴|Hess u|²
///                 + 4χ³Δ_f u⟨∇u,∇χ⟩ - 2χ²|∇u|²(χΔ_fχ + |∇χ|²)
///                 - 8χ³Hess u(∇u,∇χ) + 2χ²(F_u|∇u|² + F_v⟨∇u,∇v⟩)
/// ```
///
/// The time derivative is a centred difference over neighbouring snapshots
/// (each norm taken in its own metric); everything else is evaluated at
/// the middle snapshot.
pub fn lemma_evolution_residual(traj: &Trajectory, h: FlowTensor, form: LemmaForm, for_v: bool) -> Result<Vec<LemmaSample>> {
    let count = traj.snapshots.len();
    if count < 3 || traj.intervals < 8 {
        return Err(Error::CadenceTooCoarse(format!("{count} snapshots; centred time differences need at least 8 intervals")));
    }
    let chi = &traj.chi;
    let chi_sq = chi.squared();
    let mut q = Vec::with_capacity(count);
    let mut mans = Vec::with_capacity(count);
    for k in 0..count {
        let man = traj.manifold_at(k)?;
        let s = &traj.snapshots[k];
        let w = if for_v { &s.v } else { &s.u };
        let g = grad_norm_sq(&man, w);
        q.push((0..g.len()).map(|i| chi_sq[i] * g[i]).collect::<Vec<f64>>());
        mans.push(man);
    }
    let mut out = Vec::new();
    for k in 1..count - 1 {
        let dt = traj.snapshots[k + 1].t - traj.snapshots[k - 1].t;
        let man = &mans[k];
        let s = &traj.snapshots[k];
        let (w, z) = if for_v { (&s.v, &s.u) } else { (&s.u, &s.v) };
        let field = ScalarField::new(man, "w", w.clone())?;
        let dw = differential(man, w)?;
        let dz = differential(man, z)?;
        let hess = hessian(man, &field)?;
        let lap_w = drift_laplacian(man, w);
        let lap_q = drift_laplacian(man, &q[k]);
        let mut lhs = vec![0.0; w.len()];
        let mut res = vec![0.0; w.len()];
        for i in 0..w.len() {
            if !chi.omega[i] || is_held(man, i) {
                continue;
            }
            let c = chi.value(i);
            let (c2, c3, c4) = (c * c, c * c * c, c * c * c * c);
            let ginv = man.inverse_metric(i);
            let gw = ginv.apply(dw[i]);
            let gchi = ginv.apply(chi.differential(i));
            let grad2 = ginv.bilinear(dw[i], dw[i]);
            let cross = ginv.bilinear(dw[i], dz[i]);
            let ric = man.ricci(i).bilinear(gw, gw);
            let hess_f = man.weight_hessian(i).bilinear(gw, gw);
            let hs = hess.components[i].norm_sq_in(ginv);
            let h_term = match h {
                FlowTensor::Zero => 0.0,
                FlowTensor::LocalRicci => c2 * ric,
            };
            let j = traj.kind.jacobian(s.u[i], s.v[i]);
            let (fw, fz) = if for_v { (j[1][1], j[1][0]) } else { (j[0][0], j[0][1]) };
            let chi_part = 4.0 * c3 * lap_w[i] * ginv.bilinear(dw[i], chi.differential(i))
                - 2.0 * c2 * grad2 * (c * chi.drift_laplacian(man, i) + chi.grad_sq(man, i))
                - 8.0 * c3 * hess.components[i].bilinear(gw, gchi);
            let rhs = match form {
                LemmaForm::Derived => {
                    2.0 * c2 * h_term - 2.0 * c4 * (ric + hess_f) - 2.0 * c4 * hs + chi_part + 2.0 * c2 * (fw * grad2 + fz * cross)
                }
                LemmaForm::AsPrinted => {
                    -2.0 * c2 * (h_term + c2 * ric) - 2.0 * c4 * hess_f - 2.0 * c2 * hs + chi_part + 2.0 * c2 * (fw * grad2 + fz * cross)
                }
            };
            lhs[i] = (q[k + 1][i] - q[k - 1][i]) / dt - chi_sq[i] * lap_q[i];
            res[i] = lhs[i] - rhs;
        }
        out.push(LemmaSample {
            t: s.t,
            residual: regular_sup_norm(man, &res, 2, POLAR_CAP),
            lhs_scale: regular_sup_norm(man, &lhs, 2, POLAR_CAP),
        });
    }
    Ok(out)
}
