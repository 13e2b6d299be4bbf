//! Theorem constants Φ, Ψ, Λ, Γ, the bound constants built from them, and
//! the hypothesis gates that must pass before a bound may be called
//! verified.
//!
//! Every formula is evaluated exactly as stated, including the `+8χ²` term
//! of Λ and the trailing `+K` of Γ. Fields are evaluated at every node with
//! the analytic cutoff derivatives; the scalar constants are maxima over Ω.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::manifold::{CutoffProfile, DiscreteManifold};
use crate::math;
use crate::{Error, Result};

/// Slack allowed when comparing supplied bounds with certified ones.
pub const CERTIFICATION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TheoremId {
    /// Linear system, static manifold.
    T1,
    /// Exponential system, static manifold.
    T2,
    /// Linear system, local Ricci flow.
    T3,
    /// Exponential system, local Ricci flow.
    T4,
}

impl TheoremId {
    pub fn is_exponential(self) -> bool {
        matches!(self, TheoremId::T2 | TheoremId::T4)
    }

    pub fn is_evolving(self) -> bool {
        matches!(self, TheoremId::T3 | TheoremId::T4)
    }

    /// Strict lower bound the scalar constant must exceed.
    pub fn constant_floor(self, horizon: f64) -> f64 {
        if self.is_exponential() {
            -1.0 / (2.0 * horizon)
        } else {
            -(1.0 + 1.0 / (2.0 * horizon))
        }
    }
}

impl core::fmt::Display for TheoremId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Scalar inputs shared by all four theorems. Unused entries are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantInputs {
    pub horizon: f64,
    /// `max_Ω u₀`
    pub u0_max: f64,
    /// `max_Ω v₀`
    pub v0_max: f64,
    /// Curvature bound `K` (T1, T2; trailing term of Γ in T4).
    pub curvature: f64,
    /// `|∇f| ≤ K₁` (T3, T4)
    pub k1: f64,
    /// `Hess f ≥ -K₂ g` (T3, T4)
    pub k2: f64,
    pub exponential: Option<ExponentialCoefficients>,
}

/// Reaction coefficients `a, b` and caps `u ≤ ln b₁`, `v ≤ ln b₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialCoefficients {
    pub a: f64,
    pub b: f64,
    pub b1: f64,
    pub b2: f64,
}

/// A pointwise constant field and its maximum over Ω.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantField {
    /// `"Phi"`, `"Psi(a)"`, ...
    pub label: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<f64>,
    pub max: f64,
    pub argmax: usize,
}

impl ConstantField {
    fn new(label: &str, values: Vec<f64>, chi: &CutoffProfile) -> Self {
        let (max, argmax) = max_over_omega(&values, chi);
        Self { label: label.to_string(), values, max, argmax }
    }
}

/// `(max, argmax)` over nodes of Ω with a fixed reduction order.
pub fn max_over_omega(values: &[f64], chi: &CutoffProfile) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (k, &v) in values.iter().enumerate() {
        if chi.omega[k] && v > best.0 {
            best = (v, k);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateKind {
    /// Must hold for the verdict to be "verified" at all.
    Static,
    /// Failing at time `t` restricts the claim window to `[0, t)`.
    Window,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateCheck {
    pub name: String,
    pub kind: GateKind,
    pub passed: bool,
    pub witness_node: Option<usize>,
    pub witness_time: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HypothesisGate {
    pub checks: Vec<GateCheck>,
}

impl HypothesisGate {
    pub fn push(&mut self, name: &str, kind: GateKind, passed: bool, detail: String) -> &mut GateCheck {
        self.checks.push(GateCheck { name: name.to_string(), kind, passed, witness_node: None, witness_time: None, detail });
        self.checks.last_mut().unwrap()
    }

    pub fn static_passed(&self) -> bool {
        self.checks.iter().filter(|c| c.kind == GateKind::Static).all(|c| c.passed)
    }

    pub fn first_static_failure(&self) -> Option<&GateCheck> {
        self.checks.iter().find(|c| c.kind == GateKind::Static && !c.passed)
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&GateCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremConstants {
    pub theorem: TheoremId,
    pub m: f64,
    pub n: usize,
    pub inputs: ConstantInputs,
    /// One field for T1/T3; the `a` and `b` variants for T2/T4.
    pub fields: Vec<ConstantField>,
    /// `B₁ / C₁ / D₁ / E₁`
    pub bound_u: f64,
    /// `B₂ / C₂ / D₂ / E₂`
    pub bound_v: f64,
    pub gate: HypothesisGate,
    /// Interpretation choices applied while evaluating the formulas.
    pub policy: Vec<String>,
}

impl TheoremConstants {
    /// Scalar constant used in the `u` bound.
    pub fn constant_u(&self) -> f64 {
        self.fields[0].max
    }

    /// Scalar constant used in the `v` bound.
    pub fn constant_v(&self) -> f64 {
        self.fields.last().unwrap().max
    }

    /// Coefficients `(α, β)` of the auxiliary function
    /// `G = χ²t|∇u|² + α u² + β v²` (and its mirror for `v` when `for_v`).
    pub fn aux_coefficients(&self, for_v: bool) -> (f64, f64) {
        let t = self.inputs.horizon;
        let (c, cap) = match (for_v, self.inputs.exponential) {
            (false, Some(e)) => (self.constant_u(), e.b2 * e.b2),
            (true, Some(e)) => (self.constant_v(), e.b1 * e.b1),
            (false, None) => (self.constant_u(), 1.0),
            (true, None) => (self.constant_v(), 1.0),
        };
        (c * t + 0.5, t * cap)
    }

    /// Re-evaluates the closed-form bounds from the echoed inputs.
    pub fn closed_form_bounds(&self) -> (f64, f64) {
        let i = &self.inputs;
        let (au, bu) = self.aux_coefficients(false);
        let (av, bv) = self.aux_coefficients(true);
        (au * i.u0_max + bu * i.v0_max, av * i.v0_max + bv * i.u0_max)
    }
}

/// Geometric pieces of the constants at one node.
struct CutoffTerms {
    chi: f64,
    grad_sq: f64,
    lap: f64,
    lap_f: f64,
}

fn cutoff_terms(man: &DiscreteManifold, chi: &CutoffProfile) -> Vec<CutoffTerms> {
    (0..man.node_count())
        .map(|k| {
            if man.grid().is_none() {
                // graphs only carry constant cutoffs
                return CutoffTerms { chi: chi.value(k), grad_sq: 0.0, lap: 0.0, lap_f: 0.0 };
            }
            CutoffTerms { chi: chi.value(k), grad_sq: chi.grad_sq(man, k), lap: chi.laplacian(man, k), lap_f: chi.drift_laplacian(man, k) }
        })
        .collect()
}

/// `Φ = 8m|∇χ|² - χΔ_fχ + 7|∇χ|² + c + K`, with `c = ¼` for Φ and `ξ²/4`
/// for Ψ.
fn phi_like(man: &DiscreteManifold, terms: &[CutoffTerms], constant: f64, k: f64) -> Vec<f64> {
    let m = man.synthetic_dimension();
    terms.iter().map(|t| 8.0 * m * t.grad_sq - t.chi * t.lap_f + 7.0 * t.grad_sq + constant + k).collect()
}

/// `Λ = K₂χ² + 8m|∇χ|² + χ²K₁/(m-n) + 8χ² - (χΔχ + |∇χ|²) + ¼ + χ|∇χ|K₁`.
pub fn lambda_field(man: &DiscreteManifold, chi: &CutoffProfile, k1: f64, k2: f64) -> Vec<f64> {
    let m = man.synthetic_dimension();
    let mn = m - man.dimension() as f64;
    cutoff_terms(man, chi)
        .iter()
        .map(|t| {
            let c2 = t.chi * t.chi;
            k2 * c2 + 8.0 * m * t.grad_sq + c2 * k1 / mn + 8.0 * c2 - (t.chi * t.lap + t.grad_sq)
                + 0.25
                + t.chi * math::sqrt(t.grad_sq) * k1
        })
        .collect()
}

/// `Γ = K₂χ² + 8m|∇χ|² + χ²K₁²/(m-n) - χΔχ + 7|∇χ|² + χ|∇χ|K₁ + ξ²/4 + K`.
pub fn gamma_field(man: &DiscreteManifold, chi: &CutoffProfile, k1: f64, k2: f64, xi: f64, k: f64) -> Vec<f64> {
    let m = man.synthetic_dimension();
    let mn = m - man.dimension() as f64;
    cutoff_terms(man, chi)
        .iter()
        .map(|t| {
            let c2 = t.chi * t.chi;
            k2 * c2 + 8.0 * m * t.grad_sq + c2 * k1 * k1 / mn - t.chi * t.lap
                + 7.0 * t.grad_sq
                + t.chi * math::sqrt(t.grad_sq) * k1
                + xi * xi / 4.0
                + k
        })
        .collect()
}

fn validate(man: &DiscreteManifold, inputs: &ConstantInputs) -> Result<()> {
    if !(inputs.horizon > 0.0 && inputs.horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!("horizon T must be positive, got {}", inputs.horizon)));
    }
    for (name, v) in [("max u0", inputs.u0_max), ("max v0", inputs.v0_max), ("K", inputs.curvature), ("K1", inputs.k1), ("K2", inputs.k2)] {
        if !v.is_finite() {
            return Err(Error::NonFinite { name: name.into(), node: 0, time: man.time() });
        }
    }
    Ok(())
}

fn floor_gate(gate: &mut HypothesisGate, theorem: TheoremId, field: &ConstantField, horizon: f64) {
    let floor = theorem.constant_floor(horizon);
    let passed = field.max > floor;
    let c = gate.push(
        &format!("{}-floor", field.label),
        GateKind::Static,
        passed,
        format!("max {} = {} must exceed {}", field.label, field.max, floor),
    );
    c.witness_node = Some(field.argmax);
}

fn nonneg_gate(gate: &mut HypothesisGate, name: &str, value: f64) {
    gate.push(name, GateKind::Static, value >= 0.0, format!("{name} = {value} must be non-negative"));
}

fn exponential_gates(gate: &mut HypothesisGate, e: &ExponentialCoefficients) {
    gate.push("a-negative", GateKind::Static, e.a < 0.0, format!("a = {} (the exponential case is only resolved for a < 0, b < 0)", e.a));
    gate.push("b-negative", GateKind::Static, e.b < 0.0, format!("b = {} (the exponential case is only resolved for a < 0, b < 0)", e.b));
    gate.push("b1-above-one", GateKind::Static, e.b1 > 1.0, format!("b1 = {} must exceed 1", e.b1));
    gate.push("b2-above-one", GateKind::Static, e.b2 > 1.0, format!("b2 = {} must exceed 1", e.b2));
}

fn curvature_gate(gate: &mut HypothesisGate, man: &DiscreteManifold, k: f64) {
    let certified = man.curvature().lower_bound;
    let c = gate.push(
        "curvature-certified",
        GateKind::Static,
        k + CERTIFICATION_TOL >= certified,
        format!("supplied K = {k}, certified Ric_f^(m-n) >= -({certified}) g"),
    );
    c.witness_node = Some(man.curvature().witness);
    c.witness_time = Some(man.time());
}

/// Static gate that `K₁, K₂` dominate the weight at this snapshot.
pub fn weight_gate(gate: &mut HypothesisGate, man: &DiscreteManifold, k1: f64, k2: f64, kind: GateKind) {
    let w = man.weight();
    let ok = w.grad_sup <= k1 + CERTIFICATION_TOL && w.hessian_lower <= k2 + CERTIFICATION_TOL;
    let c = gate.push(
        "weight-certified",
        kind,
        ok,
        format!("|grad f| <= {} and Hess f >= -({}) g measured; supplied K1 = {k1}, K2 = {k2}", w.grad_sup, w.hessian_lower),
    );
    c.witness_time = Some(man.time());
}

fn finish(
    theorem: TheoremId,
    man: &DiscreteManifold,
    inputs: ConstantInputs,
    fields: Vec<ConstantField>,
    mut gate: HypothesisGate,
    policy: Vec<String>,
) -> TheoremConstants {
    for f in &fields {
        floor_gate(&mut gate, theorem, f, inputs.horizon);
    }
    let mut c = TheoremConstants {
        theorem,
        m: man.synthetic_dimension(),
        n: man.dimension(),
        inputs,
        fields,
        bound_u: 0.0,
        bound_v: 0.0,
        gate,
        policy,
    };
    let (bu, bv) = c.closed_form_bounds();
    c.bound_u = bu;
    c.bound_v = bv;
    c
}

/// T1: Φ and `B₁ = (Φ₀T+½)max u₀ + T max v₀`, `B₂` mirrored.
pub fn phi_constants(man: &DiscreteManifold, chi: &CutoffProfile, inputs: ConstantInputs) -> Result<TheoremConstants> {
    validate(man, &inputs)?;
    let mut inputs = inputs;
    inputs.exponential = None;
    let mut gate = HypothesisGate::default();
    nonneg_gate(&mut gate, "K-nonnegative", inputs.curvature);
    curvature_gate(&mut gate, man, inputs.curvature);
    let terms = cutoff_terms(man, chi);
    let phi = ConstantField::new("Phi", phi_like(man, &terms, 0.25, inputs.curvature), chi);
    Ok(finish(TheoremId::T1, man, inputs, alloc::vec![phi], gate, Vec::new()))
}

/// T2: Ψ(a), Ψ(b) and `C₁ = (Ψ₀(a)T+½)max u₀ + Tb₂² max v₀`,
/// `C₂ = (Ψ₀(b)T+½)max v₀ + Tb₁² max u₀`.
pub fn psi_constants(man: &DiscreteManifold, chi: &CutoffProfile, inputs: ConstantInputs) -> Result<TheoremConstants> {
    validate(man, &inputs)?;
    let e = inputs.exponential.ok_or_else(|| Error::InvalidParameter("T2 needs exponential coefficients a, b, b1, b2".into()))?;
    let mut gate = HypothesisGate::default();
    exponential_gates(&mut gate, &e);
    nonneg_gate(&mut gate, "K-nonnegative", inputs.curvature);
    curvature_gate(&mut gate, man, inputs.curvature);
    let terms = cutoff_terms(man, chi);
    let fa = ConstantField::new("Psi(a)", phi_like(man, &terms, e.a * e.a / 4.0, inputs.curvature), chi);
    let fb = ConstantField::new("Psi(b)", phi_like(man, &terms, e.b * e.b / 4.0, inputs.curvature), chi);
    let policy = alloc::vec!["the v bound uses Psi0(K, b); the proof text reuses Psi0(K, a)".to_string()];
    Ok(finish(TheoremId::T2, man, inputs, alloc::vec![fa, fb], gate, policy))
}

/// T3: Λ and `D₁ = (Λ₀T+½)max u₀ + T max v₀`, `D₂` mirrored.
///
/// Inputs are only `χ`, `K₁`, `K₂`, `m`, `n`: no curvature of the evolving
/// metric enters.
pub fn lambda_constants(man: &DiscreteManifold, chi: &CutoffProfile, inputs: ConstantInputs) -> Result<TheoremConstants> {
    validate(man, &inputs)?;
    let mut inputs = inputs;
    inputs.exponential = None;
    inputs.curvature = 0.0;
    let mut gate = HypothesisGate::default();
    nonneg_gate(&mut gate, "K1-nonnegative", inputs.k1);
    nonneg_gate(&mut gate, "K2-nonnegative", inputs.k2);
    weight_gate(&mut gate, man, inputs.k1, inputs.k2, GateKind::Static);
    let field = ConstantField::new("Lambda", lambda_field(man, chi, inputs.k1, inputs.k2), chi);
    let policy = alloc::vec![
        "Lambda includes the +8 chi^2 term as written".to_string(),
        "K1 bounds |grad f| and K2 bounds -Hess f, following the proof".to_string(),
    ];
    Ok(finish(TheoremId::T3, man, inputs, alloc::vec![field], gate, policy))
}

/// T4: Γ(a), Γ(b) and `E₁ = (Γ₀(a)T+½)max u₀ + Tb₂² max v₀`,
/// `E₂ = (Γ₀(b)T+½)max v₀ + Tb₁² max u₀`. The trailing `K` of Γ is
/// `inputs.curvature` (0 unless supplied).
pub fn gamma_constants(man: &DiscreteManifold, chi: &CutoffProfile, inputs: ConstantInputs) -> Result<TheoremConstants> {
    validate(man, &inputs)?;
    let e = inputs.exponential.ok_or_else(|| Error::InvalidParameter("T4 needs exponential coefficients a, b, b1, b2".into()))?;
    let mut gate = HypothesisGate::default();
    exponential_gates(&mut gate, &e);
    nonneg_gate(&mut gate, "K-nonnegative", inputs.curvature);
    nonneg_gate(&mut gate, "K1-nonnegative", inputs.k1);
    nonneg_gate(&mut gate, "K2-nonnegative", inputs.k2);
    weight_gate(&mut gate, man, inputs.k1, inputs.k2, GateKind::Static);
    let (k1, k2, k) = (inputs.k1, inputs.k2, inputs.curvature);
    let fa = ConstantField::new("Gamma(a)", gamma_field(man, chi, k1, k2, e.a, k), chi);
    let fb = ConstantField::new("Gamma(b)", gamma_field(man, chi, k1, k2, e.b, k), chi);
    let policy = alloc::vec![
        format!("trailing K of Gamma set to {k}"),
        "K1 bounds |grad f| and K2 bounds -Hess f, following the proof".to_string(),
        "E1 uses Gamma0(a) and E2 uses Gamma0(b)".to_string(),
    ];
    Ok(finish(TheoremId::T4, man, inputs, alloc::vec![fa, fb], gate, policy))
}

/// Dispatches on the theorem id.
pub fn theorem_constants(
    theorem: TheoremId,
    man: &DiscreteManifold,
    chi: &CutoffProfile,
    inputs: ConstantInputs,
) -> Result<TheoremConstants> {
    match theorem {
        TheoremId::T1 => phi_constants(man, chi, inputs),
        TheoremId::T2 => psi_constants(man, chi, inputs),
        TheoremId::T3 => lambda_constants(man, chi, inputs),
        TheoremId::T4 => gamma_constants(man, chi, inputs),
    }
}
