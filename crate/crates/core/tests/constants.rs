mod common;

use bernlab_core::constants::{
    gamma_constants, lambda_constants, max_over_omega, phi_constants, psi_constants, theorem_constants, ConstantInputs,
    ExponentialCoefficients, TheoremId,
};
use bernlab_core::manifold::{build_cutoff, CutoffProfile, CutoffRegion, DiscreteManifold, WeightKind};
use bernlab_core::Error;
use common::{patch, torus};
use proptest::prelude::*;
use std::f64::consts::{E, PI};

fn inputs(horizon: f64, u0_max: f64, v0_max: f64) -> ConstantInputs {
    ConstantInputs { horizon, u0_max, v0_max, curvature: 0.0, k1: 0.0, k2: 0.0, exponential: None }
}

fn exp_coeffs(a: f64, b: f64) -> Option<ExponentialCoefficients> {
    Some(ExponentialCoefficients { a, b, b1: E, b2: E })
}

fn flat_whole() -> (DiscreteManifold, CutoffProfile) {
    let man = torus(16, 4.0, WeightKind::Zero);
    let chi = build_cutoff(&man, CutoffRegion::Whole, 3).unwrap();
    (man, chi)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-14 * b.abs().max(1.0)
}

#[test]
fn phi_is_a_quarter_on_the_flat_torus() {
    let (man, chi) = flat_whole();
    let c = phi_constants(&man, &chi, inputs(1.0, 1.0, 1.0)).unwrap();
    assert!(c.fields[0].values.iter().all(|&v| v == 0.25));
    assert_eq!(c.constant_u(), 0.25);
    assert!(close(c.bound_u, 1.75));
    assert!(close(c.bound_v, 1.75));
    assert!(c.gate.all_passed());
}

#[test]
fn phi_at_the_bump_center_is_twelve_and_a_quarter() {
    let man = patch(2.0, 65, WeightKind::Zero);
    let chi = build_cutoff(&man, CutoffRegion::Ball { center: [0.0, 0.0], radius: 1.0 }, 3).unwrap();
    let c = phi_constants(&man, &chi, inputs(1.0, 1.0, 1.0)).unwrap();
    let center = man.grid().unwrap().index(32, 32);
    assert!((c.fields[0].values[center] - 12.25).abs() < 1e-12);
    assert!(c.constant_u() >= 12.25);
}

#[test]
fn psi_examples() {
    let (man, chi) = flat_whole();
    let mut i = inputs(1.0, 1.0, 1.0);
    i.exponential = exp_coeffs(-1.0, -1.0);
    let c = psi_constants(&man, &chi, i).unwrap();
    assert_eq!(c.constant_u(), 0.25);
    assert!(close(c.bound_u, 0.75 + E * E));
    assert!(c.gate.all_passed());
    i.exponential = exp_coeffs(-2.0, -1.0);
    let c = psi_constants(&man, &chi, i).unwrap();
    assert_eq!(c.constant_u(), 1.0);
    assert_eq!(c.constant_v(), 0.25);
}

#[test]
fn lambda_examples() {
    let (man, chi) = flat_whole();
    let c = lambda_constants(&man, &chi, inputs(0.5, 2.0, 0.0)).unwrap();
    assert!(c.fields[0].values.iter().all(|&v| v == 8.25));
    assert!(close(c.bound_u, 9.25));
    let man = patch(2.0, 33, WeightKind::Zero);
    let none = build_cutoff(&man, CutoffRegion::Vanishing, 3).unwrap();
    let c = lambda_constants(&man, &none, inputs(1.0, 1.0, 1.0)).unwrap();
    assert!(c.fields[0].values.iter().all(|&v| v == 0.25));
}

#[test]
fn gamma_examples() {
    let (man, chi) = flat_whole();
    let mut i = inputs(1.0, 1.0, 1.0);
    i.exponential = exp_coeffs(-2.0, -2.0);
    let c = gamma_constants(&man, &chi, i).unwrap();
    assert!(c.fields[0].values.iter().all(|&v| v == 1.0));
    assert!(close(c.bound_u, 1.5 + E * E));
    assert!((c.bound_u - 8.8890561).abs() < 1e-7);
    let p = patch(2.0, 33, WeightKind::Zero);
    let none = build_cutoff(&p, CutoffRegion::Vanishing, 3).unwrap();
    i.curvature = 0.3;
    let c = gamma_constants(&p, &none, i).unwrap();
    assert!(c.fields[0].values.iter().all(|&v| close(v, 1.0 + 0.3)));
}

#[test]
fn stored_maxima_and_bounds_recompute() {
    let man = torus(24, 4.0, WeightKind::Sine { axis: 0, amplitude: 0.5, wavenumber: 1.0 });
    let chi = build_cutoff(&man, CutoffRegion::Ball { center: [PI, PI], radius: 2.0 }, 3).unwrap();
    let mut i = inputs(0.7, 1.3, 0.4);
    i.curvature = man.curvature().lower_bound;
    i.k1 = man.weight().grad_sup;
    i.k2 = man.weight().hessian_lower;
    i.exponential = exp_coeffs(-0.5, -1.5);
    for t in [TheoremId::T1, TheoremId::T2, TheoremId::T3, TheoremId::T4] {
        let c = theorem_constants(t, &man, &chi, i).unwrap();
        for f in &c.fields {
            assert_eq!(max_over_omega(&f.values, &chi), (f.max, f.argmax));
        }
        let (bu, bv) = c.closed_form_bounds();
        assert!(close(c.bound_u, bu) && close(c.bound_v, bv), "{t}");
        assert!(c.gate.static_passed(), "{t}: {:?}", c.gate.first_static_failure());
    }
}

#[test]
fn exponential_coefficients_are_gated() {
    let (man, chi) = flat_whole();
    let mut i = inputs(1.0, 1.0, 1.0);
    i.exponential = exp_coeffs(1.0, -1.0);
    let c = psi_constants(&man, &chi, i).unwrap();
    assert!(!c.gate.static_passed());
    assert_eq!(c.gate.first_static_failure().unwrap().name, "a-negative");
    i.exponential = Some(ExponentialCoefficients { a: -1.0, b: -1.0, b1: 0.5, b2: E });
    assert!(!gamma_constants(&man, &chi, i).unwrap().gate.static_passed());
    i.exponential = None;
    assert!(matches!(psi_constants(&man, &chi, i), Err(Error::InvalidParameter(_))));
}

#[test]
fn under_certified_bounds_fail_the_gate() {
    let man = torus(24, 4.0, WeightKind::Sine { axis: 0, amplitude: 1.0, wavenumber: 1.0 });
    let chi = build_cutoff(&man, CutoffRegion::Whole, 3).unwrap();
    let c = phi_constants(&man, &chi, inputs(1.0, 1.0, 1.0)).unwrap();
    assert!(!c.gate.get("curvature-certified").unwrap().passed);
    let c = lambda_constants(&man, &chi, inputs(1.0, 1.0, 1.0)).unwrap();
    assert!(!c.gate.get("weight-certified").unwrap().passed);
}

#[test]
fn floor_gate_uses_the_theorem_threshold() {
    assert_eq!(TheoremId::T1.constant_floor(1.0), -1.5);
    assert_eq!(TheoremId::T4.constant_floor(2.0), -0.25);
}

#[test]
fn doubling_max_u0_doubles_the_first_summand() {
    let (man, chi) = flat_whole();
    let a = phi_constants(&man, &chi, inputs(1.0, 1.0, 1.0)).unwrap();
    let b = phi_constants(&man, &chi, inputs(1.0, 2.0, 1.0)).unwrap();
    let first = |c: &bernlab_core::constants::TheoremConstants| c.bound_u - c.inputs.horizon * c.inputs.v0_max;
    assert_eq!(first(&b), 2.0 * first(&a));
}

#[test]
fn constants_do_not_read_the_evolving_curvature() {
    // Λ₀ and Γ₀ depend on χ, K₁, K₂, m, n, ξ, T only: two metrics with
    // different curvature give the same constants under χ ≡ 1
    let a = common::sphere(2.0, 16);
    let b = common::sphere(0.5, 16);
    let chi = build_cutoff(&a, CutoffRegion::Whole, 3).unwrap();
    let mut i = inputs(1.0, 1.0, 1.0);
    i.exponential = exp_coeffs(-1.0, -1.0);
    for t in [TheoremId::T3, TheoremId::T4] {
        let ca = theorem_constants(t, &a, &chi, i).unwrap();
        let cb = theorem_constants(t, &b, &chi, i).unwrap();
        assert_eq!(ca.bound_u, cb.bound_u);
        assert_eq!(ca.constant_u(), cb.constant_u());
    }
}

fn bump_setup(weight: WeightKind) -> (DiscreteManifold, CutoffProfile) {
    let man = torus(24, 4.0, weight);
    let chi = build_cutoff(&man, CutoffRegion::Ball { center: [PI, PI], radius: 2.5 }, 3).unwrap();
    (man, chi)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn constants_are_monotone_in_their_parameters(
        k in 0.0f64..3.0, dk in 0.0f64..1.0,
        k1 in 0.0f64..3.0, dk1 in 0.0f64..1.0,
        k2 in 0.0f64..3.0, dk2 in 0.0f64..1.0,
        xi in 0.1f64..3.0, dxi in 0.0f64..1.0,
    ) {
        let (man, chi) = bump_setup(WeightKind::Zero);
        let base = |k, k1, k2, xi: f64| ConstantInputs {
            horizon: 1.0, u0_max: 1.0, v0_max: 1.0, curvature: k, k1, k2,
            exponential: Some(ExponentialCoefficients { a: -xi, b: -xi, b1: E, b2: E }),
        };
        let lo = base(k, k1, k2, xi);
        for hi in [base(k + dk, k1, k2, xi), base(k, k1 + dk1, k2, xi), base(k, k1, k2 + dk2, xi), base(k, k1, k2, xi + dxi)] {
            for t in [TheoremId::T1, TheoremId::T2, TheoremId::T3, TheoremId::T4] {
                let a = theorem_constants(t, &man, &chi, lo).unwrap();
                let b = theorem_constants(t, &man, &chi, hi).unwrap();
                prop_assert!(b.constant_u() >= a.constant_u(), "{}", t);
                prop_assert!(b.bound_u >= a.bound_u, "{}", t);
            }
        }
    }

    #[test]
    fn phi_decomposes_into_its_summands(k in 0.0f64..2.0, amp in 0.0f64..1.0) {
        let (man, chi) = bump_setup(WeightKind::Sine { axis: 0, amplitude: amp, wavenumber: 1.0 });
        let mut i = inputs(1.0, 1.0, 1.0);
        i.curvature = man.curvature().lower_bound + k;
        let full = phi_constants(&man, &chi, i).unwrap();
        let m = man.synthetic_dimension();
        for node in 0..man.node_count() {
            let g = chi.grad_sq(&man, node);
            let nonneg = [8.0 * m * g, 7.0 * g, 0.25, i.curvature];
            let rest = -chi.value(node) * chi.drift_laplacian(&man, node);
            let phi = full.fields[0].values[node];
            prop_assert!((phi - rest - nonneg.iter().sum::<f64>()).abs() <= 1e-12 * phi.abs().max(1.0));
            prop_assert!(nonneg.iter().all(|&s| s >= 0.0) && phi >= rest);
        }
    }
}
