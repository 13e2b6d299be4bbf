mod common;

use bernlab_core::calculus::{
    bochner_residual, delta_f_square_residual, grad_norm_sq, gradient, hessian, proof_inequalities_check, regular_sup_norm,
    weighted_laplacian, BandLimited, ScalarField, POLAR_CAP,
};
use bernlab_core::manifold::{build_cutoff, build_manifold, CutoffRegion, DiscreteManifold, GraphSpec, ManifoldSpec, Shape, WeightKind};
use bernlab_core::Error;
use common::{order, patch, sphere, sup_abs, torus};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{PI, TAU};

fn field(man: &DiscreteManifold, f: impl Fn([f64; 2]) -> f64) -> ScalarField {
    ScalarField::from_fn(man, "u", f).unwrap()
}

fn band_limited(man: &DiscreteManifold, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    BandLimited::random(man, 5, 3, || rng.random_range(-1.0..=1.0)).sample(man, "u").unwrap()
}

#[test]
fn constant_fields_have_zero_derivatives() {
    let man = sphere(1.5, 16);
    let u = ScalarField::constant(&man, "c", 3.0).unwrap();
    assert!(sup_abs(grad_norm_sq(&man, &u.values)) == 0.0);
    assert_eq!(sup_abs(weighted_laplacian(&man, &u).unwrap().values), 0.0);
    assert!(hessian(&man, &u).unwrap().components.iter().all(|h| h.xx == 0.0 && h.xy == 0.0 && h.yy == 0.0));
}

#[test]
fn torus_sine_derivatives_converge_at_second_order() {
    let mut h = Vec::new();
    let (mut eg, mut el) = (Vec::new(), Vec::new());
    for n in [16usize, 32, 64] {
        let man = torus(n, 4.0, WeightKind::Zero);
        let u = field(&man, |x| x[0].sin());
        let g = grad_norm_sq(&man, &u.values);
        let l = weighted_laplacian(&man, &u).unwrap().values;
        eg.push(sup_abs((0..man.node_count()).map(|k| g[k] - man.coords(k)[0].cos().powi(2))));
        el.push(sup_abs((0..man.node_count()).map(|k| l[k] + man.coords(k)[0].sin())));
        h.push(TAU / n as f64);
    }
    assert!(order(&h, &eg) > 1.9, "{eg:?}");
    assert!(order(&h, &el) > 1.9, "{el:?}");
}

#[test]
fn sphere_height_function_oracles() {
    let mut h = Vec::new();
    let (mut eg, mut el, mut eh) = (Vec::new(), Vec::new(), Vec::new());
    for n in [16usize, 32, 64] {
        let man = sphere(1.0, n);
        let u = field(&man, |x| x[0].cos());
        let g = grad_norm_sq(&man, &u.values);
        let l = weighted_laplacian(&man, &u).unwrap().values;
        let hs = hessian(&man, &u).unwrap();
        let (mut a, mut b, mut c) = (0.0f64, 0.0f64, 0.0f64);
        for k in 0..man.node_count() {
            let th = man.coords(k)[0];
            a = a.max((g[k] - th.sin().powi(2)).abs());
            b = b.max((l[k] + 2.0 * th.cos()).abs());
            // Hess z = -z g on the unit sphere
            let want = man.metric(k).scale(-th.cos());
            let d = hs.components[k] - want;
            c = c.max(d.xx.abs().max(d.xy.abs()).max(d.yy.abs()));
        }
        eg.push(a);
        el.push(b);
        eh.push(c);
        h.push(PI / n as f64);
    }
    assert!(order(&h, &eg) > 1.8, "{eg:?}");
    assert!(order(&h, &el) > 1.8, "{el:?}");
    assert!(order(&h, &eh) > 1.8, "{eh:?}");
}

#[test]
fn gradient_on_sphere_raises_the_index() {
    let man = sphere(2.0, 16);
    let u = field(&man, |x| x[0].cos());
    let grad = gradient(&man, &u).unwrap();
    for k in 0..man.node_count() {
        // g = 4 diag(1, sin²θ): the θ component is ∂_θ u / 4
        let want = -man.coords(k)[0].sin() / 4.0;
        assert!((grad.components[k][0] - want).abs() < 1e-2);
        assert!(grad.components[k][1].abs() < 1e-12);
    }
}

#[test]
fn drift_laplacian_of_a_linear_function_is_exact() {
    let man = patch(1.0, 17, WeightKind::Linear { axis: 0, slope: 1.0 });
    let u = field(&man, |x| x[0]);
    let l = weighted_laplacian(&man, &u).unwrap().values;
    let geo = man.grid().unwrap();
    for k in (0..man.node_count()).filter(|&k| !geo.is_edge(k)) {
        assert!((l[k] + 1.0).abs() < 1e-12, "node {k}: {}", l[k]);
    }
}

#[test]
fn graph_operators() {
    let man = build_manifold(&ManifoldSpec {
        shape: Shape::Graph(GraphSpec::Cycle { nodes: 8 }),
        synthetic_dimension: 3.0,
        weight: WeightKind::Zero,
    })
    .unwrap();
    let u = field(&man, |x| x[0]);
    let g = grad_norm_sq(&man, &u.values);
    // Γ(u)(x) = ½ Σ_y (u_y - u_x)²; interior nodes of the path 0..7 see steps of 1
    assert_eq!(g[3], 1.0);
    assert!(matches!(hessian(&man, &u), Err(Error::Unsupported(_))));
}

#[test]
fn stale_fields_are_rejected() {
    let man = sphere(2.0, 8);
    let u = field(&man, |x| x[0].cos());
    let later = man.at_time(0.25);
    assert!(matches!(weighted_laplacian(&later, &u), Err(Error::StaleMetric { .. })));
    let short = ScalarField::new(&man, "short", vec![0.0; 3]);
    assert!(matches!(short, Err(Error::LengthMismatch { .. })));
    let nan = ScalarField::new(&man, "nan", vec![f64::NAN; man.node_count()]);
    assert!(matches!(nan, Err(Error::NonFinite { .. })));
}

#[test]
fn identity_residuals_vanish_on_constants() {
    for man in [torus(16, 4.0, WeightKind::Sine { axis: 1, amplitude: 0.3, wavenumber: 1.0 }), sphere(2.0, 16)] {
        let u = ScalarField::constant(&man, "c", 1.7).unwrap();
        assert_eq!(sup_abs(delta_f_square_residual(&man, &u).unwrap().values), 0.0);
        assert_eq!(sup_abs(bochner_residual(&man, &u).unwrap().values), 0.0);
    }
}

fn residual_study(build: impl Fn(usize) -> DiscreteManifold, h0: f64, seed: u64, bochner: bool) -> (f64, Vec<f64>) {
    let mut h = Vec::new();
    let mut err = Vec::new();
    for n in [16usize, 32, 64] {
        let man = build(n);
        let u = band_limited(&man, seed);
        let r = if bochner { bochner_residual(&man, &u) } else { delta_f_square_residual(&man, &u) };
        err.push(regular_sup_norm(&man, &r.unwrap().values, 2, POLAR_CAP));
        h.push(h0 / n as f64);
    }
    (order(&h, &err), err)
}

#[test]
fn square_identity_residual_converges_on_band_limited_fields() {
    let weighted = |n| torus(n, 4.0, WeightKind::Sine { axis: 0, amplitude: 0.5, wavenumber: 1.0 });
    let (p, e) = residual_study(weighted, TAU, 11, false);
    assert!(p >= 1.5, "torus order {p}: {e:?}");
    let (p, e) = residual_study(|n| sphere(2.0, n), PI, 12, false);
    assert!(p >= 1.5, "sphere order {p}: {e:?}");
}

#[test]
fn bochner_residual_converges_on_band_limited_fields() {
    let weighted = |n| torus(n, 4.0, WeightKind::RadialGaussian { center: [3.0, 3.0], amplitude: 0.4, width: 1.0 });
    let (p, e) = residual_study(weighted, TAU, 21, true);
    assert!(p >= 1.0, "torus order {p}: {e:?}");
    let (p, e) = residual_study(|n| sphere(2.0, n), PI, 22, true);
    assert!(p >= 1.0, "sphere order {p}: {e:?}");
}

#[test]
fn inequalities_hold_exactly_on_zero_fields() {
    let man = torus(16, 4.0, WeightKind::Zero);
    let chi = build_cutoff(&man, CutoffRegion::Ball { center: [PI, PI], radius: 2.0 }, 3).unwrap();
    let z = ScalarField::constant(&man, "z", 0.0).unwrap();
    let rep = proof_inequalities_check(&man, &z, &z, &chi, 1e-10).unwrap();
    assert!(rep.passed());
    assert!(rep.checks.iter().all(|c| c.violations == 0 && c.max_violation <= 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weighted_laplacian_is_linear(seed in 0u64..10_000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let man = torus(16, 4.0, WeightKind::Sine { axis: 0, amplitude: 0.7, wavenumber: 2.0 });
        let u = band_limited(&man, seed);
        let v = band_limited(&man, seed + 1);
        let w = ScalarField::new(&man, "w", (0..u.values.len()).map(|k| a * u.values[k] + b * v.values[k]).collect()).unwrap();
        let lu = weighted_laplacian(&man, &u).unwrap().values;
        let lv = weighted_laplacian(&man, &v).unwrap().values;
        let lw = weighted_laplacian(&man, &w).unwrap().values;
        for k in 0..lw.len() {
            let scale = 1.0 + (a * lu[k]).abs() + (b * lv[k]).abs();
            prop_assert!((lw[k] - a * lu[k] - b * lv[k]).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn proof_inequalities_have_no_violations(seed in 0u64..100_000, amp in 0.0f64..1.0) {
        let man = torus(24, 4.5, WeightKind::Sine { axis: 1, amplitude: amp, wavenumber: 1.0 });
        let chi = build_cutoff(&man, CutoffRegion::Ball { center: [PI, PI], radius: 2.5 }, 3).unwrap();
        let u = band_limited(&man, seed);
        let v = band_limited(&man, seed ^ 0x9e37);
        let rep = proof_inequalities_check(&man, &u, &v, &chi, 1e-10).unwrap();
        prop_assert!(rep.passed(), "{:?}", rep.checks);
    }
}
