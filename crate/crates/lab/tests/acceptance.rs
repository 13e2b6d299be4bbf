//! Acceptance criteria for the lab. Prints one PASS/FAIL line per criterion
//! and exits nonzero when any fails.

use std::f64::consts::{E, PI};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use bernlab::run::{constants, prepare, refinement_study, run_theorem, TheoremRun};
use bernlab::scenario::{parse_scenario, Scenario};
use bernlab::suite::{identities, inequalities, reference_u, SQUARE_TARGET_ORDER};
use bernlab_core::manifold::{build_cutoff, build_manifold, evolve_metric, CutoffRegion, ManifoldSpec, Shape, WeightKind};
use bernlab_core::verify::{check_aux_function, check_bernstein, AuxBudget, Verdict, DEFAULT_SLACK};

const SEED: u64 = bernlab::scenario::DEFAULT_SEED;

// pinned tolerances
const ORACLE_TOL: f64 = 1e-4;
const ORACLE_SECONDS: f64 = 60.0;
const SLACK: f64 = DEFAULT_SLACK;
const EXACT: f64 = 1e-12;
const RADIUS_TOL: f64 = 1e-3;
const IDENTITY_ORDER: f64 = 1.0;
const IDENTITY_SECONDS: f64 = 120.0;
const FUZZ_FIELDS: usize = 1000;
const FUZZ_TOL: f64 = 1e-10;
const AUX_SLACK: f64 = 0.02;
const AUX_FRACTION: f64 = 0.99;
const MUTATION: f64 = 0.1;

struct Line {
    id: u32,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn scenario(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.toml"));
    parse_scenario(&path).expect("reference scenario")
}

fn solve(s: &Scenario) -> TheoremRun {
    let setup = prepare(s).unwrap();
    let c = constants(&setup).unwrap();
    run_theorem(setup, c, s.tolerances.slack, &mut |_| {}).unwrap()
}

fn fidelity(run: &TheoremRun, seconds: f64) -> Line {
    let man = &run.setup.man;
    let last = run.trajectory.snapshots.last().unwrap();
    let err = (0..man.node_count()).map(|k| (last.u[k] - reference_u(man.coords(k)[0], last.t)).abs()).fold(0.0, f64::max);
    let at_origin = last.u[0];
    let pass = last.t == 1.0 && err <= ORACLE_TOL && seconds < ORACLE_SECONDS;
    Line {
        id: 1,
        title: "solver fidelity, static torus 128^2",
        pass,
        detail: format!(
            "sup error {err:.3e} (tol {ORACLE_TOL:e}); u(0, 1) = {at_origin:.9} vs closed form {:.9}; {seconds:.1} s (limit {ORACLE_SECONDS} s)",
            reference_u(0.0, 1.0)
        ),
    }
}

fn theorem_one(s: &Scenario, run: &TheoremRun) -> Line {
    let c = &run.constants;
    let phi_ok = (c.constant_u() - 0.25).abs() <= EXACT;
    let b1_ok = (c.bound_u - 1.75).abs() <= EXACT;
    let margin_ok = run.report.worst_margin <= SLACK && run.report.verdict == Verdict::Verified;
    let (study, _) = refinement_study(s, &[32, 64, 128]).unwrap();
    let pass = phi_ok && b1_ok && margin_ok && study.non_increasing;
    Line {
        id: 2,
        title: "T1 verification",
        pass,
        detail: format!(
            "Phi0 = {} [{}]; B1 = {} vs 1.75 [{}] (max u0 = {}); worst margin {:.6} <= {SLACK} [{}]; margins 32/64/128 = {:?}, non-increasing [{}], extrapolated limit {:?}",
            c.constant_u(),
            ok(phi_ok),
            c.bound_u,
            ok(b1_ok),
            c.inputs.u0_max,
            run.report.worst_margin,
            ok(margin_ok),
            study.worst_margins,
            ok(study.non_increasing),
            study.extrapolated_limit,
        ),
    }
}

fn theorem_two() -> Line {
    let s = scenario("t2-torus");
    let run = solve(&s);
    let c = &run.constants;
    let c1_ok = (c.bound_u - (0.75 + E * E)).abs() <= EXACT;
    let data_ok = run.setup.spec.u0.iter().chain(&run.setup.spec.v0).all(|&x| (0.0..=1.0).contains(&x));
    let gates_ok = run.trajectory.positivity_lost.is_none() && run.trajectory.cap_exceeded.is_none();
    let margin_ok = run.report.worst_margin <= SLACK && run.report.verdict == Verdict::Verified;
    let pass = c1_ok && data_ok && gates_ok && margin_ok;
    let brk = run.trajectory.positivity_lost.as_ref().map(|b| format!("{} < 0 at t = {:.4}", b.field, b.time));
    Line {
        id: 3,
        title: "T2 verification, a = b = -1",
        pass,
        detail: format!(
            "C1 = {:.9} vs 0.75 + e^2 [{}]; data in [0, 1] [{}]; gates to T = 1 [{}] ({}); worst margin {:.6} on [0, {:.4}] [{}]",
            c.bound_u,
            ok(c1_ok),
            ok(data_ok),
            ok(gates_ok),
            brk.unwrap_or_else(|| "no break".into()),
            run.report.worst_margin,
            run.report.window_end,
            ok(margin_ok),
        ),
    }
}

fn ricci_baseline() -> Line {
    let sphere =
        |resolution| ManifoldSpec { shape: Shape::Sphere { radius: 2.0, resolution }, synthetic_dimension: 4.0, weight: WeightKind::Zero };
    let man = build_manifold(&sphere([32, 64])).unwrap();
    let chi = build_cutoff(&man, CutoffRegion::Whole, 3).unwrap();
    let dt = 1.0 / 1024.0;
    let mut cur = man.clone();
    let mut worst = 0.0f64;
    for step in 1..=1024 {
        cur = evolve_metric(&cur, &chi, dt).unwrap();
        let t = step as f64 * dt;
        worst = worst.max((cur.conformal_radius_sq() - (4.0 - 2.0 * t)).abs() / (4.0 - 2.0 * t));
    }
    let radius_ok = worst <= RADIUS_TOL;

    let cap = build_cutoff(&man, CutoffRegion::Ball { center: [PI / 2.0, PI], radius: 1.0 }, 3).unwrap();
    let mut cur = man.clone();
    for _ in 0..256 {
        cur = evolve_metric(&cur, &cap, dt).unwrap();
    }
    let outside: Vec<usize> = (0..man.node_count()).filter(|&k| cap.value(k) == 0.0).collect();
    let frozen = outside.iter().all(|&k| cur.log_scale()[k].to_bits() == man.log_scale()[k].to_bits());
    let moved = (0..man.node_count()).any(|k| cur.log_scale()[k] != man.log_scale()[k]);
    let pass = radius_ok && frozen && moved && !outside.is_empty();
    Line {
        id: 4,
        title: "local Ricci flow baseline",
        pass,
        detail: format!(
            "max |r^2 - (4 - 2t)| / (4 - 2t) on [0, 1] = {worst:.3e} (tol {RADIUS_TOL:e}) [{}]; {} nodes outside supp chi bit-identical after t = 0.25 [{}]",
            ok(radius_ok),
            outside.len(),
            ok(frozen && moved),
        ),
    }
}

fn evolving_theorems() -> Line {
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, expected) in [("t3-sphere", 8.25), ("t4-sphere", 0.25)] {
        let run = solve(&scenario(name));
        let r = &run.report;
        let c = &run.constants;
        let const_ok = c.fields.iter().all(|f| (f.max - expected).abs() <= EXACT);
        let margin_ok = r.worst_margin <= SLACK && r.verdict == Verdict::Verified;
        let independent = r.curvature_independent && !r.constant_inputs.iter().any(|i| i.contains("Ric"));
        pass &= const_ok && margin_ok && independent;
        parts.push(format!(
            "{}: constant {} vs {expected} [{}], bound {:.6}, worst margin {:.6} on [0, {:.4}] [{}], inputs {:?} [{}]",
            r.theorem,
            c.constant_u(),
            ok(const_ok),
            c.bound_u,
            r.worst_margin,
            r.window_end,
            ok(margin_ok),
            r.constant_inputs,
            ok(independent),
        ));
    }
    Line { id: 5, title: "T3 and T4 on the evolving sphere", pass, detail: parts.join("; ") }
}

fn identity_suite() -> Line {
    let start = Instant::now();
    let (rep, _) = identities(&[16, 32, 64], SEED).unwrap();
    let seconds = start.elapsed().as_secs_f64();
    let orders: Vec<String> = rep
        .studies
        .iter()
        .filter(|s| !s.name.ends_with("-constant"))
        .map(|s| format!("{} {:.3}", s.name, s.study.fitted_order.unwrap_or(f64::NAN)))
        .collect();
    let all_ok = rep.studies.iter().filter(|s| !s.name.ends_with("-constant")).all(|s| s.study.meets_order(IDENTITY_ORDER));
    let exact = rep.studies.iter().filter(|s| s.name.ends_with("-constant")).all(|s| s.study.exact);
    let target = rep.studies.iter().filter(|s| s.name.ends_with("-square")).all(|s| s.study.meets_order(SQUARE_TARGET_ORDER));
    let pass = all_ok && exact && target && seconds < IDENTITY_SECONDS;
    Line {
        id: 6,
        title: "identity suite",
        pass,
        detail: format!(
            "orders {orders:?} (min {IDENTITY_ORDER}, square target {SQUARE_TARGET_ORDER}); constants exact [{}]; {seconds:.1} s",
            ok(exact)
        ),
    }
}

fn inequality_fuzz() -> Line {
    let (rep, _, _) = inequalities(FUZZ_FIELDS, SEED, FUZZ_TOL).unwrap();
    let gated: Vec<String> =
        rep.inequalities.iter().filter(|c| c.gated).map(|c| format!("{} {} (max {:.2e})", c.name, c.violations, c.max_violation)).collect();
    Line { id: 7, title: "inequality fuzzing", pass: rep.passed, detail: format!("{FUZZ_FIELDS} fields, violations: {gated:?}") }
}

fn max_principle(run: &TheoremRun) -> Line {
    let aux = check_aux_function(&run.trajectory, &run.constants, AUX_SLACK, AuxBudget::default()).unwrap();
    let u = &aux.sides[0];
    let boundary_ok = (u.boundary_max - 2.6875).abs() <= EXACT;
    let interior_ok = u.interior_max <= 2.6875 * (1.0 + AUX_SLACK);
    let fraction_ok = aux.sides.iter().all(|s| s.fraction_within >= AUX_FRACTION);
    let pass = boundary_ok && interior_ok && fraction_ok && aux.passed;
    Line {
        id: 8,
        title: "maximum-principle structure",
        pass,
        detail: format!(
            "boundary max G {} vs 2.6875 [{}]; interior max {:.6} <= {:.6} [{}]; within budget {:?} (>= {AUX_FRACTION}) [{}]",
            u.boundary_max,
            ok(boundary_ok),
            u.interior_max,
            2.6875 * (1.0 + AUX_SLACK),
            ok(interior_ok),
            aux.sides.iter().map(|s| s.fraction_within).collect::<Vec<_>>(),
            ok(fraction_ok),
        ),
    }
}

fn mutation(run: &TheoremRun) -> Line {
    let mut corrupted = run.constants.clone();
    corrupted.bound_u *= MUTATION;
    let rep = check_bernstein(&run.trajectory, &corrupted, SLACK).unwrap();
    let observed = rep.rows.iter().filter(|r| r.in_window).map(|r| r.observed_u).fold(0.0, f64::max);
    Line {
        id: 9,
        title: "verifier mutation test",
        pass: rep.verdict == Verdict::BoundViolated,
        detail: format!("B1 x {MUTATION} = {:.6}, observed max {:.6}, verdict {:?}", corrupted.bound_u, observed, rep.verdict),
    }
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "fails"
    }
}

fn main() -> ExitCode {
    let s = scenario("t1-torus");
    let start = Instant::now();
    let reference = solve(&s);
    let seconds = start.elapsed().as_secs_f64();
    let lines = [
        fidelity(&reference, seconds),
        theorem_one(&s, &reference),
        theorem_two(),
        ricci_baseline(),
        evolving_theorems(),
        identity_suite(),
        inequality_fuzz(),
        max_principle(&reference),
        mutation(&reference),
    ];
    let mut failed = 0;
    for l in &lines {
        println!("{} criterion {} {}: {}", if l.pass { "PASS" } else { "FAIL" }, l.id, l.title, l.detail);
        failed += usize::from(!l.pass);
    }
    println!("acceptance: {} passed, {failed} failed", lines.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
