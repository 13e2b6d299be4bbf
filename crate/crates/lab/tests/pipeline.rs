use std::path::{Path, PathBuf};
use std::process::Command;

use bernlab::output::{STUDY_COLUMNS, TIMESERIES_COLUMNS};
use bernlab::scenario::{parse_scenario, parse_str, Scenario, SuiteKind};
use bernlab::{execute, Status};
use bernlab_core::verify::relative_margin;
use serde_json::Value;

fn repo(path: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(path)
}

fn small_t1(name: &str) -> Scenario {
    let text = format!(
        r#"
name = "{name}"
theorem = "T1"
[manifold]
kind = "torus"
resolution = [32, 32]
[initial]
u = {{ kind = "cosine", offset = 1.0, amplitude = 0.5 }}
v = {{ kind = "constant", value = 1.0 }}
"#
    );
    parse_str(&text, Path::new("inline.toml")).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(|x| x.parse::<f64>().unwrap()).collect()).collect();
    (header, rows)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn reference_run_writes_csv_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let s = small_t1("ref");
    let out = execute(&s, dir.path()).unwrap();
    assert_eq!(out.exit_code(), 0);
    assert_eq!(out.report.status, Status::Verified);
    let (header, rows) = read_csv(out.artifacts.timeseries.as_ref().unwrap());
    assert_eq!(header, TIMESERIES_COLUMNS);
    assert!(rows.len() > 64);
    let report = read_json(&out.artifacts.report);
    assert_eq!(report["schema"], "bernlab.report/1");
    assert_eq!(report["bernstein"]["verdict"], "verified");
    assert_eq!(report["bernstein"]["constants"]["bound_u"], 2.125);
    assert_eq!(report["artifacts"][0], "ref.scenario.toml");
    assert!(report["aux"]["passed"].as_bool().unwrap());
}

#[test]
fn report_margins_recompute_from_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = execute(&small_t1("recompute"), dir.path()).unwrap();
    let (_, rows) = read_csv(out.artifacts.timeseries.as_ref().unwrap());
    let b = out.report.bernstein.as_ref().unwrap();
    assert_eq!(rows.len(), b.rows.len());
    let mut worst = f64::NEG_INFINITY;
    for (row, r) in rows.iter().zip(&b.rows) {
        assert_eq!(row[0], r.t);
        assert_eq!(row[2], b.constants.bound_u);
        assert_eq!(row[3], relative_margin(row[1], row[2]));
        assert_eq!(row[3], r.margin_u);
        assert_eq!(row[6], r.margin_v);
        worst = worst.max(row[3]).max(row[6]);
    }
    assert_eq!(worst, b.worst_margin);
    let (bu, bv) = b.constants.closed_form_bounds();
    assert_eq!((bu, bv), (b.constants.bound_u, b.constants.bound_v));
}

#[test]
fn identical_scenarios_give_identical_csv() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut s = small_t1("det");
    s.initial.u = bernlab::initial::InitialData::BandLimited { offset: 2.0, amplitude: 0.5, modes: 5, max_wavenumber: 3, seed: None };
    let x = execute(&s, a.path()).unwrap();
    let y = execute(&s, b.path()).unwrap();
    let bytes = |p: &Option<PathBuf>| std::fs::read(p.as_ref().unwrap()).unwrap();
    assert_eq!(bytes(&x.artifacts.timeseries), bytes(&y.artifacts.timeseries));
    // the echoed scenario replays to the same bytes
    let echoed = parse_scenario(&x.artifacts.scenario).unwrap();
    assert_eq!(echoed, s);
    let c = tempfile::tempdir().unwrap();
    let z = execute(&echoed, c.path()).unwrap();
    assert_eq!(bytes(&x.artifacts.timeseries), bytes(&z.artifacts.timeseries));
    s.seed += 1;
    let w = execute(&s, c.path()).unwrap();
    assert_ne!(bytes(&x.artifacts.timeseries), bytes(&w.artifacts.timeseries));
}

#[test]
fn empty_initial_data_observes_zero() {
    let dir = tempfile::tempdir().unwrap();
    let s = parse_scenario(&repo("scenarios/zero-data.toml")).unwrap();
    let out = execute(&s, dir.path()).unwrap();
    assert_eq!(out.exit_code(), 0);
    let (_, rows) = read_csv(out.artifacts.timeseries.as_ref().unwrap());
    assert!(rows.iter().all(|r| r[1] == 0.0 && r[4] == 0.0 && r[7] == 0.0 && r[8] == 0.0));
}

#[test]
fn refinement_study_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = small_t1("study");
    s.study = Some(bernlab::scenario::StudyConfig { levels: vec![16, 32, 64] });
    let out = execute(&s, dir.path()).unwrap();
    let study = out.report.study.as_ref().unwrap();
    assert_eq!(study.levels, [16, 32, 64]);
    assert_eq!(out.report.bernstein.as_ref().unwrap().refinement_trend.as_deref(), Some(&study.worst_margins[..]));
    let (header, rows) = {
        let mut r = csv::Reader::from_path(out.artifacts.study.as_ref().unwrap()).unwrap();
        let h: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
        (h, r.records().count())
    };
    assert_eq!(header, STUDY_COLUMNS);
    assert_eq!(rows, 3);
    // the 32² level reproduces the standalone 32² run
    let single = execute(&small_t1("single"), dir.path()).unwrap();
    assert_eq!(study.worst_margins[1], single.report.bernstein.unwrap().worst_margin);
}

#[test]
fn evolving_run_reports_the_window() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = parse_scenario(&repo("scenarios/t4-sphere.toml")).unwrap();
    s.manifold = s.manifold.at_level(16).unwrap();
    s.system.horizon = 0.5;
    let out = execute(&s, dir.path()).unwrap();
    let b = out.report.bernstein.as_ref().unwrap();
    assert!(b.curvature_independent);
    let t = out.report.trajectory.as_ref().unwrap();
    if let Some(brk) = &t.positivity_lost {
        assert_eq!(b.window_end, brk.time);
        assert!(b.claim_restricted);
    }
    assert!(t.radius_sq_final < t.radius_sq_initial);
}

#[test]
fn identities_suite_reports_orders() {
    let dir = tempfile::tempdir().unwrap();
    let s = Scenario::for_suite(SuiteKind::Identities, 3);
    let out = execute(&s, dir.path()).unwrap();
    assert_eq!(out.exit_code(), 0);
    let suite = out.report.suite.as_ref().unwrap();
    assert!(suite.studies.iter().filter(|s| !s.name.ends_with("-constant")).all(|s| s.study.fitted_order.unwrap() >= 1.0));
    let report = read_json(&out.artifacts.report);
    assert!(report["suite"]["studies"][0]["study"]["fitted_order"].is_number());
}

#[test]
fn inequality_suite_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = Scenario::for_suite(SuiteKind::Inequalities, 11);
    s.suite_options.fields = 40;
    let a = execute(&s, dir.path()).unwrap();
    let first = std::fs::read(a.artifacts.timeseries.as_ref().unwrap()).unwrap();
    let b = execute(&s, dir.path()).unwrap();
    assert_eq!(first, std::fs::read(b.artifacts.timeseries.as_ref().unwrap()).unwrap());
    assert_eq!(a.exit_code(), 0);
    assert_eq!(a.report.suite.as_ref().unwrap().fields, Some(40));
}

fn bernlab(args: &[&str], out: &Path) -> (i32, String, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_bernlab")).args(args).env("BERNLAB_OUTPUT_DIR", out).output().unwrap();
    (o.status.code().unwrap(), String::from_utf8(o.stdout).unwrap(), String::from_utf8(o.stderr).unwrap())
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let zero = repo("scenarios/zero-data.toml");
    let (code, stdout, _) = bernlab(&["run", zero.to_str().unwrap()], dir.path());
    assert_eq!(code, 0, "{stdout}");
    assert!(dir.path().join("zero-data.csv").exists());
    assert!(dir.path().join("zero-data.report.json").exists());

    // a negative K fails a static gate
    let bad = dir.path().join("bad.toml");
    std::fs::write(
        &bad,
        "name = \"bad\"\ntheorem = \"T1\"\n[manifold]\nkind = \"torus\"\nresolution = [16, 16]\n[constants]\ncurvature = -1.0\n",
    )
    .unwrap();
    let (code, stdout, _) = bernlab(&["run", bad.to_str().unwrap()], dir.path());
    assert_eq!(code, 1, "{stdout}");
    assert!(stdout.contains("hypothesis-violated"));

    let invalid = dir.path().join("invalid.toml");
    std::fs::write(&invalid, "name = \"x\"\ntheorem = \"T3\"\n").unwrap();
    let (code, _, stderr) = bernlab(&["run", invalid.to_str().unwrap()], dir.path());
    assert_eq!(code, 2);
    assert!(stderr.contains("T3 requires local Ricci flow"));

    let (code, _, stderr) = bernlab(&["run", "/nonexistent.toml"], dir.path());
    assert_eq!(code, 2, "{stderr}");
}

#[test]
fn cli_constants_and_describe() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, _) = bernlab(&["constants", repo("scenarios/t1-torus.toml").to_str().unwrap()], dir.path());
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["constants"]["bound_u"], 2.125);
    assert_eq!(v["constants"]["fields"][0]["max"], 0.25);
    let (code, stdout, _) = bernlab(&["describe"], dir.path());
    assert_eq!(code, 0);
    assert!(stdout.contains("radial-gaussian") && stdout.contains("annulus") && stdout.contains("band-limited"));
    assert!(stdout.contains(&TIMESERIES_COLUMNS.join(",")));
}

#[test]
fn cli_suite_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, stderr) = bernlab(&["suite", "inequalities", "--seed", "5", "--fields", "20"], dir.path());
    assert_eq!(code, 0, "{stdout}{stderr}");
    let report = read_json(&dir.path().join("suite-inequalities.report.json"));
    assert_eq!(report["suite"]["seed"], 5);
    let (code, _, _) = bernlab(&["suite", "identities", "--levels", "16,24,32"], dir.path());
    assert_eq!(code, 2);
}

#[test]
fn shipped_scenarios_parse() {
    for entry in std::fs::read_dir(repo("scenarios")).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let s = parse_scenario(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert_eq!(Some(s.name.as_str()), path.file_stem().and_then(|n| n.to_str()));
        }
    }
}
