//! Theorem runs: constants, solve, bound check, auxiliary function, study.

use std::path::Path;

use bernlab_core::constants::{theorem_constants, ConstantInputs, ExponentialCoefficients, TheoremConstants, TheoremId};
use bernlab_core::dynamics::{solve_trajectory, Diagnostics, HypothesisBreak, SystemKind, SystemSpec, Trajectory};
use bernlab_core::manifold::{build_cutoff, build_manifold, CutoffProfile, DiscreteManifold};
use bernlab_core::verify::{check_aux_function, check_bernstein, AuxBudget, AuxReport, TheoremReport, Verdict};
use bernlab_core::Error as CoreError;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::output::{self, Artifacts, StudyRow, TimeseriesWriter, REPORT_SCHEMA};
use crate::scenario::{ManifoldConfig, Scenario};
use crate::suite::SuiteReport;

/// Process exit code for a completed command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Verified,
    BoundViolated,
    HypothesisViolated,
    Passed,
    Failed,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Verified | Status::Passed => 0,
            _ => 1,
        }
    }
}

impl From<Verdict> for Status {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Verified => Status::Verified,
            Verdict::BoundViolated => Status::BoundViolated,
            Verdict::HypothesisViolated => Status::HypothesisViolated,
        }
    }
}

/// Exit code for errors (parse, validation, compute, IO).
pub const EXIT_ERROR: u8 = 2;

/// Geometry, cutoff, system and constant inputs of a theorem scenario.
#[derive(Debug, Clone)]
pub struct Setup {
    pub theorem: TheoremId,
    pub man: DiscreteManifold,
    pub chi: CutoffProfile,
    pub spec: SystemSpec,
    pub inputs: ConstantInputs,
}

fn max_over(values: &[f64], omega: &[bool]) -> f64 {
    let m = values.iter().zip(omega).filter(|(_, &o)| o).map(|(&v, _)| v).fold(f64::NEG_INFINITY, f64::max);
    if m.is_finite() {
        m
    } else {
        0.0
    }
}

/// Builds everything a theorem run needs, without solving.
pub fn prepare(s: &Scenario) -> Result<Setup> {
    let theorem = s.theorem.ok_or_else(|| LabError::Invalid(format!("scenario {} runs a suite, not a theorem", s.name)))?;
    prepare_with(s, &s.manifold, theorem)
}

fn prepare_with(s: &Scenario, manifold: &ManifoldConfig, theorem: TheoremId) -> Result<Setup> {
    let man = build_manifold(&manifold.to_spec(s.weight))?;
    let chi = build_cutoff(&man, s.cutoff.region(), s.cutoff.power())?;
    let kind = s.system.kind()?;
    let u0 = s.initial.u.sample(&man, s.seed)?;
    let v0 = s.initial.v.sample(&man, s.seed.wrapping_add(1))?;
    let exponential = match kind {
        SystemKind::Exponential { a, b } => Some(ExponentialCoefficients { a, b, b1: s.system.b1, b2: s.system.b2 }),
        SystemKind::Linear => None,
    };
    let inputs = ConstantInputs {
        horizon: s.system.horizon,
        u0_max: max_over(&u0, &chi.omega),
        v0_max: max_over(&v0, &chi.omega),
        curvature: s.constants.curvature.unwrap_or(man.curvature().lower_bound),
        k1: s.constants.k1.unwrap_or(man.weight().grad_sup),
        k2: s.constants.k2.unwrap_or(man.weight().hessian_lower),
        exponential,
    };
    let mut spec = SystemSpec::new(kind, u0, v0, s.system.horizon);
    spec.stepper = s.system.stepper;
    spec.cfl = s.system.cfl;
    spec.dt = s.system.dt;
    spec.snapshots = s.system.snapshots;
    spec.caps = exponential.map(|e| [e.b1.ln(), e.b2.ln()]);
    Ok(Setup { theorem, man, chi, spec, inputs })
}

pub fn constants(setup: &Setup) -> Result<TheoremConstants> {
    Ok(theorem_constants(setup.theorem, &setup.man, &setup.chi, setup.inputs)?)
}

/// Copy of `c` without the per-node fields, which are not reported.
pub fn summarize_constants(c: &TheoremConstants) -> TheoremConstants {
    let mut c = c.clone();
    for f in &mut c.fields {
        f.values = Vec::new();
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectorySummary {
    pub steps: usize,
    pub snapshot_intervals: usize,
    pub rows: usize,
    pub positivity_lost: Option<HypothesisBreak>,
    pub cap_exceeded: Option<HypothesisBreak>,
    pub truncated: bool,
    pub radius_sq_initial: f64,
    pub radius_sq_final: f64,
    pub metric_min_eig: f64,
}

impl TrajectorySummary {
    fn new(traj: &Trajectory) -> Self {
        let first = traj.diagnostics.first();
        let last = traj.diagnostics.last();
        Self {
            steps: traj.steps,
            snapshot_intervals: traj.intervals,
            rows: traj.diagnostics.len(),
            positivity_lost: traj.positivity_lost.clone(),
            cap_exceeded: traj.cap_exceeded.clone(),
            truncated: traj.truncated,
            radius_sq_initial: first.map_or(f64::NAN, |d| d.radius_sq),
            radius_sq_final: last.map_or(f64::NAN, |d| d.radius_sq),
            metric_min_eig: traj.diagnostics.iter().map(|d| d.metric_min_eig).fold(f64::INFINITY, f64::min),
        }
    }
}

/// Worst margins of the theorem run repeated across grid levels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudySummary {
    pub levels: Vec<usize>,
    pub h: Vec<f64>,
    pub worst_margins: Vec<f64>,
    pub verdicts: Vec<Verdict>,
    pub non_increasing: bool,
    /// Aitken extrapolation of the last three margins; `None` when the
    /// differences do not contract.
    pub extrapolated_limit: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub name: String,
    pub command: &'static str,
    pub status: Status,
    pub exit_code: u8,
    pub scenario: Scenario,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bernstein: Option<TheoremReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aux: Option<AuxReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<TrajectorySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub study: Option<StudySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suite: Option<SuiteReport>,
    /// File names written next to the report.
    pub artifacts: Vec<String>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(scenario: &Scenario, command: &'static str, status: Status) -> Self {
        Self {
            schema: REPORT_SCHEMA,
            name: scenario.name.clone(),
            command,
            status,
            exit_code: status.exit_code(),
            scenario: scenario.clone(),
            bernstein: None,
            aux: None,
            trajectory: None,
            study: None,
            suite: None,
            artifacts: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn set_status(&mut self, status: Status) {
        self.status = status;
        self.exit_code = status.exit_code();
    }
}

/// Result of a command that wrote artifacts.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub artifacts: Artifacts,
}

impl Outcome {
    pub fn exit_code(&self) -> u8 {
        self.report.exit_code
    }
}

/// Solves and checks one theorem scenario at the configured resolution.
pub struct TheoremRun {
    pub setup: Setup,
    pub constants: TheoremConstants,
    pub trajectory: Trajectory,
    pub report: TheoremReport,
}

/// Solves and checks against `consts`; `observer` sees every diagnostics
/// row as it is produced.
pub fn run_theorem(setup: Setup, consts: TheoremConstants, slack: f64, observer: &mut dyn FnMut(&Diagnostics)) -> Result<TheoremRun> {
    let traj = solve_trajectory(&setup.man, &setup.chi, &setup.spec, flow_of(setup.theorem), observer)?;
    let report = check_bernstein(&traj, &consts, slack)?;
    Ok(TheoremRun { setup, constants: consts, trajectory: traj, report })
}

fn flow_of(t: TheoremId) -> bernlab_core::dynamics::Flow {
    use bernlab_core::dynamics::Flow;
    if t.is_evolving() {
        Flow::LocalRicci
    } else {
        Flow::None
    }
}

/// Representative grid spacing at level `n`.
pub fn level_spacing(manifold: &ManifoldConfig, n: usize) -> f64 {
    match manifold {
        ManifoldConfig::Torus { side, .. } => side[0].max(side[1]) / n as f64,
        ManifoldConfig::Sphere { .. } => std::f64::consts::PI / n as f64,
        ManifoldConfig::FlatPatch { lower, upper, .. } => (upper[0] - lower[0]).max(upper[1] - lower[1]) / n as f64,
        ManifoldConfig::Graph { .. } => 1.0,
    }
}

/// Aitken Δ² limit of three terms of a contracting sequence.
pub fn aitken_limit(x: &[f64]) -> Option<f64> {
    let [.., a, b, c] = x else { return None };
    let (d1, d2) = (b - a, c - b);
    if d1 == 0.0 && d2 == 0.0 {
        return Some(*c);
    }
    let denom = d2 - d1;
    if denom == 0.0 || d2.abs() >= d1.abs() {
        return None;
    }
    Some(c - d2 * d2 / denom)
}

/// Repeats the theorem check at each dyadic level.
pub fn refinement_study(s: &Scenario, levels: &[usize]) -> Result<(StudySummary, Vec<StudyRow>)> {
    let theorem = s.theorem.ok_or_else(|| LabError::Invalid("refinement studies need a theorem".into()))?;
    let (mut h, mut margins, mut verdicts, mut rows) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for &n in levels {
        let manifold = s.manifold.at_level(n)?;
        let setup = prepare_with(s, &manifold, theorem)?;
        let consts = constants(&setup)?;
        let run = run_theorem(setup, consts, s.tolerances.slack, &mut |_| {})?;
        let hn = level_spacing(&manifold, n);
        rows.push(StudyRow { study: "worst-margin".into(), n, h: hn, value: run.report.worst_margin });
        h.push(hn);
        margins.push(run.report.worst_margin);
        verdicts.push(run.report.verdict);
    }
    let summary = StudySummary {
        levels: levels.to_vec(),
        h,
        non_increasing: margins.windows(2).all(|w| w[1] <= w[0]),
        extrapolated_limit: aitken_limit(&margins),
        worst_margins: margins,
        verdicts,
    };
    Ok((summary, rows))
}

/// `run <file>` for a theorem scenario: writes the timeseries CSV, the
/// resolved scenario and the report into `out_dir`.
pub fn run_theorem_scenario(s: &Scenario, out_dir: &Path) -> Result<Outcome> {
    output::create_dir(out_dir)?;
    let mut artifacts = Artifacts::new(out_dir, &s.name);
    let csv_path = out_dir.join(format!("{}.csv", s.name));
    output::write_text(&artifacts.scenario, &s.to_toml())?;
    let setup = prepare(s)?;
    let consts = constants(&setup)?;
    let mut writer = TimeseriesWriter::create(&csv_path, consts.bound_u, consts.bound_v)?;
    let run = run_theorem(setup, consts, s.tolerances.slack, &mut |d| writer.push(d))?;
    let rows = writer.finish()?;
    artifacts.timeseries = Some(csv_path);

    let mut bernstein = run.report;
    bernstein.constants = summarize_constants(&bernstein.constants);
    let mut report = Report::new(s, "run", bernstein.verdict.into());
    report.notes.push("per-node constant fields are omitted; maxima and argmax are kept".into());

    let budget = AuxBudget { c1: s.tolerances.aux_c1, c2: s.tolerances.aux_c2 };
    report.aux = match check_aux_function(&run.trajectory, &run.constants, s.tolerances.slack, budget) {
        Ok(aux) => Some(aux),
        Err(CoreError::CadenceTooCoarse(msg)) => {
            report.notes.push(format!("auxiliary-function check skipped: {msg}"));
            None
        }
        Err(e) => return Err(e.into()),
    };
    let mut summary = TrajectorySummary::new(&run.trajectory);
    summary.rows = rows;
    report.trajectory = Some(summary);

    if let Some(study) = &s.study {
        let (summary, study_rows) = refinement_study(s, &study.levels)?;
        let path = out_dir.join(format!("{}.study.csv", s.name));
        output::write_study_csv(&path, &study_rows)?;
        bernstein.refinement_trend = Some(summary.worst_margins.clone());
        report.study = Some(summary);
        artifacts.study = Some(path);
    }
    report.bernstein = Some(bernstein);
    finish(report, artifacts)
}

/// Records artifact names and writes the report.
pub(crate) fn finish(mut report: Report, artifacts: Artifacts) -> Result<Outcome> {
    let name = |p: &Path| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    report.artifacts = [Some(&artifacts.scenario), artifacts.timeseries.as_ref(), artifacts.study.as_ref()]
        .into_iter()
        .flatten()
        .map(|p| name(p))
        .collect();
    output::write_json(&artifacts.report, &report)?;
    Ok(Outcome { report, artifacts })
}

/// `constants <file>`: the constants and static gates, without solving.
#[derive(Debug, Clone, Serialize)]
pub struct ConstantsReport {
    pub schema: &'static str,
    pub name: String,
    pub theorem: TheoremId,
    pub constants: TheoremConstants,
    pub static_gates_passed: bool,
}

pub fn constants_report(s: &Scenario) -> Result<ConstantsReport> {
    let setup = prepare(s)?;
    let c = constants(&setup)?;
    Ok(ConstantsReport {
        schema: REPORT_SCHEMA,
        name: s.name.clone(),
        theorem: setup.theorem,
        static_gates_passed: c.gate.static_passed(),
        constants: summarize_constants(&c),
    })
}
