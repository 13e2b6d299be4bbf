//! Scenario files: one TOML document describes one run.

use std::f64::consts::{E, TAU};
use std::path::{Path, PathBuf};

use bernlab_core::constants::TheoremId;
use bernlab_core::dynamics::{Flow, Stepper, SystemKind};
use bernlab_core::manifold::{CutoffRegion, GraphSpec, ManifoldSpec, Shape, WeightKind};
use bernlab_core::verify::DEFAULT_SLACK;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, LabError, Result};
use crate::initial::InitialData;

/// Seed used by randomized pieces when a scenario or command gives none.
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteKind {
    Identities,
    Inequalities,
    Convergence,
}

impl std::fmt::Display for SuiteKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SuiteKind::Identities => "identities",
            SuiteKind::Inequalities => "inequalities",
            SuiteKind::Convergence => "convergence",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theorem: Option<TheoremId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<SuiteKind>,
    #[serde(default)]
    pub flow: Flow,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub manifold: ManifoldConfig,
    #[serde(default = "zero_weight")]
    pub weight: WeightKind,
    #[serde(default)]
    pub cutoff: CutoffConfig,
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub constants: ConstantOverrides,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study: Option<StudyConfig>,
    #[serde(default)]
    pub suite_options: SuiteOptions,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn zero_weight() -> WeightKind {
    WeightKind::Zero
}

fn default_dimension() -> f64 {
    4.0
}

fn default_side() -> [f64; 2] {
    [TAU, TAU]
}

fn default_grid() -> [usize; 2] {
    [128, 128]
}

fn default_sphere_grid() -> [usize; 2] {
    [32, 64]
}

fn default_patch_grid() -> [usize; 2] {
    [129, 129]
}

fn default_radius() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ManifoldConfig {
    Torus {
        #[serde(default = "default_side")]
        side: [f64; 2],
        #[serde(default = "default_grid")]
        resolution: [usize; 2],
        #[serde(default = "default_dimension")]
        synthetic_dimension: f64,
    },
    Sphere {
        #[serde(default = "default_radius")]
        radius: f64,
        #[serde(default = "default_sphere_grid")]
        resolution: [usize; 2],
        #[serde(default = "default_dimension")]
        synthetic_dimension: f64,
    },
    FlatPatch {
        lower: [f64; 2],
        upper: [f64; 2],
        #[serde(default = "default_patch_grid")]
        resolution: [usize; 2],
        #[serde(default = "default_dimension")]
        synthetic_dimension: f64,
    },
    Graph {
        topology: GraphSpec,
        #[serde(default = "default_dimension")]
        synthetic_dimension: f64,
    },
}

impl Default for ManifoldConfig {
    fn default() -> Self {
        ManifoldConfig::Torus { side: default_side(), resolution: default_grid(), synthetic_dimension: default_dimension() }
    }
}

impl ManifoldConfig {
    pub fn to_spec(&self, weight: WeightKind) -> ManifoldSpec {
        let (shape, m) = match self.clone() {
            ManifoldConfig::Torus { side, resolution, synthetic_dimension } => (Shape::Torus { side, resolution }, synthetic_dimension),
            ManifoldConfig::Sphere { radius, resolution, synthetic_dimension } => {
                (Shape::Sphere { radius, resolution }, synthetic_dimension)
            }
            ManifoldConfig::FlatPatch { lower, upper, resolution, synthetic_dimension } => {
                (Shape::FlatPatch { lower, upper, resolution }, synthetic_dimension)
            }
            ManifoldConfig::Graph { topology, synthetic_dimension } => (Shape::Graph(topology), synthetic_dimension),
        };
        ManifoldSpec { shape, synthetic_dimension: m, weight }
    }

    /// Same manifold at refinement level `n`: `n × n` on flat grids,
    /// `n × 2n` on the sphere.
    pub fn at_level(&self, n: usize) -> Result<Self> {
        let mut out = self.clone();
        match &mut out {
            ManifoldConfig::Torus { resolution, .. } => *resolution = [n, n],
            ManifoldConfig::FlatPatch { resolution, .. } => *resolution = [n + 1, n + 1],
            ManifoldConfig::Sphere { resolution, .. } => *resolution = [n, 2 * n],
            ManifoldConfig::Graph { .. } => return Err(LabError::Invalid("refinement studies need a grid manifold".into())),
        }
        Ok(out)
    }

    pub fn is_graph(&self) -> bool {
        matches!(self, ManifoldConfig::Graph { .. })
    }
}

/// Cutoff `χ`: a region of the catalog and the bump power (at least 3).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "region", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CutoffConfig {
    Whole {
        #[serde(default = "default_power")]
        power: u32,
    },
    Vanishing {
        #[serde(default = "default_power")]
        power: u32,
    },
    Ball {
        center: [f64; 2],
        radius: f64,
        #[serde(default = "default_power")]
        power: u32,
    },
    Annulus {
        center: [f64; 2],
        inner: f64,
        outer: f64,
        #[serde(default = "default_power")]
        power: u32,
    },
}

fn default_power() -> u32 {
    3
}

impl Default for CutoffConfig {
    fn default() -> Self {
        CutoffConfig::Whole { power: default_power() }
    }
}

impl CutoffConfig {
    pub fn region(&self) -> CutoffRegion {
        match *self {
            CutoffConfig::Whole { .. } => CutoffRegion::Whole,
            CutoffConfig::Vanishing { .. } => CutoffRegion::Vanishing,
            CutoffConfig::Ball { center, radius, .. } => CutoffRegion::Ball { center, radius },
            CutoffConfig::Annulus { center, inner, outer, .. } => CutoffRegion::Annulus { center, inner, outer },
        }
    }

    pub fn power(&self) -> u32 {
        match *self {
            CutoffConfig::Whole { power }
            | CutoffConfig::Vanishing { power }
            | CutoffConfig::Ball { power, .. }
            | CutoffConfig::Annulus { power, .. } => power,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemLabel {
    #[default]
    Linear,
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(default)]
    pub kind: SystemLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// Caps `u ≤ ln b₁`, `v ≤ ln b₂` of the exponential system.
    #[serde(default = "euler")]
    pub b1: f64,
    #[serde(default = "euler")]
    pub b2: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub stepper: Stepper,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
}

fn euler() -> f64 {
    E
}

fn default_horizon() -> f64 {
    1.0
}

fn default_cfl() -> f64 {
    0.25
}

fn default_snapshots() -> usize {
    64
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            kind: SystemLabel::Linear,
            a: None,
            b: None,
            b1: E,
            b2: E,
            horizon: default_horizon(),
            stepper: Stepper::ExplicitRk4,
            cfl: default_cfl(),
            dt: None,
            snapshots: default_snapshots(),
        }
    }
}

impl SystemConfig {
    /// Reaction kind; `a`, `b` must be present for the exponential system.
    pub fn kind(&self) -> Result<SystemKind> {
        match (self.kind, self.a, self.b) {
            (SystemLabel::Linear, None, None) => Ok(SystemKind::Linear),
            (SystemLabel::Linear, _, _) => Err(LabError::Invalid("the linear system takes no coefficients a, b".into())),
            (SystemLabel::Exponential, Some(a), Some(b)) => Ok(SystemKind::Exponential { a, b }),
            (SystemLabel::Exponential, _, _) => Err(LabError::Invalid("the exponential system needs both coefficients a and b".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default = "unit")]
    pub u: InitialData,
    #[serde(default = "unit")]
    pub v: InitialData,
}

fn unit() -> InitialData {
    InitialData::Constant { value: 1.0 }
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self { u: unit(), v: unit() }
    }
}

/// Replacements for the certified bounds. Left unset, `K` is the certified
/// Bakry–Émery lower bound and `K₁`, `K₂` the certified weight bounds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curvature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k2: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_slack")]
    pub slack: f64,
    #[serde(default = "default_aux")]
    pub aux_c1: f64,
    #[serde(default = "default_aux")]
    pub aux_c2: f64,
    #[serde(default = "default_inequality")]
    pub inequality: f64,
}

fn default_slack() -> f64 {
    DEFAULT_SLACK
}

fn default_aux() -> f64 {
    4.0
}

fn default_inequality() -> f64 {
    1e-10
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { slack: default_slack(), aux_c1: default_aux(), aux_c2: default_aux(), inequality: default_inequality() }
    }
}

/// Repeats the theorem run at each level and reports the worst-margin trend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub levels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteOptions {
    /// Number of random fields for the inequality suite.
    #[serde(default = "default_fields")]
    pub fields: usize,
    /// Dyadic grid levels for the identity and convergence suites.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<usize>>,
}

fn default_fields() -> usize {
    1000
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { fields: default_fields(), levels: None }
    }
}

impl Scenario {
    /// Minimal scenario running `suite` with every default.
    pub fn for_suite(suite: SuiteKind, seed: u64) -> Self {
        let mut s: Scenario = toml::from_str(&format!("name = \"suite-{suite}\"\nsuite = \"{suite}\"")).expect("static");
        s.seed = seed;
        s
    }

    /// Cross-field consistency, checked before any computation.
    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(LabError::Invalid(m));
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            return invalid(format!("name {:?} must be non-empty and use only [A-Za-z0-9._-]", self.name));
        }
        match (self.theorem, self.suite) {
            (Some(_), Some(_)) => return invalid("give either `theorem` or `suite`, not both".into()),
            (None, None) => return invalid("one of `theorem` (T1..T4) or `suite` is required".into()),
            _ => {}
        }
        if let Some(t) = self.theorem {
            let kind = self.system.kind()?;
            if t.is_evolving() && self.flow != Flow::LocalRicci {
                return invalid(format!("{t} requires local Ricci flow (flow = \"local-ricci\")"));
            }
            if !t.is_evolving() && self.flow != Flow::None {
                return invalid(format!("{t} is stated on a static metric (flow = \"none\")"));
            }
            match (t.is_exponential(), kind) {
                (true, SystemKind::Linear) => return invalid(format!("{t} requires the exponential system")),
                (false, SystemKind::Exponential { .. }) => return invalid(format!("{t} requires the linear system")),
                (true, SystemKind::Exponential { a, b }) if !(a < 0.0 && b < 0.0) => {
                    return invalid(format!(
                        "{t} requires a < 0 and b < 0; the estimate is only established under that assumption (got a = {a}, b = {b})"
                    ))
                }
                _ => {}
            }
            if t.is_exponential() && !(self.system.b1 > 0.0 && self.system.b2 > 0.0) {
                return invalid(format!("caps b1 = {}, b2 = {} must be positive", self.system.b1, self.system.b2));
            }
        } else {
            self.system.kind()?;
        }
        if self.flow == Flow::LocalRicci && self.manifold.is_graph() {
            return invalid("local Ricci flow needs a grid manifold".into());
        }
        let t = &self.tolerances;
        for (name, v) in [("slack", t.slack), ("aux_c1", t.aux_c1), ("aux_c2", t.aux_c2), ("inequality", t.inequality)] {
            if !(v >= 0.0 && v.is_finite()) {
                return invalid(format!("tolerance {name} = {v} must be finite and non-negative"));
            }
        }
        if let Some(study) = &self.study {
            check_levels(&study.levels)?;
            self.manifold.at_level(study.levels[0])?;
        }
        if let Some(levels) = &self.suite_options.levels {
            check_levels(levels)?;
        }
        if self.suite_options.fields == 0 {
            return invalid("suite_options.fields must be positive".into());
        }
        Ok(())
    }

    /// Output directory: `BERNLAB_OUTPUT_DIR`, else the scenario's, else
    /// `bernlab-out`.
    pub fn resolve_output_dir(&self) -> PathBuf {
        if let Some(dir) = std::env::var_os(crate::OUTPUT_DIR_ENV).filter(|d| !d.is_empty()) {
            return PathBuf::from(dir);
        }
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("bernlab-out"))
    }

    /// The scenario with every default filled in.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }
}

fn check_levels(levels: &[usize]) -> Result<()> {
    if levels.len() < 3 || levels.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(LabError::Invalid(format!("levels {levels:?} must be at least 3 dyadic grid sizes")));
    }
    Ok(())
}

pub fn parse_str(text: &str, origin: &Path) -> Result<Scenario> {
    let scenario: Scenario = toml::from_str(text).map_err(|e| LabError::Parse { path: origin.to_path_buf(), message: e.to_string() })?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn parse_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_str(&text, path)
}
