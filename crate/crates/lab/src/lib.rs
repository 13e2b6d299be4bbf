//! Scenario files, CSV and report output, and the `bernlab` command line
//! for the [`bernlab_core`] numerical lab.
//!
//! - [`scenario`]: the TOML scenario schema, defaults and validation.
//! - [`initial`]: the catalog of initial data.
//! - [`run`]: theorem runs (constants, solve, checks, refinement study).
//! - [`suite`]: identity, inequality and convergence suites.
//! - [`output`]: CSV and JSON writers.

pub mod error;
pub mod initial;
pub mod output;
pub mod run;
pub mod scenario;
pub mod suite;

use std::path::Path;

pub use error::{LabError, Result};
pub use run::{Outcome, Status, EXIT_ERROR};
pub use scenario::{parse_scenario, Scenario, SuiteKind};

/// Environment variable overriding every output directory.
pub const OUTPUT_DIR_ENV: &str = "BERNLAB_OUTPUT_DIR";

/// Runs a validated scenario, writing its artifacts into `out_dir`.
pub fn execute(s: &Scenario, out_dir: &Path) -> Result<Outcome> {
    if s.suite.is_some() {
        suite::run_suite_scenario(s, out_dir)
    } else {
        run::run_theorem_scenario(s, out_dir)
    }
}

/// Text listing of the manifold, weight, cutoff and initial-data catalog.
pub fn describe() -> String {
    let text = r#"manifolds   [manifold] kind =
  torus        side = [2pi, 2pi], resolution = [128, 128], synthetic_dimension = 4
  sphere       radius = 2, resolution = [32, 64] (colatitude x longitude), synthetic_dimension = 4
  flat-patch   lower, upper, resolution = [129, 129]; edge nodes held fixed
  graph        topology = { graph = "cycle" | "complete", nodes } | { graph = "edges", nodes, edges = [[a, b, w], ...] }
weights     [weight] kind =
  zero
  linear            axis, slope                   f = slope x_axis
  sine              axis, amplitude, wavenumber   f = amplitude sin(wavenumber x_axis)
  radial-gaussian   center, amplitude, width      f = amplitude exp(-d^2 / 2 width^2)
cutoffs     [cutoff] power = 3, region =
  whole        chi = 1 (closed manifolds)
  vanishing    chi = 0
  ball         center, radius
  annulus      center, inner, outer
initial data  [initial] u = { kind = ... }, v = { kind = ... }
  constant       value
  cosine, sine   offset, amplitude, axis, wavenumber
  height         offset, amplitude (sphere: offset + amplitude z)
  band-limited   offset, amplitude, modes = 5, max_wavenumber = 3, seed
systems     [system] kind = "linear" | "exponential" (a, b < 0; b1 = b2 = e),
            horizon = 1, stepper = "explicit-rk4" | "implicit-euler", cfl = 0.25, dt, snapshots = 64
theorems    T1 linear/static, T2 exponential/static, T3 linear/local-ricci, T4 exponential/local-ricci
suites      identities, inequalities, convergence
tolerances  slack = 0.05, aux_c1 = 4, aux_c2 = 4, inequality = 1e-10
timeseries  "#;
    format!("{text}{}\n", output::TIMESERIES_COLUMNS.join(","))
}
