use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use bernlab::{execute, parse_scenario, run, Scenario, SuiteKind, EXIT_ERROR};
use clap::{Parser, Subcommand};

/// Bernstein gradient-bound lab for coupled weighted heat systems.
#[derive(Debug, Parser)]
#[command(name = "bernlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario file and write its report and CSV.
    Run { file: PathBuf },
    /// Run a property suite with default settings.
    Suite {
        #[arg(value_enum)]
        kind: SuiteArg,
        #[arg(long, default_value_t = bernlab::scenario::DEFAULT_SEED)]
        seed: u64,
        /// Random fields for the inequality suite.
        #[arg(long)]
        fields: Option<usize>,
        /// Dyadic grid levels, e.g. `--levels 16,32,64`.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<usize>>,
    },
    /// Print the constants and static gates of a scenario without solving.
    Constants { file: PathBuf },
    /// List the manifold, weight, cutoff and initial-data catalog.
    Describe,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum SuiteArg {
    Identities,
    Inequalities,
    Convergence,
}

impl From<SuiteArg> for SuiteKind {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Identities => SuiteKind::Identities,
            SuiteArg::Inequalities => SuiteKind::Inequalities,
            SuiteArg::Convergence => SuiteKind::Convergence,
        }
    }
}

fn run_and_report(s: &Scenario) -> anyhow::Result<u8> {
    s.validate()?;
    let dir = s.resolve_output_dir();
    let outcome = execute(s, &dir).with_context(|| format!("scenario {}", s.name))?;
    let r = &outcome.report;
    println!("{}: {}", r.name, serde_json::to_string(&r.status)?.trim_matches('"'));
    if let Some(b) = &r.bernstein {
        println!(
            "  {} bounds u {} v {}; worst margin {:.6} at t = {}; window [0, {}]",
            b.theorem, b.constants.bound_u, b.constants.bound_v, b.worst_margin, b.worst_margin_time, b.window_end
        );
    }
    if let Some(s) = &r.suite {
        for st in &s.studies {
            println!("  {}: order {:?}, passed {}", st.name, st.study.fitted_order, st.passed);
        }
        for c in &s.inequalities {
            println!("  {}: {} violations, max {:e}", c.name, c.violations, c.max_violation);
        }
    }
    println!("  report {}", outcome.artifacts.report.display());
    Ok(outcome.exit_code())
}

fn main_inner(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Run { file } => {
            let s = parse_scenario(&file)?;
            run_and_report(&s)
        }
        Command::Suite { kind, seed, fields, levels } => {
            let mut s = Scenario::for_suite(kind.into(), seed);
            if let Some(f) = fields {
                s.suite_options.fields = f;
            }
            s.suite_options.levels = levels;
            run_and_report(&s)
        }
        Command::Constants { file } => {
            let s = parse_scenario(&file)?;
            let rep = run::constants_report(&s)?;
            println!("{}", serde_json::to_string_pretty(&rep)?);
            Ok(if rep.static_gates_passed { 0 } else { 1 })
        }
        Command::Describe => {
            print!("{}", bernlab::describe());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
