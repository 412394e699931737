//! `ablab`: runs geometric-optics, lattice and flux-recovery experiments from
//! JSON configs and writes plot-ready data plus a checksummed manifest.
//!
//! Exit status is 0 on success, 1 when a computation fails and 2 when the
//! configuration is rejected. Failures also print a JSON error record on
//! stderr and write it to `<out>/error.json`.

mod compare;
mod config;
mod manifest;
mod modes;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::Mode;

#[derive(Parser, Debug)]
#[command(name = "ablab", version, about = "Aharonov-Bohm experiment driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Seed for any randomized sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Relative tolerance of the line-integral quadrature.
    #[arg(long, default_value_t = 1e-8)]
    pub tolerance: f64,
}

#[derive(Args, Debug, Clone)]
pub struct CompareArgs {
    /// First run (directory or manifest file).
    pub run_a: PathBuf,
    /// Second run (directory or manifest file).
    pub run_b: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Trace broken rays through the scene.
    Trace(RunArgs),
    /// Magnetic flux through closed loops.
    Flux(RunArgs),
    /// Geometric-optics two-beam prediction.
    GoPredict(RunArgs),
    /// Evolve one packet on the lattice.
    TdseRun(RunArgs),
    /// Two-beam interference on the lattice with a fringe-phase fit.
    TwoBeam(RunArgs),
    /// Electric effect with a moving split domain.
    ElectricAb(RunArgs),
    /// Recover obstacle fluxes from circuit measurements.
    Recover(RunArgs),
    /// Difference report between two runs.
    Compare(CompareArgs),
}

#[derive(Debug)]
pub struct CliError {
    pub exit_code: u8,
    pub kind: String,
    pub message: String,
    pub details: serde_json::Value,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { exit_code: 2, kind: "config".into(), message: message.into(), details: json!(null) }
    }

    /// Library error raised while validating inputs.
    pub fn invalid(e: ablab::Error) -> Self {
        Self { exit_code: 2, ..Self::from_lib(e) }
    }

    /// Library error raised during computation.
    pub fn compute(e: ablab::Error) -> Self {
        Self::from_lib(e)
    }

    pub fn io(e: std::io::Error) -> Self {
        Self { exit_code: 1, kind: "io".into(), message: e.to_string(), details: json!(null) }
    }

    fn from_lib(e: ablab::Error) -> Self {
        use ablab::Error as E;
        let details = match &e {
            E::Ambiguous { coset_size, solutions } => json!({"coset_size": coset_size, "solutions": solutions}),
            E::Inconsistent { residual } => json!({ "residual": residual }),
            E::RankDeficient { rank, unknowns } => json!({"rank": rank, "unknowns": unknowns}),
            E::Solver { iterations, residual } => json!({"iterations": iterations, "residual": residual}),
            E::ScheduleTooFast { step, fraction } => json!({"step": step, "fraction": fraction}),
            _ => json!(null),
        };
        let kind = match &e {
            E::Domain(_) => "domain",
            E::GrazingRay { .. } => "grazing-ray",
            E::ReflectionBudget { .. } => "reflection-budget",
            E::Geometry(_) => "geometry",
            E::DegenerateGeometry(_) => "degenerate-geometry",
            E::Convergence { .. } => "convergence",
            E::Resolution(_) => "resolution",
            E::Solver { .. } => "solver",
            E::ExperimentDesign(_) => "experiment-design",
            E::Labeling(_) => "labeling",
            E::ScheduleTooFast { .. } => "schedule-too-fast",
            E::GridMismatch(_) => "grid-mismatch",
            E::Data(_) => "data",
            E::RankDeficient { .. } => "rank-deficient",
            E::Ambiguous { .. } => "ambiguous",
            E::DesignFailure(_) => "design-failure",
            E::Inconsistent { .. } => "inconsistent",
            E::InvalidInput(_) => "invalid-input",
            E::Io(_) => "io",
        };
        Self { exit_code: 1, kind: kind.into(), message: e.to_string(), details }
    }

    fn record(&self) -> serde_json::Value {
        json!({
            "status": if self.exit_code == 2 { "config-error" } else { "compute-error" },
            "exit_code": self.exit_code,
            "kind": self.kind,
            "message": self.message,
            "details": self.details,
        })
    }
}

fn report(err: &CliError, out: Option<&Path>) -> ExitCode {
    let record = err.record();
    eprintln!("{record}");
    if let Some(dir) = out {
        if std::fs::create_dir_all(dir).is_ok() {
            let _ = std::fs::write(dir.join("error.json"), format!("{record:#}\n"));
        }
    }
    ExitCode::from(err.exit_code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return report(&CliError::config(e.to_string().trim().to_string()), None),
    };
    let (result, out) = match cli.command {
        Command::Compare(args) => (compare::run(&args), args.out),
        Command::Trace(a) => (modes::run(Mode::Trace, &a), a.out),
        Command::Flux(a) => (modes::run(Mode::Flux, &a), a.out),
        Command::GoPredict(a) => (modes::run(Mode::GoPredict, &a), a.out),
        Command::TdseRun(a) => (modes::run(Mode::TdseRun, &a), a.out),
        Command::TwoBeam(a) => (modes::run(Mode::TwoBeam, &a), a.out),
        Command::ElectricAb(a) => (modes::run(Mode::ElectricAb, &a), a.out),
        Command::Recover(a) => (modes::run(Mode::Recover, &a), a.out),
    };
    match result {
        Ok(manifest) => {
            println!("{}", serde_json::to_string(&manifest.summary).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(e) => report(&e, Some(&out)),
    }
}
