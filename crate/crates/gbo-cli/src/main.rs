//! Single entry point for the numerical laboratory: profile solves,
//! spectral summaries, interaction constants, reduced dynamics, full PDE
//! runs, check suites, and cross-run reporting. Every run directory gets a
//! manifest with a config digest and output checksums so results can be
//! reproduced and compared.

mod error;
mod jsonw;
mod manifest;
mod params;
mod report;
mod runs;
mod validate;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use chrono::Utc;
use clap::{Args, Parser, Subcommand};

use crate::error::CliError;
use crate::params::{fmt_trim, Params, Sweep};
use crate::validate::Suite;

#[derive(Parser)]
#[command(
    name = "gbo",
    version,
    about = "Numerical laboratory for interacting solitary waves",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the solitary-wave profile and record its invariants
    GroundState(RunArgs),
    /// Spectral summary of the linearized operator
    Spectrum(RunArgs),
    /// Interaction constants, velocities, and the collision matrix
    Constants(RunArgs),
    /// Integrate the reduced parameter dynamics
    Ode(RunArgs),
    /// Time-step the full equation with soliton tracking
    Simulate(RunArgs),
    /// Run a named check suite and emit a pass/fail report
    Validate(ValidateArgs),
    /// Consolidate manifests from earlier runs into one table
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` configuration file
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one parameter (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Run directory; relative paths resolve under GBO_OUT_DIR
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Sweep one parameter, end-inclusive
    #[arg(long, value_name = "KEY=START:STEP:END")]
    sweep: Option<String>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Which check suite to run
    #[arg(long, value_enum)]
    suite: Suite,
    /// Run directory; relative paths resolve under GBO_OUT_DIR
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directories to consolidate
    #[arg(value_name = "DIR")]
    dirs: Vec<PathBuf>,
    /// Output directory; relative paths resolve under GBO_OUT_DIR
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy)]
enum RunKind {
    GroundState,
    Spectrum,
    Constants,
    Ode,
    Simulate,
}

impl RunKind {
    fn name(self) -> &'static str {
        match self {
            RunKind::GroundState => "ground-state",
            RunKind::Spectrum => "spectrum",
            RunKind::Constants => "constants",
            RunKind::Ode => "ode",
            RunKind::Simulate => "simulate",
        }
    }

    fn execute(self, params: &Params, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        match self {
            RunKind::GroundState => runs::ground_state(params, dir),
            RunKind::Spectrum => runs::spectrum(params, dir),
            RunKind::Constants => runs::constants(params, dir),
            RunKind::Ode => runs::ode(params, dir),
            RunKind::Simulate => runs::simulate(params, dir),
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli) {
        eprintln!("{e}");
        if matches!(e, CliError::Usage(_)) {
            eprintln!("run `gbo --help` for the command synopsis");
        }
        std::process::exit(e.exit_code());
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GroundState(args) => run_command(RunKind::GroundState, &args),
        Command::Spectrum(args) => run_command(RunKind::Spectrum, &args),
        Command::Constants(args) => run_command(RunKind::Constants, &args),
        Command::Ode(args) => run_command(RunKind::Ode, &args),
        Command::Simulate(args) => run_command(RunKind::Simulate, &args),
        Command::Validate(args) => run_validate(&args),
        Command::Report(args) => run_report(&args),
    }
}

/// Output root: GBO_OUT_DIR when set, else the working directory. Explicit
/// relative `--out` paths land under the root; absent `--out` falls back to
/// `runs/<command>`.
fn resolve_out(explicit: Option<&Path>, leaf: &str) -> PathBuf {
    let root = std::env::var_os("GBO_OUT_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."));
    match explicit {
        Some(p) if p.is_absolute() => p.to_path_buf(),
        Some(p) => root.join(p),
        None => root.join("runs").join(leaf),
    }
}

fn run_command(kind: RunKind, args: &RunArgs) -> Result<(), CliError> {
    let params = Params::from_sources(args.config.as_deref(), &args.set)?;
    let out = resolve_out(args.out.as_deref(), kind.name());
    match &args.sweep {
        None => execute_single(kind, &params, &out, 1),
        Some(spec) => {
            let sweep = Sweep::parse(spec)?;
            let workers = std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
                .min(sweep.values.len());
            let next = AtomicUsize::new(0);
            let failures: Mutex<Vec<String>> = Mutex::new(Vec::new());
            std::thread::scope(|scope| {
                for _ in 0..workers {
                    scope.spawn(|| loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= sweep.values.len() {
                            break;
                        }
                        let value = sweep.values[i];
                        let mut sub_params = params.clone();
                        sub_params.insert(&sweep.key, fmt_trim(value));
                        let subdir = out.join(sweep.label(value));
                        if let Err(e) = execute_single(kind, &sub_params, &subdir, workers) {
                            failures
                                .lock()
                                .unwrap()
                                .push(format!("{}: {e}", sweep.label(value)));
                        }
                    });
                }
            });
            let failures = failures.into_inner().unwrap();
            if failures.is_empty() {
                Ok(())
            } else {
                Err(CliError::Domain(format!(
                    "sweep failures: {}",
                    failures.join("; ")
                )))
            }
        }
    }
}

fn execute_single(
    kind: RunKind,
    params: &Params,
    dir: &Path,
    workers: usize,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    let started = Utc::now();
    let outputs = kind.execute(params, dir)?;
    manifest::write_manifest(dir, kind.name(), params, started, workers, &outputs)?;
    println!(
        "{}: {} output file(s) in {}",
        kind.name(),
        outputs.len(),
        dir.display()
    );
    Ok(())
}

fn run_validate(args: &ValidateArgs) -> Result<(), CliError> {
    let out = resolve_out(args.out.as_deref(), "validate");
    std::fs::create_dir_all(&out)?;
    let started = Utc::now();
    let outcome = validate::run_suite(args.suite)?;
    let rendered = outcome.doc.render();
    let name = format!("validate_{}.json", args.suite.name());
    std::fs::write(out.join(&name), &rendered)?;
    print!("{rendered}");
    let mut params = Params::default();
    params.insert("suite", args.suite.name().to_string());
    manifest::write_manifest(&out, "validate", &params, started, 1, &[PathBuf::from(&name)])?;
    if outcome.failed == 0 {
        Ok(())
    } else {
        Err(CliError::Domain(format!(
            "{} of {} checks failed in suite {}",
            outcome.failed,
            outcome.total,
            args.suite.name()
        )))
    }
}

fn run_report(args: &ReportArgs) -> Result<(), CliError> {
    let out = resolve_out(args.out.as_deref(), "report");
    std::fs::create_dir_all(&out)?;
    let started = Utc::now();
    let report = report::build(&args.dirs);
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    std::fs::write(out.join("report.json"), report.to_json().render())?;
    let csv = report.to_csv();
    std::fs::write(out.join("report.csv"), &csv)?;
    print!("{csv}");
    let mut params = Params::default();
    params.insert(
        "runs",
        args.dirs
            .iter()
            .map(|d| d.display().to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    manifest::write_manifest(
        &out,
        "report",
        &params,
        started,
        1,
        &[PathBuf::from("report.json"), PathBuf::from("report.csv")],
    )?;
    Ok(())
}
