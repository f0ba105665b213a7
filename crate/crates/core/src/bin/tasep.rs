//! Command-line front end. Exit codes: 0 success, 1 verification failure,
//! 2 numeric non-convergence, 64 usage error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use tasep_core::run::{cmd_compute, cmd_mc, cmd_oracle, cmd_sweep, cmd_verify, RunConfig, RunReport};
use tasep_core::verify::Suite;
use tasep_core::Error;

const EXIT_VERIFY: u8 = 1;
const EXIT_NUMERIC: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "tasep", version, about = "Fredholm-determinant transition probabilities for TASEP and PushASEP")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Add Monte Carlo and master-equation values to `compute`.
    #[arg(long, global = true)]
    cross_check: bool,
    /// kolmogorov, identities, initial, push or all.
    #[arg(long, global = true, default_value = "all")]
    suite: String,
    /// Overrides the Monte Carlo seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the Monte Carlo sample count.
    #[arg(long, global = true)]
    samples: Option<u64>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// F_t by the Fredholm determinant.
    Compute,
    /// Run a check suite.
    Verify,
    /// Monte Carlo estimate.
    Mc,
    /// Master-equation and Schütz values.
    Oracle,
    /// All routes and the backward-equation residual over a time grid.
    Sweep,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Domain(_) => EXIT_USAGE,
        _ => EXIT_NUMERIC,
    }
}

fn load(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        None => RunConfig::default(),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            RunConfig::from_json(&text)?
        }
    };
    if let Some(s) = cli.seed {
        cfg.mc.seed = s;
        cfg.verify.seed = s;
    }
    if let Some(n) = cli.samples {
        cfg.mc.samples = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<RunReport, Error> {
    let cfg = load(cli)?;
    match cli.command {
        Command::Compute => cmd_compute(&cfg, cli.cross_check),
        // without a config file the built-in instances are checked
        Command::Verify => cmd_verify(cli.suite.parse::<Suite>()?, &cfg, cli.config.is_none()),
        Command::Mc => cmd_mc(&cfg),
        Command::Oracle => cmd_oracle(&cfg),
        Command::Sweep => cmd_sweep(&cfg),
    }
}

fn emit(cli: &Cli, report: &RunReport) -> Result<(), Error> {
    let text = match cli.format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
    };
    match &cli.out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Config(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let report = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    if let Err(e) = emit(&cli, &report) {
        eprintln!("error: {e}");
        return ExitCode::from(exit_code(&e));
    }
    for c in report.checks.iter().filter(|c| !c.passed) {
        eprintln!("{c}");
    }
    if !report.checks_passed() {
        ExitCode::from(EXIT_VERIFY)
    } else if !report.converged() {
        eprintln!("error: determinant not converged");
        ExitCode::from(EXIT_NUMERIC)
    } else {
        ExitCode::SUCCESS
    }
}
