use std::path::PathBuf;
use std::process::ExitCode;

use bsde_lab::experiments::{
    exit_code, run, ExperimentConfig, ExperimentKind, OutputFormat, EXIT_ASSERTION, EXIT_SUCCESS, EXIT_VALIDATION,
    OUT_DIR_ENV,
};
use bsde_lab::LabError;
use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    YoungSweep,
    PhiMoment,
    Integrability,
    Solve,
    Ladder,
    Counterexample,
    Bound,
}

impl From<Kind> for ExperimentKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::YoungSweep => ExperimentKind::YoungSweep,
            Kind::PhiMoment => ExperimentKind::PhiMoment,
            Kind::Integrability => ExperimentKind::Integrability,
            Kind::Solve => ExperimentKind::Solve,
            Kind::Ladder => ExperimentKind::Ladder,
            Kind::Counterexample => ExperimentKind::Counterexample,
            Kind::Bound => ExperimentKind::Bound,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Both,
}

/// Runs one experiment and writes `<out>/<kind>.csv` and `<out>/<kind>.json`.
///
/// Exit status: 0 success, 1 I/O failure, 2 invalid configuration,
/// 3 numerical failure, 4 a checked property does not hold.
#[derive(Debug, Parser)]
#[command(name = "bsde-lab", version)]
struct Cli {
    #[arg(value_enum)]
    kind: Kind,
    /// JSON configuration; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; falls back to the configuration, then to $BSDE_LAB_OUT, then to `.`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_VALIDATION } else { EXIT_SUCCESS });
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn execute(cli: Cli) -> Result<u8, LabError> {
    let kind = ExperimentKind::from(cli.kind);
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(f) = cli.format {
        config.format = match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
            Format::Both => OutputFormat::Both,
        };
    }
    let out = cli
        .out
        .or_else(|| config.out.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    config.out = Some(out.clone());

    let table = run(kind, &config)?;
    for path in table.emit(&out, config.format)? {
        println!("wrote {}", path.display());
    }
    let mut code = EXIT_SUCCESS;
    for a in &table.assertions {
        println!("{} {}: {}", if a.pass { "PASS" } else { "FAIL" }, a.name, a.detail);
        if !a.pass {
            code = EXIT_ASSERTION;
        }
    }
    Ok(code)
}
