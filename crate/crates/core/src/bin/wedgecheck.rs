use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use wedge_core::commands::{exit_code, run, Command, Outcome, RunOptions};
use wedge_core::config::ProblemConfig;
use wedge_core::report::write_artifacts;
use wedge_core::WedgeError;

/// Worker threads for the sample sweeps; the only environment setting read.
const WORKERS_ENV: &str = "WEDGE_WORKERS";

#[derive(Parser)]
#[command(name = "wedgecheck", version, about = "Checks ellipticity conditions for first-order wedge boundary problems")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,

    /// Problem description (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Covector, comma separated (kernel); |eta| samples (symbols homog).
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    eta: Option<Vec<f64>>,

    /// Edge point, comma separated.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    y: Option<Vec<f64>>,

    /// Cosphere samples per component, or |eta| samples for symbol estimates.
    #[arg(long, global = true)]
    samples: Option<usize>,

    /// Directory for the JSON report and all CSV tables.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Format of the report written to stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Run the quadrature and brute-force cross-checks as well.
    #[arg(long, global = true)]
    oracle: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Cmd {
    /// Indicial roots in the strip with multiplicities and chain lengths.
    Spectrum,
    /// Trace space basis and the endomorphism g.
    Trace,
    /// Green pairing on the trace spaces of the operator and its adjoint.
    Pairing,
    /// Kernels of the normal family and its adjoint at one covector.
    Kernel,
    /// Kernel bundle over the cosphere.
    Sweep,
    /// Full condition battery and the boundary condition verdict.
    Check,
    /// Edge symbol checks.
    Symbols {
        #[command(subcommand)]
        what: SymbolsCmd,
    },
}

#[derive(Subcommand)]
enum SymbolsCmd {
    /// Order estimate of the complete boundary symbol.
    Estimate,
    /// Twisted homogeneity of the normal family.
    Homog,
    /// Extension operator: support, boundary limit and trace round trip.
    Extend,
}

fn configure_workers() -> Result<(), String> {
    let Ok(v) = std::env::var(WORKERS_ENV) else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{WORKERS_ENV} must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn emit(outcome: &Outcome, cli: &Cli) -> Result<(), WedgeError> {
    if let Some(dir) = &cli.out {
        write_artifacts(dir, &outcome.artifacts)?;
    }
    match cli.format {
        Format::Json => print!("{}", outcome.json),
        Format::Csv => print!("{}", outcome.table.render()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_workers() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let cmd = match &cli.cmd {
        Cmd::Spectrum => Command::Spectrum,
        Cmd::Trace => Command::Trace,
        Cmd::Pairing => Command::Pairing,
        Cmd::Kernel => Command::Kernel,
        Cmd::Sweep => Command::Sweep,
        Cmd::Check => Command::Check,
        Cmd::Symbols { what: SymbolsCmd::Estimate } => Command::SymbolsEstimate,
        Cmd::Symbols { what: SymbolsCmd::Homog } => Command::SymbolsHomog,
        Cmd::Symbols { what: SymbolsCmd::Extend } => Command::SymbolsExtend,
    };
    let Some(path) = &cli.config else {
        eprintln!("error: --config is required");
        return ExitCode::from(2);
    };
    let cfg = match ProblemConfig::load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let opts = RunOptions { eta: cli.eta.clone(), y: cli.y.clone(), samples: cli.samples, oracle: cli.oracle };
    let outcome = match run(cmd, &cfg, &opts) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e) as u8);
        }
    };
    if let Err(e) = emit(&outcome, &cli) {
        eprintln!("error: {e}");
        return ExitCode::from(exit_code(&e) as u8);
    }
    if outcome.pass {
        ExitCode::SUCCESS
    } else {
        if outcome.failures.is_empty() {
            eprintln!("{}: a condition failed", outcome.name);
        } else {
            eprintln!("{}: failed {}", outcome.name, outcome.failures.join(", "));
        }
        ExitCode::from(1)
    }
}
