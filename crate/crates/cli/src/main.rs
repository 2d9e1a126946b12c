use std::path::{Path, PathBuf};
use std::process;

use clap::{Args, Parser, Subcommand};

use ring_noon_cli::config::{self, RunConfig};
use ring_noon_cli::{commands, CliError};

#[derive(Parser)]
#[command(
    name = "ring-noon",
    version,
    about = "NOON states of N bosons on a rotating three-site ring: spectra, driven protocols, rotation metrology"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ground-state Fock decomposition at the configured rotation phase
    Groundstate(RunArgs),
    /// Lowest eigenvalues along the rotation-phase grid
    Energies(RunArgs),
    /// Splitting of the lowest pair along the rotation-phase grid
    GapSweep(RunArgs),
    /// Drive coupling |V01| along the phase grid and across atom numbers
    CouplingSweep(RunArgs),
    /// Spectroscopic search for the crossing gap plus a full Rabi check
    ResonanceScan(RunArgs),
    /// Phase-accumulation measurement of the branch splitting
    Precision(RunArgs),
    /// Hold/park population surface against its closed two-time form
    TwoTime(RunArgs),
    /// Self-contained validation suite over the engine's invariants
    Validate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; every key is optional
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted-path override applied after the file, e.g. --set model.n=5
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Directory receiving the CSV and its JSON sidecar
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn dispatch(
    args: &RunArgs,
    run: fn(&RunConfig, &Path) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let cfg = config::load(args.config.as_deref(), &args.set)?;
    run(&cfg, &args.out)
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Groundstate(a) => dispatch(a, commands::groundstate),
        Command::Energies(a) => dispatch(a, commands::energies),
        Command::GapSweep(a) => dispatch(a, commands::gap_sweep_cmd),
        Command::CouplingSweep(a) => dispatch(a, commands::coupling_sweep_cmd),
        Command::ResonanceScan(a) => dispatch(a, commands::resonance_scan_cmd),
        Command::Precision(a) => dispatch(a, commands::precision),
        Command::TwoTime(a) => dispatch(a, commands::two_time),
        Command::Validate(a) => dispatch(a, commands::validate),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        process::exit(e.exit_code());
    }
}
