use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use pgnn_cli::commands::{self, Context, Manifest};
use pgnn_cli::config::PipelineConfig;
use pgnn_cli::CliError;

/// PGNN feedforward pipeline: data generation, identification, training,
/// ISS certification and closed-loop simulation.
#[derive(Parser)]
#[command(name = "pgnn", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Pipeline configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides paths.out).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit the physics parameters (best linear approximation).
    Identify(Common),
    /// Train the configured controllers.
    Train(Common),
    /// Certify ISS of trained feedforward filters.
    Certify {
        #[command(flatten)]
        common: Common,
        /// Model or controller files; defaults to the configured controllers.
        #[arg(long = "model")]
        models: Vec<PathBuf>,
    },
    /// Generate the extrapolation set over the operating region.
    GenZe(Common),
    /// Simulate the data-generating experiment and write the I/O log.
    GenData(Common),
    /// Run the scenario list with the trained controllers.
    Simulate(Common),
    /// Train, then simulate, and rank the controllers.
    Compare(Common),
}

fn context(c: &Common) -> Result<Context, CliError> {
    let cfg = PipelineConfig::load(&c.config)?.with_seed(c.seed);
    Context::new(cfg, c.out.clone())
}

fn run(cli: Cli) -> Result<Manifest, CliError> {
    match cli.cmd {
        Cmd::Identify(c) => commands::identify(context(&c)?),
        Cmd::Train(c) => commands::train(context(&c)?),
        Cmd::Certify { common, models } => commands::certify(context(&common)?, &models),
        Cmd::GenZe(c) => commands::gen_ze(context(&c)?),
        Cmd::GenData(c) => commands::gen_data(context(&c)?),
        Cmd::Simulate(c) => commands::simulate(context(&c)?),
        Cmd::Compare(c) => commands::compare(context(&c)?),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let err = CliError::Usage(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            std::process::exit(err.exit_code());
        }
    };
    match run(cli) {
        Ok(m) => println!("{}", serde_json::to_string_pretty(&m).expect("json")),
        Err(e) => {
            eprintln!("{}", e.to_json());
            std::process::exit(e.exit_code());
        }
    }
}
