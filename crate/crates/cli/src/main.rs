mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use plap_core::cascade::Swept;

use commands::CliError;
use config::RunConfig;

/// Regularized parabolic p-Laplacian solver and its audits.
#[derive(Parser, Debug)]
#[command(name = "plap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; omitted fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Concurrent sweep points.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; PLAP_OUT takes precedence.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config snapshot stride.
    #[arg(long, global = true)]
    snapshot_stride: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Integrate one run and write its ledger and snapshots.
    Solve,
    /// Solve the dual problem on a stored run and check the duality audits.
    DualAudit,
    /// Vanishing-viscosity sweep at fixed mu.
    CascadeNu,
    /// Vanishing-floor sweep with nu = 0.
    CascadeMu,
    /// Run every seeded property suite.
    Certify,
    /// Discrete integration by parts on random trajectory pairs.
    IbpTest,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::DualAudit => "dual-audit",
            Command::CascadeNu => "cascade-nu",
            Command::CascadeMu => "cascade-mu",
            Command::Certify => "certify",
            Command::IbpTest => "ibp-test",
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(stride) = cli.snapshot_stride {
        config.snapshot_stride = stride;
    }
    if let Some(out) = &cli.out {
        config.out = out.clone();
    }
    if let Some(out) = std::env::var_os("PLAP_OUT").filter(|s| !s.is_empty()) {
        config.out = PathBuf::from(out);
    }
    if cli.jobs == 0 {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    Ok(config)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = resolve(cli)?;
    let out = config.out.clone();
    let start = Instant::now();
    let result = match cli.command {
        Command::Solve => commands::cmd_solve(&config, &out),
        Command::DualAudit => commands::cmd_dual_audit(&config, &out),
        Command::CascadeNu => commands::cmd_cascade(&config, &out, Swept::Nu, cli.jobs),
        Command::CascadeMu => commands::cmd_cascade(&config, &out, Swept::Mu, cli.jobs),
        Command::Certify => commands::cmd_certify(&config, &out),
        Command::IbpTest => commands::cmd_ibp_test(&config, &out),
    };
    if out.is_dir() {
        commands::write_timing(&out, cli.command.name(), start.elapsed().as_secs_f64());
    }
    result
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("plap {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
