use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rwre_lab::{execute, Command, Config, Overrides};

/// Experiments with random walks in random environment.
#[derive(Parser)]
#[command(name = "rwre-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// JSON configuration, or a manifest from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    replicas: Option<u64>,
    #[arg(long, global = true, env = "RWRE_LAB_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Check the standing hypotheses of the model and solve for κ.
    EnvCheck,
    /// Valley decomposition, environment events, crossing and depth-tail checks.
    Valleys,
    /// Simulate trajectories in one sampled environment.
    Simulate,
    /// Estimate deviation probabilities and fit their exponent.
    Estimate,
    /// Theoretical quenched exponent curve over a ν grid.
    ExponentCurve,
    /// Property sweep of the exact finite-interval formulas.
    OracleCheck,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::EnvCheck => Command::EnvCheck,
            Cmd::Valleys => Command::Valleys,
            Cmd::Simulate => Command::Simulate,
            Cmd::Estimate => Command::Estimate,
            Cmd::ExponentCurve => Command::ExponentCurve,
            Cmd::OracleCheck => Command::OracleCheck,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut config = match &cli.config {
        Some(path) => match Config::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return e.exit_code();
            }
        },
        None => Config::default(),
    };
    config.apply(&Overrides { seed: cli.seed, out: cli.out, replicas: cli.replicas, threads: cli.threads });
    let command = Command::from(cli.command);
    match execute(command, &config) {
        Ok(m) => {
            for o in &m.outputs {
                println!("{}  {}", o.sha256, o.file);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
