use std::path::PathBuf;
use std::process::ExitCode;

use bornlab_cli::config::{parse_config, Command};
use bornlab_cli::run::run;
use bornlab_cli::{EXIT_CHECK_FAILED, EXIT_PASS};
use clap::Parser;
use serde_json::json;

/// Born-rule experiments on grids.
#[derive(Debug, Parser)]
#[command(name = "bornlab", version)]
struct Cli {
    /// Command to run; overrides `command` in the config file.
    #[arg(value_enum)]
    command: Option<Command>,
    /// JSON run config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output root; results go to `<out>/<run name>/`.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// RNG seed; overrides `seed` in the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Dotted-path override such as `evolution.dt=0.005` (repeatable).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = parse_config(cli.config.as_deref(), cli.command, cli.seed, &cli.overrides)
        .and_then(|config| run(&config, &cli.out));
    match outcome {
        Ok(summary) => {
            let status = json!({"name": summary.name, "passed": summary.passed, "failures": summary.failures});
            if summary.passed {
                println!("{status}");
                ExitCode::from(EXIT_PASS as u8)
            } else {
                eprintln!("{status}");
                ExitCode::from(EXIT_CHECK_FAILED as u8)
            }
        }
        Err(e) => {
            eprintln!("{}", json!({"error": e.to_string(), "exit_code": e.exit_code()}));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
