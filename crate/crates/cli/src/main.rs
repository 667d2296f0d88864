use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use holderflow_cli::output::print_summary;
use holderflow_cli::{run_experiment, CliError, Command, ExperimentConfig};

#[derive(Parser, Debug)]
#[command(name = "holderflow", version, about = "Spectral regularity experiments for S-adic translation flows")]
struct Cli {
    #[arg(value_enum)]
    command: Command,

    /// TOML file with the same keys as the flags (snake_case)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    flags: ExperimentConfig,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let cfg = file.overlay(&cli.flags);
    if let Some(w) = cfg.workers {
        if w == 0 {
            return Err(CliError::config("workers", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::config("workers", e))?;
    }
    let manifest = run_experiment(cli.command, cfg)?;
    print_summary(&manifest);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
