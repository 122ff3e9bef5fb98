use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use thermo_cli::emit::to_json_bytes;
use thermo_cli::{run, Command, ExperimentConfig, Format, RunError, THREADS_ENV};

/// Runs a thermodynamic-formalism experiment described by a JSON config.
/// Flags only override fields of the config.
#[derive(Debug, Parser)]
#[command(name = "thermo", version)]
struct Cli {
    /// Command to run; replaces the config's "command".
    #[arg(value_enum)]
    command: Option<Command>,
    /// Path to the JSON experiment config.
    #[arg(short, long)]
    config: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(short, long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    cells: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    max_period: Option<usize>,
    /// Worker threads; defaults to $THERMO_THREADS, then to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, RunError> {
    let text = std::fs::read_to_string(&cli.config)?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(c) = cli.command {
        cfg.command = c;
    }
    cfg.output = cli.output.clone().or(cfg.output);
    cfg.format = cli.format.or(cfg.format);
    cfg.cells = cli.cells.or(cfg.cells);
    cfg.depth = cli.depth.or(cfg.depth);
    cfg.max_period = cli.max_period.or(cfg.max_period);
    Ok(cfg)
}

fn threads(cli: &Cli) -> Option<usize> {
    cli.threads
        .or_else(|| {
            std::env::var(THREADS_ENV)
                .ok()
                .and_then(|v| v.trim().parse().ok())
        })
        .filter(|&n| n > 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = threads(&cli) {
        // only fails if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match load(&cli).and_then(|cfg| run(&cfg)) {
        Ok(Some(path)) => {
            eprintln!("wrote {}", path.display());
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            let body =
                to_json_bytes(&e.to_json()).unwrap_or_else(|_| format!("{e}\n").into_bytes());
            eprint!("{}", String::from_utf8_lossy(&body));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
