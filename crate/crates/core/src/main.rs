use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use pdcsim::cli::{parse_config, run, Scenario, EXIT_CONFIG};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    Params,
    Dynamics,
    Scan,
    Validate,
}

impl From<Command> for Scenario {
    fn from(c: Command) -> Self {
        match c {
            Command::Params => Scenario::Params,
            Command::Dynamics => Scenario::Dynamics,
            Command::Scan => Scenario::Scan,
            Command::Validate => Scenario::Validate,
        }
    }
}

/// Down-conversion simulator: effective parameters, dynamics, threshold scans.
#[derive(Debug, Parser)]
#[command(name = "pdcsim", version)]
struct Cli {
    #[arg(value_enum)]
    scenario: Command,
    /// Key-value configuration file.
    #[arg(long)]
    config: PathBuf,
    /// CSV destination; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match execute(&cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_CONFIG
        }
    };
    ExitCode::from(code as u8)
}

fn execute(cli: &Cli) -> Result<i32, String> {
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| format!("reading {}: {e}", cli.config.display()))?;
    let mut cfg = parse_config(&text).map_err(|e| e.to_string())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let go = || {
        run(
            cli.scenario.into(),
            &cfg,
            cli.out.as_deref(),
            &mut io::stdout().lock(),
            &mut io::stderr().lock(),
        )
    };
    match cli.threads {
        Some(0) => Err("--threads must be at least 1".into()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| e.to_string())?;
            Ok(pool.install(go))
        }
        None => Ok(go()),
    }
}
