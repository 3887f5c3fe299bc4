use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hawkes_vb_cli::commands::{cmd_eval, cmd_fit, cmd_simulate};
use hawkes_vb_cli::config::ExperimentConfig;
use hawkes_vb_cli::{CliError, Result};

#[derive(Parser)]
#[command(
    name = "hawkes-vb",
    version,
    about = "Simulate and fit nonlinear Hawkes processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured truth to events.csv and stats.json.
    Simulate(Common),
    /// Fit the configured model to result.json, timing.json and interactions.csv.
    Fit(Common),
    /// Score a fit against the configured truth, writing metrics.json.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Fit to score; defaults to result.json in the output directory.
        #[arg(long)]
        result: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config, default `.`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; falls back to HAWKES_VB_THREADS.
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf)> {
        let mut config = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        let out = self
            .out
            .clone()
            .or_else(|| config.out.clone())
            .unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&out)
            .map_err(|e| CliError::io(format!("cannot create {}: {e}", out.display())))?;
        init_threads(self.threads)?;
        Ok((config, out))
    }
}

fn init_threads(flag: Option<usize>) -> Result<()> {
    let threads =
        match flag {
            Some(n) => Some(n),
            None => match std::env::var("HAWKES_VB_THREADS") {
                Ok(v) => Some(v.trim().parse().map_err(|_| {
                    CliError::config(format!("HAWKES_VB_THREADS={v} is not a count"))
                })?),
                Err(_) => None,
            },
        };
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::config("thread count must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(common) => {
            let (config, out) = common.load()?;
            cmd_simulate(&config, &out)?;
        }
        Command::Fit(common) => {
            let (config, out) = common.load()?;
            cmd_fit(&config, &out)?;
        }
        Command::Eval { common, result } => {
            let (config, out) = common.load()?;
            let result = result.unwrap_or_else(|| out.join("result.json"));
            let metrics = cmd_eval(&config, &result, &out)?;
            println!(
                "{}",
                serde_json::to_string(&metrics).expect("metrics serialise")
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            // usage errors are config errors, not clap's exit code 2
            eprintln!("{}", CliError::config(e.to_string()).to_json());
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}
