//! `frog`: classify, tabulate, simulate and verify finite-lifetime random walk systems.
//!
//! Exit codes: 0 success, 1 malformed input, 2 invalid spec or refused input,
//! 3 inconclusive verdict (Boundary/Unknown), 4 verification failure, 5 runtime error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{Report, SimulateArgs};
use crate::output::{append_record, emit, Format, RunRecord};

#[derive(Debug)]
pub enum CliError {
    Malformed(String),
    Invalid(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Malformed(_) => 1,
            CliError::Invalid(_) => 2,
            CliError::Runtime(_) => 5,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Malformed(m) | CliError::Invalid(m) | CliError::Runtime(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "frog",
    version,
    about = "Finite-lifetime random walk systems on the integers"
)]
struct Cli {
    /// Output format (default depends on the subcommand)
    #[arg(long, global = true, value_enum)]
    out: Option<Format>,

    /// JSONL file that receives one run record per successful invocation
    #[arg(long, global = true, default_value = "runs.jsonl")]
    store: PathBuf,

    /// Do not write a run record
    #[arg(long, global = true)]
    no_store: bool,

    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads; affects speed only
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide survival or extinction
    Classify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Block miss probabilities a_n with their bounds
    Exact {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 100)]
        blocks: u64,
    },
    /// Monte Carlo survival-to-horizon estimates
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        /// One or more horizons M, comma separated
        #[arg(long, value_delimiter = ',', default_value = "1000")]
        horizon: Vec<u64>,
        #[arg(long, default_value_t = 0.95)]
        ci_level: f64,
        /// Write the per-site activation profile (largest horizon) as CSV
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// Phase table over a grid of N and L
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Inclusive range a:b
        #[arg(long, value_parser = parse_range)]
        n_range: (u32, u32),
        #[arg(long, value_parser = parse_range)]
        l_range: (u32, u32),
    },
    /// Check the DP against path enumeration and the two-sided block bounds
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Largest lifetime in the enumeration grid
        #[arg(long, default_value_t = 12)]
        oracle_l: u32,
        #[arg(long, default_value_t = 200)]
        blocks: u64,
    },
}

fn parse_range(s: &str) -> Result<(u32, u32), String> {
    let (a, b) = match s.split_once(':') {
        Some((a, b)) => (a, b),
        None => (s, s),
    };
    let parse = |v: &str| v.trim().parse::<u32>().map_err(|e| format!("{v:?}: {e}"));
    Ok((parse(a)?, parse(b)?))
}

fn run(cli: &Cli) -> Result<(&'static str, Report), CliError> {
    let out = |default| cli.out.unwrap_or(default);
    Ok(match &cli.command {
        Command::Classify { config } => (
            "classify",
            commands::classify_cmd(config::load_params(config)?, out(Format::Jsonl))?,
        ),
        Command::Exact { config, blocks } => (
            "exact",
            commands::exact_cmd(config::load_params(config)?, *blocks, out(Format::Csv))?,
        ),
        Command::Simulate {
            config,
            trials,
            horizon,
            ci_level,
            profile,
        } => (
            "simulate",
            commands::simulate_cmd(
                config::load_params(config)?,
                SimulateArgs {
                    horizons: horizon.clone(),
                    trials: *trials,
                    seed: cli.seed,
                    ci_level: *ci_level,
                    profile: profile.clone(),
                },
                out(Format::Jsonl),
            )?,
        ),
        Command::Sweep {
            config,
            n_range,
            l_range,
        } => (
            "sweep",
            commands::sweep_cmd(
                config::load_params(config)?,
                *n_range,
                *l_range,
                out(Format::Csv),
            )?,
        ),
        Command::Verify {
            config,
            oracle_l,
            blocks,
        } => {
            let params = config.as_deref().map(config::load_params).transpose()?;
            (
                "verify",
                commands::verify_cmd(params, *oracle_l, *blocks, out(Format::Jsonl))?,
            )
        }
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(5);
        }
    }

    let (name, report) = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {}", e.message());
            return ExitCode::from(e.code());
        }
    };
    if let Err(e) = emit(&report.stdout) {
        eprintln!("error: {}", e.message());
        return ExitCode::from(e.code());
    }
    if report.exit != 4 && !cli.no_store {
        let record = RunRecord {
            timestamp: chrono::Utc::now().to_rfc3339(),
            subcommand: name,
            config: report.config,
            result: report.result,
            version: env!("CARGO_PKG_VERSION"),
            seed: cli.seed,
        };
        if let Err(e) = append_record(&cli.store, &record) {
            eprintln!("error: {}", e.message());
            return ExitCode::from(e.code());
        }
    }
    ExitCode::from(report.exit)
}
