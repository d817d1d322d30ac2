use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use samuel_harness::{compare_files, execute, exit, runner, ConfigError, HarnessError, RunConfig};

#[derive(Parser)]
#[command(name = "samuel", version, about = "Adaptive-regret experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (algorithm, seed) cell of a config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Print the resolved config and derived constants, then stop.
        #[arg(long)]
        dry_run: bool,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Tabulate regret reports across algorithms and seeds.
    Compare {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run the trace checks on a written trace.csv.
    Check {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(path: &Path) -> Result<RunConfig, ExitCode> {
    RunConfig::load(path).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(exit::USAGE)
    })
}

fn run(config: PathBuf, dry_run: bool, workers: Option<usize>) -> anyhow::Result<ExitCode> {
    let cfg = match load(&config) {
        Ok(c) => c,
        Err(code) => return Ok(code),
    };
    if dry_run {
        print!("{}", cfg.describe());
        return Ok(ExitCode::from(exit::OK));
    }
    if workers == Some(0) {
        eprintln!("error: --workers must be at least 1");
        return Ok(ExitCode::from(exit::USAGE));
    }
    let cells = match execute(&cfg, workers) {
        Ok(c) => c,
        Err(HarnessError::Config(e)) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(exit::USAGE));
        }
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(exit::FAILED));
        }
    };
    let mut ok = true;
    for c in &cells {
        println!(
            "{:<15} seed {:<6} loss {:>14.6}  {}  {}",
            c.algorithm.as_str(),
            c.seed,
            c.total_loss,
            if c.gated_pass { "pass" } else { "FAIL" },
            c.dir.display()
        );
        if !c.failed_checks.is_empty() {
            println!("    failed checks: {}", c.failed_checks.join("; "));
        }
        ok &= c.gated_pass;
    }
    Ok(ExitCode::from(if ok { exit::OK } else { exit::FAILED }))
}

fn check(trace: PathBuf, config: PathBuf) -> anyhow::Result<ExitCode> {
    let cfg = match load(&config) {
        Ok(c) => c,
        Err(code) => return Ok(code),
    };
    let report = match runner::check_file(&cfg, &trace) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(exit::FAILED));
        }
    };
    print!("{}", samuel_harness::io::to_json(&report));
    Ok(ExitCode::from(if report.gated_pass {
        exit::OK
    } else {
        exit::FAILED
    }))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            dry_run,
            workers,
        } => run(config, dry_run, workers),
        Command::Compare { reports, out } => match compare_files(&reports, &out) {
            Ok(rows) => {
                println!("wrote {} rows to {}", rows.len(), out.display());
                Ok(ExitCode::from(exit::OK))
            }
            Err(e) => {
                eprintln!("error: {e}");
                Ok(ExitCode::from(exit::FAILED))
            }
        },
        Command::Check { trace, config } => check(trace, config),
    };
    result.context("samuel").unwrap_or_else(|e: anyhow::Error| {
        let config_error = e.downcast_ref::<ConfigError>().is_some();
        eprintln!("error: {e:#}");
        ExitCode::from(if config_error {
            exit::USAGE
        } else {
            exit::FAILED
        })
    })
}
