use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use log::error;

use mras::benchmarks::BenchmarkKind;
use mras::config::RunConfig;
use mras::driver;

/// Online parameter identification for parabolic PDEs with a model reference
/// adaptive system.
#[derive(Parser, Debug)]
#[command(name = "mras", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize data, run the MRAS for every noise level and write outputs.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// List the benchmarks and their default settings.
    List {
        /// Print stable `key=value` lines.
        #[arg(long)]
        machine: bool,
    },
    /// Write the synthetic data only.
    Synthesize {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(clap::Args, Debug)]
struct Overrides {
    /// Output directory (defaults to `output.dir` of the config).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated snapshot times.
    #[arg(long)]
    snapshots: Option<String>,
}

impl Overrides {
    fn load(&self, path: &PathBuf) -> Result<(RunConfig, PathBuf)> {
        let mut cfg = RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(s) = &self.snapshots {
            cfg.set("output.snapshots", s)?;
        }
        cfg.validate()?;
        let out = self.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
        Ok((cfg, out))
    }
}

fn list(machine: bool) {
    for kind in BenchmarkKind::ALL {
        let cfg = RunConfig::desk(kind);
        if machine {
            for (k, v) in cfg.entries() {
                if k != "benchmark" {
                    println!("{}.{k}={v}", kind.name());
                }
            }
        } else {
            println!("{}", kind.name());
            println!("  {}", kind.equation());
            println!(
                "  desk: h = {}, dt = {}, T = {}, noise = {:?}, q0 = {}",
                cfg.h, cfg.dt, cfg.t_end, cfg.deltas, cfg.initial_parameter
            );
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::List { machine } => list(machine),
        Command::Run { config, overrides } => {
            let (cfg, out) = overrides.load(&config)?;
            for o in driver::run_benchmark(&cfg, &out)? {
                println!(
                    "delta={} eq0={:.6e} eq={:.6e} eu={:.6e} violations={} dir={}",
                    o.delta,
                    o.report.initial_eq,
                    o.report.final_eq,
                    o.report.final_eu,
                    o.report.monotonicity_violations,
                    o.dir.display()
                );
            }
        }
        Command::Synthesize { config, overrides } => {
            let (cfg, out) = overrides.load(&config)?;
            let files = driver::synthesize(&cfg, &out)?;
            println!("wrote {} files to {}", files.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MRAS_LOG", "warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e:#}");
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
