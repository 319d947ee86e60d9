use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Parser, Subcommand};
use fallgas_cli::catalog::{self, Scale};
use fallgas_cli::ExperimentConfig;

#[derive(Parser)]
#[command(name = "fallgas", version, about = "Tracer particle falling through a random scatterer gas")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment from a TOML config
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// List the built-in configurations
    List,
    /// Print a built-in configuration as TOML
    Show {
        name: String,
        #[arg(long)]
        smoke: bool,
    },
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<bool> {
    match Cli::parse().cmd {
        Cmd::Run { config, seed, output } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.apply_env()?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let (r, dir) = fallgas_cli::run(&cfg, output.as_deref())?;
            for v in &r.outcome.verdicts {
                println!(
                    "{} {} statistic={} target={} tolerance={}",
                    if v.pass { "PASS" } else { "FAIL" },
                    v.criterion,
                    v.statistic,
                    v.target,
                    v.tolerance
                );
            }
            if let Some(e) = &r.error {
                eprintln!("run aborted, partial output: {e}");
            }
            println!("wrote {}", dir.display());
            Ok(r.passed())
        }
        Cmd::List => {
            for e in catalog::list_experiments() {
                println!("{:5} {}", e.name, e.title);
            }
            Ok(true)
        }
        Cmd::Show { name, smoke } => {
            let s = if smoke { Scale::Smoke } else { Scale::Full };
            let e = catalog::find(&name, s).ok_or_else(|| anyhow!("no built-in config named `{name}`"))?;
            print!("{}", e.config.to_toml()?);
            Ok(true)
        }
    }
}
