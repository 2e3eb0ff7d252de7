use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use xsim::presets::{self, ALL};
use xsim::{run_experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "xsim", version, about = "Run dressed-state gate experiments and write CSV/SVG artifacts")]
struct Cli {
    /// Worker threads for sweep points and trajectories.
    #[arg(long, global = true, env = "XSIM_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a TOML config or re-run a manifest.json.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a built-in preset.
    Preset {
        name: String,
        /// Dotted key=value, e.g. params.omega_g_khz=2 or sweep.values=[100,500].
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Print the resolved config as TOML instead of running it.
        #[arg(long)]
        print_config: bool,
        #[command(flatten)]
        common: Common,
    },
    /// List presets.
    List,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trajectories per noisy sweep point.
    #[arg(long)]
    trajectories: Option<usize>,
}

impl Common {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            cfg.base_seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(t) = self.trajectories {
            cfg.trajectories = t;
        }
    }
}

fn execute(cfg: ExperimentConfig, workers: Option<usize>) -> Result<()> {
    let out = run_experiment(&cfg, workers)?;
    for w in &out.manifest.warnings {
        eprintln!("warning: {w}");
    }
    for r in &out.rows {
        println!("{:>12.4} {:<14} F2 = {:.6}  M = {:8.3}  sem = {:.2e}", r.sweep_value, r.noise_marker, r.f2, r.m, r.sem);
    }
    for (k, v) in &out.manifest.summary {
        if k.starts_with("t1_s/") {
            println!("{k} = {v:.4}");
        }
    }
    println!("wrote {} to {}", out.manifest.outputs.join(", "), out.dir.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::List => {
            for k in ALL {
                println!("{:<16} {}", k.name(), k.description());
            }
            Ok(())
        }
        Command::Run { config, common } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            common.apply(&mut cfg);
            execute(cfg, cli.workers)
        }
        Command::Preset { name, overrides, print_config, common } => {
            let mut cfg = presets::default_config(&name)?;
            for o in &overrides {
                cfg.apply_override(o)?;
            }
            common.apply(&mut cfg);
            if print_config {
                cfg.validate()?;
                print!("{}", cfg.to_toml()?);
                return Ok(());
            }
            execute(cfg, cli.workers)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
