//! `fastflow`: run scenarios, sweep fundamental diagrams, render frames.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use fastflow_core::experiment::{self, ExperimentError, RunOptions, SweepParam};
use fastflow_core::{scenario, Model, ScenarioConfig};

#[derive(Parser)]
#[command(name = "fastflow", version, about = "Floor-field pedestrian simulator with counterflow lanes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write metrics.csv (and optional frames).
    Run {
        config: PathBuf,
        /// Override the seed from the config file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Write frames/NNNNNN.txt every this many rounds (0 = never).
        #[arg(long, default_value_t = 0)]
        snapshot_every: u64,
    },
    /// Fundamental diagram: flow against density, averaged over seeds.
    Fd {
        config: PathBuf,
        /// `0.1,0.2,0.3` or `0.05..0.6 step 0.05`.
        #[arg(long)]
        densities: String,
        #[arg(long)]
        seeds: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, env = "FASTFLOW_JOBS", default_value_t = 1)]
        jobs: usize,
    },
    /// One fundamental diagram per value of a model parameter.
    Sweep {
        config: PathBuf,
        /// `kf` or `n_max`.
        #[arg(long)]
        param: String,
        /// Comma-separated parameter values.
        #[arg(long)]
        values: String,
        #[arg(long)]
        densities: String,
        #[arg(long)]
        seeds: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, env = "FASTFLOW_JOBS", default_value_t = 1)]
        jobs: usize,
    },
    /// Print the state after some rounds as a text frame.
    Render {
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        rounds: u64,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load(path: &Path) -> Result<(ScenarioConfig, PathBuf), ExperimentError> {
    let config = experiment::load_config(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((config, base))
}

fn usage(msg: String) -> ExperimentError {
    ExperimentError::Usage(msg)
}

fn execute(command: Command) -> Result<(), ExperimentError> {
    match command {
        Command::Run { config, seed, out, snapshot_every } => {
            let (cfg, base) = load(&config)?;
            let opts = RunOptions { seed, snapshot_every };
            println!("{}", experiment::run_to_dir(&cfg, &base, &out, &opts)?);
        }
        Command::Fd { config, densities, seeds, out, jobs } => {
            let (cfg, base) = load(&config)?;
            let densities = experiment::parse_densities(&densities)?;
            if seeds == 0 {
                return Err(usage("--seeds: must be at least 1".into()));
            }
            let points = experiment::fd_sweep(&cfg, &base, &densities, seeds, 0, jobs.max(1), Model::Counterflow)?;
            for path in experiment::write_fd(&out, "fd", &points)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Sweep { config, param, values, densities, seeds, out, jobs } => {
            let param = SweepParam::parse(&param)?;
            let (cfg, base) = load(&config)?;
            let densities = experiment::parse_densities(&densities)?;
            let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
            if values.is_empty() {
                return Err(usage("--values: no values given".into()));
            }
            if seeds == 0 {
                return Err(usage("--seeds: must be at least 1".into()));
            }
            let curves = experiment::sweep(&cfg, &base, param, &values, &densities, seeds, jobs.max(1))?;
            for c in &curves {
                for path in experiment::write_fd(&out, &format!("fd_{}_{}", param.name(), c.value), &c.points)? {
                    println!("wrote {}", path.display());
                }
            }
            let path = out.join("sweep.csv");
            std::fs::write(&path, experiment::sweep_csv(param, &curves)).map_err(|source| ExperimentError::Io {
                path: path.display().to_string(),
                source,
            })?;
            println!("wrote {}", path.display());
        }
        Command::Render { config, rounds, seed } => {
            let (mut cfg, base) = load(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let mut state = scenario::build(&cfg, &base)?;
            state.run(rounds);
            print!("{}", experiment::render(&state));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fastflow: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
