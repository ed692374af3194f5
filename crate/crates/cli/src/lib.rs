//! `uwbnav` command-line tool.
//!
//! Configuration resolves as defaults, then `--config FILE`, then flags.
//! Every command writes into a fresh timestamped directory under `--out`
//! holding the resolved `config.toml`.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 runtime failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;
use uwbnav_core::config::{Overrides, RunConfig};
use uwbnav_core::sim::{load_scenario, ScenarioSpec};

pub mod commands;
pub mod serve;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

pub fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "uwbnav", version, about = "DDPG navigation with UWB localization: train, evaluate, benchmark, replay, serve")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML config file layered over the defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Parent directory for run directories.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a DDPG policy.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        episodes: Option<u64>,
        /// Continue from a checkpoint directory.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Run planners on scenarios and print the comparison tables.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Scenario file; repeat for several.
        #[arg(long = "scenario")]
        scenarios: Vec<PathBuf>,
        /// Comma-separated planners: rl, dwa.
        #[arg(long = "planner", value_delimiter = ',')]
        planners: Vec<String>,
        /// Comma-separated UWB range noise levels, m.
        #[arg(long = "noise-sigma", value_delimiter = ',')]
        noise_sigma: Vec<f64>,
        #[arg(long)]
        runs: Option<usize>,
        /// Actor weights for the rl planner.
        #[arg(long)]
        actor: Option<PathBuf>,
    },
    /// Measure planner decision throughput.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        actor: Option<PathBuf>,
    },
    /// Summarize a trajectory log and export plot data.
    Replay {
        log: PathBuf,
        /// Write `series,t,x,y` rows here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Serve teleoperation sessions over WebSocket at /session/{id}.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        port: Option<u16>,
    },
}

/// Resolved configuration for a command.
pub fn resolve(common: &Common, mut overrides: Overrides) -> Result<RunConfig, CliError> {
    overrides.seed = common.seed;
    overrides.out = common.out.clone();
    RunConfig::resolve(common.config.as_deref(), &overrides).map_err(|e| CliError::Config(e.to_string()))
}

pub fn load_scenario_file(path: &Path) -> Result<ScenarioSpec, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read scenario {}: {e}", path.display())))?;
    load_scenario(&text).map_err(|e| CliError::Config(format!("scenario {}: {e}", path.display())))
}

/// Creates `<out>/<timestamp>-<command>-s<seed>` and writes the resolved config into it.
pub fn create_run_dir(cfg: &RunConfig, command: &str) -> Result<PathBuf, CliError> {
    let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S");
    let base = cfg.out.join(format!("{stamp}-{command}-s{}", cfg.seed));
    let mut dir = base.clone();
    let mut n = 2;
    while dir.exists() {
        dir = PathBuf::from(format!("{}-{n}", base.display()));
        n += 1;
    }
    std::fs::create_dir_all(&dir).map_err(|e| runtime(format!("cannot create {}: {e}", dir.display())))?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml()).map_err(runtime)?;
    Ok(dir)
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train { common, episodes, resume } => {
            let cfg = resolve(&common, Overrides { episodes, ..Default::default() })?;
            commands::train(&cfg, resume.as_deref()).map(|_| ())
        }
        Command::Eval {
            common,
            scenarios,
            planners,
            noise_sigma,
            runs,
            actor,
        } => {
            let overrides = Overrides {
                scenarios: (!scenarios.is_empty()).then_some(scenarios),
                planners: (!planners.is_empty()).then_some(planners),
                noise_sigma: (!noise_sigma.is_empty()).then_some(noise_sigma),
                runs,
                actor,
                ..Default::default()
            };
            let cfg = resolve(&common, overrides)?;
            commands::eval(&cfg).map(|_| ())
        }
        Command::Bench { common, actor } => {
            let cfg = resolve(&common, Overrides { actor, ..Default::default() })?;
            commands::bench(&cfg).map(|_| ())
        }
        Command::Replay { log, csv } => commands::replay(&log, csv.as_deref()),
        Command::Serve { common, scenario, port } => {
            let overrides = Overrides {
                scenarios: scenario.map(|s| vec![s]),
                port,
                ..Default::default()
            };
            let cfg = resolve(&common, overrides)?;
            serve::run_blocking(&cfg)
        }
    }
}

pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
