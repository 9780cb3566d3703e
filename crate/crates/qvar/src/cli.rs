use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use qvar_core::calibration::ParamOverrides;
use qvar_core::simulation::StrategyMode;
use qvar_core::SimConfig;

use crate::config::{self, SweepAxis};
use crate::error::{CliError, Result};
use crate::io::{self, sha256_hex};
use crate::manifest::{
    self, CalibrateSpec, Manifest, RunSpec, SimulateSpec, SolveSpec, SweepSpec,
};
use crate::run;

#[derive(Debug, Parser)]
#[command(name = "qvar", version, about = "Quantile-constrained optimal investment")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate densities, drift and threshold from a price history.
    Calibrate(CalibrateArgs),
    /// Tabulate the optimal strategy over a time grid.
    Solve(SolveArgs),
    /// Simulate an ensemble of wealth paths.
    Simulate(SimulateArgs),
    /// Simulate once per value of one parameter.
    Sweep(SweepArgs),
    /// Repeat the run recorded in a manifest and compare artifact hashes.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct ParamArgs {
    /// JSON parameter file; may set any subset of the fields.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Override one parameter, e.g. `--set r=0.0004`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = config::parse_assignment)]
    pub sets: Vec<(String, f64)>,
}

impl ParamArgs {
    fn overrides(&self) -> Result<ParamOverrides> {
        let file = self.params.as_deref().map(io::load_overrides).transpose()?;
        Ok(config::layered(file, &self.sets))
    }

    // file and flags only, without the defaults
    fn explicit(&self) -> Result<ParamOverrides> {
        let file = self.params.as_deref().map(io::load_overrides).transpose()?;
        Ok(config::apply_sets(file.unwrap_or_default(), &self.sets))
    }
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long, default_value_t = 795)]
    pub steps: usize,
    #[arg(long, default_value_t = 1.0)]
    pub dt: f64,
    #[arg(long, default_value_t = 200)]
    pub paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `approx`, `full` (root search with fallback) or `const:<pi>`.
    #[arg(long, default_value = "approx", value_parser = config::parse_mode)]
    pub mode: StrategyMode,
    #[arg(long, default_value_t = 1.0)]
    pub l1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub l2: f64,
    /// Band half-width in standard deviations.
    #[arg(long, default_value_t = 1.96)]
    pub z: f64,
}

impl SimArgs {
    fn config(&self) -> SimConfig {
        SimConfig {
            n_steps: self.steps,
            dt: self.dt,
            n_paths: self.paths,
            seed: self.seed,
            initial_l1: self.l1,
            initial_l2: self.l2,
            strategy_mode: self.mode,
            z: self.z,
        }
    }
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// CSV with `date` and `close` columns.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Kernel bandwidth; defaults to the rule of thumb.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// `t1,t2,...` or `start:stop:step`; defaults to every integer in [0, T].
    #[arg(long, value_parser = config::parse_times)]
    pub times: Option<config::TimeGrid>,
    #[arg(long, default_value_t = 1.0)]
    pub l1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub l2: f64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    /// `name=v1,v2,...`
    #[arg(long, value_parser = config::parse_sweep)]
    pub sweep: SweepAxis,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// `manifest.json`, or a directory containing one.
    pub manifest: PathBuf,
    /// Fresh output directory for the repeated run.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn execute(cli: Cli) -> Result<()> {
    let (spec, out) = match cli.command {
        Command::Calibrate(a) => {
            let raw = fs::read(&a.data).map_err(|e| CliError::io(&a.data, e))?;
            let spec = CalibrateSpec {
                data: a.data,
                data_sha256: sha256_hex(&raw),
                overrides: a.params.explicit()?,
                bandwidth: a.bandwidth,
            };
            (RunSpec::Calibrate(spec), a.out)
        }
        Command::Solve(a) => {
            let params = config::complete(&a.params.overrides()?)?;
            let times = a.times.map(|g| g.0).unwrap_or_else(|| {
                (0..=params.horizon().floor() as usize).map(|t| t as f64).collect()
            });
            let spec = SolveSpec {
                params,
                times,
                l1: a.l1,
                l2: a.l2,
            };
            (RunSpec::Solve(spec), a.out)
        }
        Command::Simulate(a) => {
            let spec = SimulateSpec {
                params: config::complete(&a.params.overrides()?)?,
                sim: a.sim.config(),
            };
            (RunSpec::Simulate(spec), a.out)
        }
        Command::Sweep(a) => {
            let spec = SweepSpec {
                axis: a.sweep,
                params: config::complete(&a.params.overrides()?)?,
                sim: a.sim.config(),
            };
            (RunSpec::Sweep(spec), a.out)
        }
        Command::Replay(a) => {
            let path = if a.manifest.is_dir() {
                a.manifest.join(manifest::FILE_NAME)
            } else {
                a.manifest
            };
            let recorded = Manifest::load(&path)?;
            let differing = run::replay(&recorded, &a.out)?;
            if !differing.is_empty() {
                return Err(CliError::Data(format!(
                    "replay differs from {}: {}",
                    path.display(),
                    differing.join(", ")
                )));
            }
            println!(
                "reproduced {} in {}",
                artifacts(recorded.artifacts.len()),
                a.out.display()
            );
            return Ok(());
        }
    };
    let m = run::run(&spec, &out)?;
    println!("wrote {} to {}", artifacts(m.artifacts.len()), out.display());
    Ok(())
}

fn artifacts(n: usize) -> String {
    if n == 1 {
        "1 artifact".into()
    } else {
        format!("{n} artifacts")
    }
}
