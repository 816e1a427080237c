//! Argument parsing and dispatch.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use dshap::estimators::{BandPreset, Method};
use dshap::evaluation::Direction;
use dshap::{Error, Result};

use crate::commands;
use crate::config::RunConfig;
use crate::{classify, error_line, EXIT_CONFIG, EXIT_OK};

#[derive(Debug, Parser)]
#[command(name = "dshap", version, about = "Layer-stratified Shapley data valuation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, Default, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory (default: ./out).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate data values and write values.csv, result.json and manifest.json.
    Value {
        #[command(flatten)]
        common: Common,
        /// exact, mc, stratified or delta.
        #[arg(long)]
        method: Option<String>,
        /// Band preset (mid, low) or explicit bounds "lower,upper".
        #[arg(long)]
        band: Option<String>,
        /// Fixed iteration budget.
        #[arg(long)]
        iterations: Option<u64>,
    },
    /// Compare results against a reference: Spearman correlation and cost.
    Evaluate {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        results: Vec<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Marginal-contribution statistics per coalition size.
    Profile {
        #[command(flatten)]
        common: Common,
        /// Coalition sizes, e.g. "5,10,20".
        #[arg(long, value_delimiter = ',')]
        layers: Option<Vec<usize>>,
        #[arg(long)]
        samples: Option<usize>,
        /// Profile a constant additive game instead of the model.
        #[arg(long)]
        additive: bool,
    },
    /// Retrain after removing points by value and record test accuracy.
    Removal {
        #[command(flatten)]
        common: Common,
        /// values.csv from a previous `value` run.
        #[arg(long)]
        values: PathBuf,
        /// Any of highest-first, lowest-first, random.
        #[arg(long, value_delimiter = ',')]
        directions: Option<Vec<String>>,
        /// Fraction removed per step.
        #[arg(long)]
        step: Option<f64>,
    },
    /// Generate the configured synthetic dataset.
    Synth {
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common) -> Result<RunConfig> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if common.workers.is_some() {
        cfg.workers = common.workers;
    }
    if common.out.is_some() {
        cfg.out = common.out.clone();
    }
    Ok(cfg)
}

fn parse_band(cfg: &mut RunConfig, text: &str) -> Result<()> {
    let m = &mut cfg.method;
    match text {
        "mid" | "low" => {
            m.band = Some(if text == "mid" { BandPreset::Mid } else { BandPreset::Low });
            m.band_lower = None;
            m.band_upper = None;
        }
        _ => {
            let bad = || Error::Config(format!("--band expects mid, low or \"lower,upper\", got {text:?}"));
            let (lo, hi) = text.split_once(',').ok_or_else(bad)?;
            m.band = None;
            m.band_lower = Some(lo.trim().parse().map_err(|_| bad())?);
            m.band_upper = Some(hi.trim().parse().map_err(|_| bad())?);
        }
    }
    Ok(())
}

fn with_workers<T>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T>
where
    T: Send,
{
    match workers {
        None => f(),
        Some(0) => Err(Error::Config("--workers must be >= 1".into())),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {w} workers: {e}")))?
            .install(f),
    }
}

pub fn execute(cli: Cli) -> Result<Vec<PathBuf>> {
    match cli.command {
        Command::Value {
            common,
            method,
            band,
            iterations,
        } => {
            let mut cfg = load(&common)?;
            if let Some(m) = method {
                cfg.method.name = m.parse::<Method>()?;
            }
            if let Some(b) = band {
                parse_band(&mut cfg, &b)?;
            }
            if let Some(it) = iterations {
                cfg.method.budget = crate::config::BudgetKind::Iterations;
                cfg.method.iterations = Some(it);
            }
            cfg.validate()?;
            with_workers(cfg.workers, || commands::cmd_value(&cfg))
        }
        Command::Evaluate {
            reference,
            results,
            workers,
            out,
        } => {
            let out = out.unwrap_or_else(|| PathBuf::from("out"));
            with_workers(workers, || commands::cmd_evaluate(&reference, &results, &out))
        }
        Command::Profile {
            common,
            layers,
            samples,
            additive,
        } => {
            let mut cfg = load(&common)?;
            if let Some(l) = layers {
                cfg.profile.layers = l;
            }
            if let Some(s) = samples {
                cfg.profile.samples = s;
            }
            if additive {
                cfg.method.utility = crate::config::UtilityKind::Additive;
            }
            cfg.validate()?;
            with_workers(cfg.workers, || commands::cmd_profile(&cfg))
        }
        Command::Removal {
            common,
            values,
            directions,
            step,
        } => {
            let mut cfg = load(&common)?;
            if let Some(ds) = directions {
                cfg.removal.directions = ds.iter().map(|d| d.trim().parse::<Direction>()).collect::<Result<_>>()?;
            }
            if let Some(s) = step {
                cfg.removal.step = s;
            }
            cfg.validate()?;
            with_workers(cfg.workers, || commands::cmd_removal(&cfg, &values))
        }
        Command::Synth { common } => {
            let cfg = load(&common)?;
            with_workers(cfg.workers, || commands::cmd_synth(&cfg))
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    EXIT_OK
                }
                _ => {
                    let text = e.to_string();
                    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
                    let first = first.trim_start_matches("error: ");
                    eprintln!("error[usage]: {first}");
                    EXIT_CONFIG
                }
            };
        }
    };
    match execute(cli) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("{}", error_line(&e));
            classify(&e).1
        }
    }
}
