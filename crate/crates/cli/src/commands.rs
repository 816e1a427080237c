//! The five commands. Each returns the paths it wrote.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use dshap::dataset::DatasetSummary;
use dshap::estimators::{
    delta_shapley, exact_valuation, monte_carlo_shapley, read_values_csv, stratified_shapley, DeltaConfig, Method,
    ValuationResult,
};
use dshap::evaluation::{compare_methods, removal_curves, stability_profile, RemovalCurve, StabilityProfile};
use dshap::games::AdditiveGame;
use dshap::models::{ModelUtility, Regime, TrainConfig};
use dshap::{Dataset, Error, Result, Utility};
use serde::{Deserialize, Serialize};

use crate::config::{DataSource, RunConfig, UtilityKind};

pub const TOOL: &str = "dshap";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_time_s: f64,
    pub finished_unix_s: u64,
}

/// Provenance written next to every command's outputs. Only `timing`
/// differs between two runs of the same configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub dataset_hash: Option<String>,
    pub dataset: Option<DatasetSummary>,
    /// Resolved configuration as TOML; also written to `config.toml`.
    pub config: Option<String>,
    pub train_config: Option<TrainConfig>,
    pub band: Option<(usize, usize)>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub timing: Timing,
}

struct Writer {
    dir: PathBuf,
    written: Vec<String>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn file(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let mut w = BufWriter::new(File::create(self.dir.join(name))?);
        f(&mut w)?;
        w.flush()?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.file(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            w.write_all(b"\n")?;
            Ok(())
        })
    }

    fn config(&mut self, cfg: &RunConfig) -> Result<String> {
        let text = cfg.to_toml_string();
        self.file("config.toml", |w| Ok(w.write_all(text.as_bytes())?))?;
        Ok(text)
    }

    fn finish(mut self, mut manifest: Manifest, start: Instant) -> Result<Vec<PathBuf>> {
        manifest.outputs = self.written.clone();
        manifest.timing = Timing {
            wall_time_s: start.elapsed().as_secs_f64(),
            finished_unix_s: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        };
        self.json("manifest.json", &manifest)?;
        Ok(self.written.iter().map(|f| self.dir.join(f)).collect())
    }
}

fn manifest(command: &str, seed: u64, data: Option<&Dataset>) -> Manifest {
    Manifest {
        tool: TOOL.into(),
        version: VERSION.into(),
        command: command.into(),
        seed,
        dataset_hash: data.map(|d| d.content_hash()),
        dataset: data.map(|d| d.summary()),
        config: None,
        train_config: None,
        band: None,
        inputs: Vec::new(),
        outputs: Vec::new(),
        timing: Timing {
            wall_time_s: 0.0,
            finished_unix_s: 0,
        },
    }
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

/// Loads the data and resolves the training setup, checking everything that
/// can fail before any model is trained.
fn prepare(cfg: &RunConfig) -> Result<(Dataset, TrainConfig)> {
    cfg.validate()?;
    let data = cfg.load_dataset()?;
    cfg.validate_for(data.n_train())?;
    let train = cfg.train_config(&data)?;
    Ok((data, train))
}

fn utility<'a>(cfg: &RunConfig, data: &'a Dataset, train: &TrainConfig) -> Result<Box<dyn Utility + 'a>> {
    Ok(match cfg.method.utility {
        UtilityKind::Model => Box::new(ModelUtility::new(
            data,
            train.clone(),
            cfg.root_seeds().child("utility", 0),
            cfg.method.cache,
        )?),
        UtilityKind::Additive => Box::new(AdditiveGame::new(vec![1.0; data.n_train()])),
    })
}

pub fn valuation(cfg: &RunConfig, data: &Dataset, train: &TrainConfig) -> Result<ValuationResult> {
    let n = data.n_train();
    let u = utility(cfg, data, train)?;
    let points = cfg.points(n)?;
    let seeds = cfg.root_seeds().child("estimator", 0);
    let mut result = match cfg.method.name {
        Method::Exact => exact_valuation(u.as_ref(), cfg.seed)?,
        Method::MonteCarlo => monte_carlo_shapley(u.as_ref(), &points, cfg.budget(n), &seeds)?,
        Method::Stratified => stratified_shapley(u.as_ref(), &points, &cfg.stratified(train)?, &seeds)?,
        Method::Delta => {
            let dc = DeltaConfig {
                spec: cfg.semivalue(n)?,
                budget: cfg.budget(n),
                mode: cfg.mode(),
            };
            delta_shapley(u.as_ref(), &points, &dc, &seeds)?
        }
    };
    result.seed = cfg.seed;
    result.dataset_hash = Some(data.content_hash());
    Ok(result)
}

pub fn cmd_value(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let start = Instant::now();
    let (data, train) = prepare(cfg)?;
    let mut w = Writer::new(&out_dir(cfg))?;
    let result = valuation(cfg, &data, &train)?;
    w.file("values.csv", |f| result.write_values_csv(f))?;
    w.json("result.json", &result)?;
    let mut m = manifest("value", cfg.seed, Some(&data));
    m.config = Some(w.config(cfg)?);
    m.train_config = Some(train);
    m.band = result.band;
    w.finish(m, start)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileOutput {
    pub seed: u64,
    pub dataset_hash: String,
    pub utility: UtilityKind,
    pub profile: StabilityProfile,
    pub warnings: Vec<String>,
}

/// Messages for each place where the median |marginal| grows with `k`.
pub fn median_warnings(profile: &StabilityProfile) -> Vec<String> {
    let mut layers: Vec<_> = profile.layers.iter().collect();
    layers.sort_by_key(|l| l.layer);
    layers
        .windows(2)
        .filter(|w| w[1].median_abs > w[0].median_abs)
        .map(|w| {
            format!(
                "median |marginal| rises from {:.3e} at k={} to {:.3e} at k={}",
                w[0].median_abs, w[0].layer, w[1].median_abs, w[1].layer
            )
        })
        .collect()
}

pub fn cmd_profile(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let start = Instant::now();
    let (data, train) = prepare(cfg)?;
    let mut w = Writer::new(&out_dir(cfg))?;
    let u = utility(cfg, &data, &train)?;
    let profile = stability_profile(
        u.as_ref(),
        &cfg.profile.layers,
        cfg.profile.samples,
        &cfg.root_seeds().child("profile", 0),
    )?;
    let hash = data.content_hash();
    let warnings = if train.regime == Regime::StronglyConvex && cfg.method.utility == UtilityKind::Model {
        median_warnings(&profile)
    } else {
        Vec::new()
    };
    for msg in &warnings {
        eprintln!("warning: {msg}");
    }
    w.file("profile.csv", |f| profile.write_csv(f, cfg.seed, &hash))?;
    let out = ProfileOutput {
        seed: cfg.seed,
        dataset_hash: hash,
        utility: cfg.method.utility,
        profile,
        warnings,
    };
    w.json("profile.json", &out)?;
    let mut m = manifest("profile", cfg.seed, Some(&data));
    m.config = Some(w.config(cfg)?);
    m.train_config = Some(train);
    w.finish(m, start)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemovalOutput {
    pub seed: u64,
    pub dataset_hash: String,
    pub values_file: String,
    pub step: f64,
    pub curves: Vec<RemovalCurve>,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

/// Values for every training point, in point order, from a values file that
/// must have been computed on `data`.
pub fn load_values(path: &Path, data: &Dataset) -> Result<Vec<f64>> {
    let rows = read_values_csv(open(path)?)?;
    let n = data.n_train();
    let hash = data.content_hash();
    let mut values = vec![None; n];
    for r in rows {
        if r.dataset_hash != hash {
            return Err(Error::Alignment(format!(
                "values were computed on dataset {} but the configured dataset is {hash}",
                r.dataset_hash
            )));
        }
        let slot = values
            .get_mut(r.point)
            .ok_or_else(|| Error::Alignment(format!("point {} outside the {n} training points", r.point)))?;
        if slot.replace(r.value).is_some() {
            return Err(Error::Alignment(format!("point {} listed twice", r.point)));
        }
    }
    let missing = values.iter().filter(|v| v.is_none()).count();
    if missing > 0 {
        return Err(Error::Alignment(format!("{missing} of {n} training points have no value")));
    }
    Ok(values.into_iter().flatten().collect())
}

pub fn cmd_removal(cfg: &RunConfig, values_path: &Path) -> Result<Vec<PathBuf>> {
    let start = Instant::now();
    let (data, train) = prepare(cfg)?;
    if train.regime != Regime::StronglyConvex {
        return Err(Error::Config("removal curves retrain with the strongly convex regime".into()));
    }
    let values = load_values(values_path, &data)?;
    let mut w = Writer::new(&out_dir(cfg))?;
    let curves = removal_curves(
        &values,
        &data,
        &train,
        &cfg.removal.directions,
        cfg.removal.step,
        &cfg.root_seeds().child("removal", 0),
    )?;
    let hash = data.content_hash();
    for c in &curves {
        if c.truncated {
            eprintln!("warning: {} curve stopped early, a class ran out of points", c.direction.as_str());
        }
        w.file(&format!("removal_{}.csv", c.direction.as_str()), |f| c.write_csv(f, cfg.seed, &hash))?;
    }
    let out = RemovalOutput {
        seed: cfg.seed,
        dataset_hash: hash,
        values_file: values_path.display().to_string(),
        step: cfg.removal.step,
        curves,
    };
    w.json("removal.json", &out)?;
    let mut m = manifest("removal", cfg.seed, Some(&data));
    m.config = Some(w.config(cfg)?);
    m.train_config = Some(train);
    m.inputs = vec![values_path.display().to_string()];
    w.finish(m, start)
}

fn read_result(path: &Path) -> Result<ValuationResult> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    ValuationResult::from_json_slice(&bytes)
}

pub fn cmd_evaluate(reference: &Path, results: &[PathBuf], out: &Path) -> Result<Vec<PathBuf>> {
    let start = Instant::now();
    if results.is_empty() {
        return Err(Error::Config("evaluate needs at least one result besides the reference".into()));
    }
    let reference_result = read_result(reference)?;
    let others = results.iter().map(|p| read_result(p)).collect::<Result<Vec<_>>>()?;
    let report = compare_methods(&others, &reference_result)?;
    let mut w = Writer::new(out)?;
    w.file("comparison.csv", |f| report.write_csv(f))?;
    w.json("comparison.json", &report)?;
    let mut m = manifest("evaluate", reference_result.seed, None);
    m.dataset_hash = report.dataset_hash.clone();
    m.inputs = std::iter::once(reference)
        .chain(results.iter().map(PathBuf::as_path))
        .map(|p| p.display().to_string())
        .collect();
    w.finish(m, start)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthOutput {
    pub seed: u64,
    pub dataset_hash: String,
    pub spec: dshap::dataset::SynthSpec,
    pub summary: DatasetSummary,
}

pub fn cmd_synth(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let start = Instant::now();
    cfg.validate()?;
    if cfg.dataset.source != DataSource::Synthetic {
        return Err(Error::Config("synth needs dataset.source = \"synthetic\"".into()));
    }
    let data = cfg.load_dataset()?;
    let mut w = Writer::new(&out_dir(cfg))?;
    w.file("dataset.csv", |f| data.write_csv(f))?;
    let out = SynthOutput {
        seed: cfg.seed,
        dataset_hash: data.content_hash(),
        spec: cfg.synth_spec()?,
        summary: data.summary(),
    };
    w.json("dataset.json", &out)?;
    let mut m = manifest("synth", cfg.seed, Some(&data));
    m.config = Some(w.config(cfg)?);
    w.finish(m, start)
}
