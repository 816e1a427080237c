//! TOML run configuration: one file describes the dataset, the training
//! setup and the valuation method; command-line flags override it.

use std::path::{Path, PathBuf};

use dshap::dataset::{load_csv, synth_dataset, SynthKind, SynthSpec};
use dshap::estimators::{
    band_presets, AccuracyTarget, BandPreset, Budget, ConvergenceRule, MarginalMode, Method, SampleRule,
    SemiValueSpec, StratifiedConfig, MAX_EXACT_PLAYERS,
};
use dshap::evaluation::Direction;
use dshap::models::{Activation, ModelParams, Regime, Schedule, StepBudget, TrainConfig};
use dshap::{Dataset, Error, Result, SeedTree};
use serde::{Deserialize, Serialize};

pub const DEFAULT_LAYER_CAP: u64 = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub method: MethodConfig,
    #[serde(default)]
    pub profile: ProfileConfig,
    #[serde(default)]
    pub removal: RemovalConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    Csv,
    Synthetic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub source: DataSource,
    pub path: Option<PathBuf>,
    pub label_column: Option<String>,
    #[serde(default = "default_eval_fraction")]
    pub eval_fraction: f64,
    pub kind: Option<SynthKind>,
    pub n_train: Option<usize>,
    pub n_eval: Option<usize>,
    pub dim: Option<usize>,
    pub separation: Option<f64>,
    #[serde(default)]
    pub label_noise: f64,
}

fn default_eval_fraction() -> f64 {
    0.25
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    Decaying,
    Constant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub regime: Regime,
    pub lambda: f64,
    pub epochs: Option<u32>,
    pub steps: Option<u64>,
    pub hidden: usize,
    pub activation: Activation,
    pub schedule: ScheduleKind,
    pub rate: Option<f64>,
    pub fit_intercept: bool,
    pub loss_bound: Option<f64>,
    pub lipschitz: Option<f64>,
    pub smoothness: Option<f64>,
    pub step_scale: Option<f64>,
    pub kernel_bound: Option<f64>,
    pub warm_start: Option<PathBuf>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            regime: Regime::StronglyConvex,
            lambda: 0.1,
            epochs: None,
            steps: None,
            hidden: 8,
            activation: Activation::Softplus,
            schedule: ScheduleKind::Decaying,
            rate: None,
            fit_intercept: true,
            loss_bound: None,
            lipschitz: None,
            smoothness: None,
            step_scale: None,
            kernel_bound: None,
            warm_start: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleKind {
    Auto,
    StronglyConvex,
    ConvexSgd,
    NonconvexSgd,
    Hoeffding,
    Fixed,
    Exhaustive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BudgetKind {
    Convergence,
    Iterations,
    Exhaustive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeKind {
    FixedSubsequence,
    ExpectedUtility,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UtilityKind {
    Model,
    /// Closed-form additive game with unit contributions, for checking the
    /// pipeline without training.
    Additive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MethodConfig {
    pub name: Method,
    pub a: f64,
    pub b: f64,
    pub rule: RuleKind,
    pub samples: Option<u64>,
    pub range: Option<f64>,
    pub layer_cap: Option<u64>,
    pub band: Option<BandPreset>,
    pub band_lower: Option<usize>,
    pub band_upper: Option<usize>,
    pub budget: BudgetKind,
    pub iterations: Option<u64>,
    pub max_iterations: Option<u64>,
    pub threshold: f64,
    pub window: u64,
    pub mode: ModeKind,
    pub h: Option<u64>,
    pub points: Option<Vec<usize>>,
    pub cache: bool,
    pub utility: UtilityKind,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            name: Method::MonteCarlo,
            a: 0.1,
            b: 0.1,
            rule: RuleKind::Auto,
            samples: None,
            range: None,
            layer_cap: None,
            band: None,
            band_lower: None,
            band_upper: None,
            budget: BudgetKind::Convergence,
            iterations: None,
            max_iterations: None,
            threshold: 0.05,
            window: 100,
            mode: ModeKind::FixedSubsequence,
            h: None,
            points: None,
            cache: true,
            utility: UtilityKind::Model,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileConfig {
    pub layers: Vec<usize>,
    pub samples: usize,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            layers: vec![5, 10, 20],
            samples: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RemovalConfig {
    pub directions: Vec<Direction>,
    pub step: f64,
}

impl Default for RemovalConfig {
    fn default() -> Self {
        Self {
            directions: Direction::ALL.to_vec(),
            step: 0.1,
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_err(e.to_string().trim().replace('\n', " ")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn root_seeds(&self) -> SeedTree {
        SeedTree::new(self.seed)
    }

    pub fn synth_spec(&self) -> Result<SynthSpec> {
        let d = &self.dataset;
        let need = |v: Option<usize>, name: &str| v.ok_or_else(|| config_err(format!("dataset.{name} is required")));
        Ok(SynthSpec {
            kind: d.kind.ok_or_else(|| config_err("dataset.kind is required for synthetic data"))?,
            n_train: need(d.n_train, "n_train")?,
            n_eval: need(d.n_eval, "n_eval")?,
            dim: need(d.dim, "dim")?,
            separation: d.separation.ok_or_else(|| config_err("dataset.separation is required"))?,
            label_noise: d.label_noise,
        })
    }

    /// Checks everything that can be checked without loading data.
    pub fn validate(&self) -> Result<()> {
        match self.dataset.source {
            DataSource::Csv => {
                if self.dataset.path.is_none() || self.dataset.label_column.is_none() {
                    return Err(config_err("csv datasets need dataset.path and dataset.label_column"));
                }
            }
            DataSource::Synthetic => {
                let spec = self.synth_spec()?;
                if spec.kind == SynthKind::TwoClassImages {
                    let side = (spec.dim as f64).sqrt().round() as usize;
                    if side * side != spec.dim {
                        return Err(config_err("two-class-images needs dataset.dim to be a perfect square"));
                    }
                }
            }
        }
        if self.workers == Some(0) {
            return Err(config_err("workers must be >= 1"));
        }
        let m = &self.model;
        if !(m.lambda > 0.0 && m.lambda.is_finite()) {
            return Err(config_err("model.lambda must be > 0"));
        }
        if m.epochs.is_some() && m.steps.is_some() {
            return Err(config_err("set at most one of model.epochs and model.steps"));
        }
        if m.schedule == ScheduleKind::Constant && m.rate.is_none() {
            return Err(config_err("constant schedule needs model.rate"));
        }
        let meth = &self.method;
        AccuracyTarget::new(meth.a, meth.b)?;
        if meth.mode == ModeKind::ExpectedUtility {
            if !m.regime.is_sgd() {
                return Err(config_err("expected-utility mode requires an SGD regime"));
            }
            if matches!(meth.name, Method::Exact | Method::MonteCarlo) {
                return Err(config_err("expected-utility mode applies to the stratified and delta methods"));
            }
            if meth.name == Method::Delta && meth.h.is_none() {
                return Err(config_err("delta with expected-utility mode needs method.h"));
            }
        }
        if meth.name == Method::Exact && meth.points.is_some() {
            return Err(config_err("exact values every point; drop method.points"));
        }
        if meth.h == Some(0) {
            return Err(config_err("method.h must be >= 1"));
        }
        if meth.name == Method::Delta {
            let explicit = meth.band_lower.is_some() || meth.band_upper.is_some();
            if explicit && (meth.band_lower.is_none() || meth.band_upper.is_none()) {
                return Err(config_err("set both method.band_lower and method.band_upper"));
            }
            if explicit == meth.band.is_some() {
                return Err(config_err("delta needs exactly one of method.band or method.band_lower/band_upper"));
            }
        }
        if meth.budget == BudgetKind::Iterations && meth.iterations.is_none() {
            return Err(config_err("iterations budget needs method.iterations"));
        }
        if meth.budget == BudgetKind::Exhaustive && meth.name == Method::MonteCarlo {
            return Err(config_err("the Monte Carlo method has no exhaustive budget"));
        }
        if self.removal.directions.is_empty() {
            return Err(config_err("removal.directions is empty"));
        }
        if !(self.removal.step > 0.0 && self.removal.step <= 0.5) {
            return Err(config_err("removal.step must lie in (0, 0.5]"));
        }
        Ok(())
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        let seeds = self.root_seeds().child("data", 0);
        match self.dataset.source {
            DataSource::Csv => load_csv(
                self.dataset.path.as_deref().expect("validated"),
                self.dataset.label_column.as_deref().expect("validated"),
                self.dataset.eval_fraction,
                &seeds,
            ),
            DataSource::Synthetic => synth_dataset(&self.synth_spec()?, &seeds),
        }
    }

    pub fn train_config(&self, data: &Dataset) -> Result<TrainConfig> {
        let m = &self.model;
        let mut cfg = match m.regime {
            Regime::StronglyConvex => TrainConfig::strongly_convex(m.lambda),
            Regime::ConvexSgd => TrainConfig::convex_sgd(m.lambda, 1),
            Regime::NonconvexSgd => TrainConfig::nonconvex_sgd(m.hidden, m.activation, m.lambda, 1),
        };
        cfg.fit_intercept = m.fit_intercept;
        cfg.steps = match (m.epochs, m.steps) {
            (_, Some(steps)) => StepBudget::Steps { steps },
            (Some(epochs), None) => StepBudget::Epochs { epochs },
            (None, None) => StepBudget::Epochs { epochs: 5 },
        };
        cfg.schedule = match m.schedule {
            ScheduleKind::Decaying => Schedule::Decaying,
            ScheduleKind::Constant => Schedule::Constant {
                rate: m.rate.expect("validated"),
            },
        };
        if let Some(path) = &m.warm_start {
            let bytes = std::fs::read(path).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => Error::FileNotFound(path.clone()),
                _ => Error::Io(e),
            })?;
            cfg.warm_start = Some(ModelParams::from_json_slice(&bytes)?);
        }
        let mut cfg = cfg.calibrated(data);
        let c = &mut cfg.constants;
        if let Some(v) = m.loss_bound {
            c.loss_bound = v;
        }
        if let Some(v) = m.lipschitz {
            c.lipschitz = v;
        }
        if let Some(v) = m.smoothness {
            c.smoothness = v;
        }
        if let Some(v) = m.step_scale {
            c.step_scale = v;
        }
        if let Some(v) = m.kernel_bound {
            c.kernel_bound = v;
        }
        if let Some(w) = &cfg.warm_start {
            if w.architecture != cfg.architecture || w.n_features != data.n_features() || w.n_classes != data.n_classes() {
                return Err(config_err("warm start does not match the model and dataset shape"));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn points(&self, n: usize) -> Result<Vec<usize>> {
        match &self.method.points {
            None => Ok((0..n).collect()),
            Some(ps) => {
                if ps.is_empty() {
                    return Err(config_err("method.points is empty"));
                }
                if let Some(&p) = ps.iter().find(|&&p| p >= n) {
                    return Err(Error::IndexOutOfRange { index: p, n });
                }
                let mut sorted = ps.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != ps.len() {
                    return Err(config_err("method.points lists a point twice"));
                }
                Ok(ps.clone())
            }
        }
    }

    pub fn mode(&self) -> MarginalMode {
        match self.method.mode {
            ModeKind::FixedSubsequence => MarginalMode::FixedSubsequence,
            ModeKind::ExpectedUtility => MarginalMode::ExpectedUtility { h: self.method.h },
        }
    }

    pub fn budget(&self, n: usize) -> Budget {
        let m = &self.method;
        match m.budget {
            BudgetKind::Iterations => Budget::Iterations {
                iterations: m.iterations.expect("validated"),
            },
            BudgetKind::Exhaustive => Budget::Exhaustive,
            BudgetKind::Convergence => Budget::Convergence(ConvergenceRule {
                window: m.window,
                threshold: m.threshold,
                max_iterations: m.max_iterations.unwrap_or(ConvergenceRule::default_for(n).max_iterations),
            }),
        }
    }

    pub fn semivalue(&self, n: usize) -> Result<SemiValueSpec> {
        let m = &self.method;
        match (m.band, m.band_lower, m.band_upper) {
            (Some(preset), _, _) => band_presets(n, preset),
            (None, Some(lo), Some(hi)) => SemiValueSpec::banded(n, lo, hi),
            _ => Err(config_err("delta needs a band")),
        }
    }

    pub fn stratified(&self, train: &TrainConfig) -> Result<StratifiedConfig> {
        let m = &self.method;
        let rule = match m.rule {
            RuleKind::Auto => match train.regime {
                Regime::StronglyConvex => SampleRule::StronglyConvex,
                Regime::ConvexSgd => SampleRule::ConvexSgd,
                Regime::NonconvexSgd => SampleRule::NonconvexSgd,
            },
            RuleKind::StronglyConvex => SampleRule::StronglyConvex,
            RuleKind::ConvexSgd => SampleRule::ConvexSgd,
            RuleKind::NonconvexSgd => SampleRule::NonconvexSgd,
            RuleKind::Hoeffding => SampleRule::Hoeffding {
                range: m.range.ok_or_else(|| config_err("hoeffding rule needs method.range"))?,
            },
            RuleKind::Fixed => SampleRule::Fixed {
                samples: m.samples.ok_or_else(|| config_err("fixed rule needs method.samples"))?,
            },
            RuleKind::Exhaustive => SampleRule::Exhaustive,
        };
        let mut cfg = StratifiedConfig::new(AccuracyTarget::new(m.a, m.b)?, rule);
        cfg.mode = self.mode();
        cfg.layer_cap = Some(m.layer_cap.unwrap_or(DEFAULT_LAYER_CAP));
        cfg.constants = Some(train.constants);
        Ok(cfg)
    }

    /// Checks that need the number of training points.
    pub fn validate_for(&self, n: usize) -> Result<()> {
        self.points(n)?;
        let m = &self.method;
        let enumerates = m.name == Method::Exact
            || (m.name == Method::Stratified && m.rule == RuleKind::Exhaustive)
            || (m.name == Method::Delta && m.budget == BudgetKind::Exhaustive);
        if enumerates && n > MAX_EXACT_PLAYERS {
            return Err(Error::EnumerationGuard {
                n,
                max: MAX_EXACT_PLAYERS,
            });
        }
        if m.name == Method::Delta {
            self.semivalue(n)?;
        }
        Ok(())
    }
}
