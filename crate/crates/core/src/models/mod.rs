//! Training and utility evaluation: deterministic regularized logistic
//! regression, the fixed-order SGD engine, and the clamped test loss.

mod constants;
mod params;
mod train;
mod utility;

use serde::{Deserialize, Serialize};

pub use constants::{estimate_constants, max_row_norm, LossConstants};
pub use params::{sigmoid, Activation, Architecture, ModelParams, Scratch};
pub use train::{sgd_train, train_deterministic, DETERMINISTIC_MAX_ITERATIONS, GRADIENT_TOLERANCE};
pub use utility::{accuracy, expected_marginal, marginal_contribution, test_loss, utility, ModelUtility};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Full-batch gradient descent to the regularized minimizer.
    StronglyConvex,
    /// Fixed-order SGD on the convex logistic loss.
    ConvexSgd,
    /// Fixed-order SGD on a non-convex model.
    NonconvexSgd,
}

impl Regime {
    pub fn is_sgd(self) -> bool {
        !matches!(self, Regime::StronglyConvex)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepBudget {
    Steps { steps: u64 },
    /// Passes over the visit order; `T = epochs · |sequence|`.
    Epochs { epochs: u32 },
}

impl StepBudget {
    pub fn total_steps(self, sequence_len: usize) -> u64 {
        match self {
            StepBudget::Steps { steps } => steps,
            StepBudget::Epochs { epochs } => epochs as u64 * sequence_len as u64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Schedule {
    Constant { rate: f64 },
    /// `α_t = min(c / t, 2 / β)` with `c` and `β` from the loss constants.
    Decaying,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub regime: Regime,
    pub architecture: Architecture,
    pub constants: LossConstants,
    pub steps: StepBudget,
    pub schedule: Schedule,
    pub fit_intercept: bool,
    #[serde(default)]
    pub warm_start: Option<ModelParams>,
}

impl TrainConfig {
    /// L2-regularized logistic regression solved to tolerance. `L` and `β`
    /// are placeholders until [`TrainConfig::calibrated`] is applied.
    pub fn strongly_convex(lambda: f64) -> Self {
        Self {
            regime: Regime::StronglyConvex,
            architecture: Architecture::Logistic,
            constants: LossConstants::with_lambda(lambda),
            steps: StepBudget::Epochs { epochs: 1 },
            schedule: Schedule::Decaying,
            fit_intercept: true,
            warm_start: None,
        }
    }

    pub fn convex_sgd(lambda: f64, epochs: u32) -> Self {
        Self {
            regime: Regime::ConvexSgd,
            steps: StepBudget::Epochs { epochs },
            ..Self::strongly_convex(lambda)
        }
    }

    pub fn nonconvex_sgd(hidden: usize, activation: Activation, lambda: f64, epochs: u32) -> Self {
        Self {
            regime: Regime::NonconvexSgd,
            architecture: Architecture::Mlp { hidden, activation },
            steps: StepBudget::Epochs { epochs },
            ..Self::strongly_convex(lambda)
        }
    }

    /// Replaces `L`, `β` and `T` with estimates from the data.
    pub fn calibrated(mut self, data: &crate::dataset::Dataset) -> Self {
        self.constants = estimate_constants(data, &self);
        self
    }

    pub fn step_size(&self, t: u64) -> f64 {
        let c = &self.constants;
        let cap = 2.0 / c.smoothness;
        match self.schedule {
            Schedule::Constant { rate } => rate,
            Schedule::Decaying => (c.step_scale / t as f64).min(cap),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.constants.validate()?;
        match (self.regime, self.architecture) {
            (Regime::StronglyConvex | Regime::ConvexSgd, Architecture::Mlp { .. }) => {
                return Err(Error::Config(format!("{:?} regime requires the logistic architecture", self.regime)));
            }
            (_, Architecture::Mlp { hidden: 0, .. }) => {
                return Err(Error::Config("mlp needs at least one hidden unit".into()));
            }
            _ => {}
        }
        if let Architecture::Mlp { hidden, .. } = self.architecture {
            if hidden > 32 {
                return Err(Error::Config(format!("mlp hidden width {hidden} exceeds 32")));
            }
        }
        match (self.regime, self.schedule) {
            (Regime::NonconvexSgd, Schedule::Constant { .. }) => {
                return Err(Error::Config(
                    "non-convex SGD needs the decaying schedule (α_t ≤ c/t)".into(),
                ));
            }
            (Regime::ConvexSgd, Schedule::Constant { rate }) if !(rate > 0.0 && rate <= 2.0 / self.constants.smoothness) => {
                return Err(Error::Config(format!(
                    "constant rate {rate} violates 0 < α ≤ 2/β = {}",
                    2.0 / self.constants.smoothness
                )));
            }
            _ => {}
        }
        if let Some(w) = &self.warm_start {
            w.validate()?;
            if w.architecture != self.architecture {
                return Err(Error::Config("warm start architecture differs from the configured one".into()));
            }
        }
        Ok(())
    }
}
