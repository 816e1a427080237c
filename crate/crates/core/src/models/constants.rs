use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::dataset::Dataset;
use crate::error::{Error, Result};

const LIPSCHITZ_FLOOR: f64 = 1e-6;

/// Constants of the loss and optimizer that drive the sample-size bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossConstants {
    /// `L`: bound on the per-example gradient norm.
    pub lipschitz: f64,
    /// `β`: smoothness of the per-example regularized loss.
    pub smoothness: f64,
    /// `λ`: strong convexity, also the L2 penalty `λ/2 ‖θ‖²` used in training.
    pub lambda: f64,
    /// `G`: losses are clamped to `[0, G]`.
    pub loss_bound: f64,
    /// `c` in `α_t ≤ c / t`.
    pub step_scale: f64,
    /// `T`: total SGD steps assumed by the bounds.
    pub steps: f64,
    /// `C`: kernel bound.
    pub kernel_bound: f64,
}

impl LossConstants {
    pub const DEFAULT_LOSS_BOUND: f64 = 10.0 * std::f64::consts::LN_2;

    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lipschitz: 1.0,
            smoothness: 0.25 + lambda,
            lambda,
            loss_bound: Self::DEFAULT_LOSS_BOUND,
            step_scale: 1.0,
            steps: 1.0,
            kernel_bound: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("L", self.lipschitz),
            ("beta", self.smoothness),
            ("lambda", self.lambda),
            ("G", self.loss_bound),
            ("c", self.step_scale),
            ("T", self.steps),
            ("C", self.kernel_bound),
        ];
        for (name, v) in named {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("loss constant {name} must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Uniform-stability envelope `L²C² / (2λk)` for a coalition of size `k`.
    pub fn stability_envelope(&self, k: usize) -> f64 {
        let lc = self.lipschitz * self.kernel_bound;
        lc * lc / (2.0 * self.lambda * k as f64)
    }
}

/// Largest Euclidean norm among `rows`, each optionally augmented with a
/// constant intercept coordinate.
pub fn max_row_norm<'a>(rows: impl Iterator<Item = &'a [f64]>, intercept: bool) -> f64 {
    let extra = if intercept { 1.0 } else { 0.0 };
    rows.map(|r| (r.iter().map(|x| x * x).sum::<f64>() + extra).sqrt())
        .fold(0.0, f64::max)
}

/// Heuristic constants from the data.
///
/// `L` is the largest row norm over both splits (the row augmented with the
/// intercept coordinate when one is fitted, scaled by √2 for more than two
/// classes), which bounds the cross-entropy gradient of a linear model.
/// `β = L²/4 + λ` bounds the curvature of the regularized per-example loss.
/// `λ`, `G`, `c` and `C` are taken from `config`; `T` follows the step budget
/// at full dataset size. For the MLP these values are rough guides, not bounds.
pub fn estimate_constants(data: &Dataset, config: &TrainConfig) -> LossConstants {
    let mut l = max_row_norm(data.rows(), config.fit_intercept);
    if data.n_classes() > 2 {
        l *= std::f64::consts::SQRT_2;
    }
    let l = l.max(LIPSCHITZ_FLOOR);
    let base = config.constants;
    let steps = match config.regime {
        super::Regime::StronglyConvex => base.steps,
        _ => config.steps.total_steps(data.n_train()).max(1) as f64,
    };
    LossConstants {
        lipschitz: l,
        smoothness: l * l / 4.0 + base.lambda,
        steps,
        ..base
    }
}
