//! Per-layer sample sizes from the stability bounds.
//!
//! Every `m_k` targets an `(a, b/n)` guarantee for one layer so that the
//! union bound over the `n` layers gives `(a, b)` for the average.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::LossConstants;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTarget {
    pub a: f64,
    pub b: f64,
}

impl AccuracyTarget {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        let t = Self { a, b };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::Config(format!("accuracy a must be > 0, got {}", self.a)));
        }
        if !(self.b > 0.0 && self.b < 1.0) {
            return Err(Error::Config(format!("failure probability b must lie in (0, 1), got {}", self.b)));
        }
        Ok(())
    }

    /// `ln(2n / b)`.
    fn log_term(&self, n: usize) -> f64 {
        (2.0 * n as f64 / self.b).ln()
    }
}

fn ceil_at_least_one(x: f64) -> u64 {
    if x.is_nan() {
        return 1;
    }
    let c = x.ceil();
    if c >= u64::MAX as f64 {
        u64::MAX
    } else {
        (c as u64).max(1)
    }
}

/// `⌈L⁴C⁴ / (8λ²a²k²) · ln(2n/b)⌉`, zero for `k = 0`.
pub fn mk_strongly_convex(k: usize, n: usize, target: &AccuracyTarget, c: &LossConstants) -> u64 {
    if k == 0 {
        return 0;
    }
    let lc2 = (c.lipschitz * c.kernel_bound).powi(2);
    let k = k as f64;
    ceil_at_least_one(lc2 * lc2 / (8.0 * c.lambda.powi(2) * target.a.powi(2) * k * k) * target.log_term(n))
}

/// Expected uniform stability of convex SGD on a size-`k` coalition with
/// the largest admissible steps `α_t = 2/β`: `ε = 4TL² / (βk)`.
pub fn epsilon_convex(k: usize, c: &LossConstants) -> f64 {
    4.0 * c.steps * c.lipschitz.powi(2) / (c.smoothness * k as f64)
}

/// `⌈(32T²L⁴/(β²k²) + 8GTL²/(kβ) + 4Ga/3) / a² · ln(2n/b)⌉`, zero for `k = 0`.
pub fn mk_convex_sgd(k: usize, n: usize, target: &AccuracyTarget, c: &LossConstants) -> u64 {
    if k == 0 {
        return 0;
    }
    let (t, l2, beta, g, a) = (c.steps, c.lipschitz.powi(2), c.smoothness, c.loss_bound, target.a);
    let k = k as f64;
    let numerator = 32.0 * t * t * l2 * l2 / (beta * beta * k * k) + 8.0 * g * t * l2 / (k * beta) + 4.0 * g * a / 3.0;
    ceil_at_least_one(numerator / (a * a) * target.log_term(n))
}

/// `Ĥ_k = G^{q/(q+1)} (2cL²)^{1/(q+1)} T^{q/(q+1)} (1 + 1/(βc)) / (k − 1)`
/// with `q = βc`; `None` for `k < 2`.
pub fn h_hat(k: usize, c: &LossConstants) -> Option<f64> {
    if k < 2 {
        return None;
    }
    let q = c.smoothness * c.step_scale;
    let e = q / (q + 1.0);
    let value = c.loss_bound.powf(e)
        * (2.0 * c.step_scale * c.lipschitz.powi(2)).powf(1.0 / (q + 1.0))
        * c.steps.powf(e)
        * (1.0 + 1.0 / q)
        / (k - 1) as f64;
    Some(value)
}

/// `⌈2 ln(2n/b) (2Ĥ_k² + 2GĤ_k + 4Ga/3) / a²⌉`, zero for `k < 2`.
pub fn mk_nonconvex_sgd(k: usize, n: usize, target: &AccuracyTarget, c: &LossConstants) -> u64 {
    let Some(h) = h_hat(k, c) else {
        return 0;
    };
    let (g, a) = (c.loss_bound, target.a);
    ceil_at_least_one(2.0 * target.log_term(n) * (2.0 * h * h + 2.0 * g * h + 4.0 * g * a / 3.0) / (a * a))
}

/// Number of sampled orders for the expected-utility marginal:
/// `⌈8(ε² + εG + Ga/3) / a² · ln(4n m_k / b)⌉`, at least 1.
pub fn h_permutations(epsilon: f64, c: &LossConstants, target: &AccuracyTarget, n: usize, m_k: u64) -> u64 {
    let (g, a) = (c.loss_bound, target.a);
    let log = (4.0 * n as f64 * m_k.max(1) as f64 / target.b).ln();
    ceil_at_least_one(8.0 * (epsilon * epsilon + epsilon * g + g * a / 3.0) / (a * a) * log)
}

/// Hoeffding count for marginals confined to an interval of width `range`:
/// `⌈range² / (2a²) · ln(2n/b)⌉`.
pub fn mk_hoeffding(range: f64, n: usize, target: &AccuracyTarget) -> u64 {
    ceil_at_least_one(range * range / (2.0 * target.a * target.a) * target.log_term(n))
}
