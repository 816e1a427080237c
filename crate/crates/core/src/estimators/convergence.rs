use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::result::ConvergencePoint;
use crate::error::{Error, Result};
use crate::summation::NeumaierSum;
use crate::utility::Evaluation;

/// Stop once the mean relative change of the running estimates over the
/// last `window` iterations falls below `threshold`, or at `max_iterations`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRule {
    pub window: u64,
    pub threshold: f64,
    pub max_iterations: u64,
}

impl ConvergenceRule {
    /// Window 100, threshold 0.05, cap `25 n`.
    pub fn default_for(n: usize) -> Self {
        Self {
            window: 100,
            threshold: 0.05,
            max_iterations: 25 * n as u64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.max_iterations == 0 || self.threshold.is_nan() || self.threshold <= 0.0 {
            return Err(Error::Config("convergence rule needs window, cap and threshold > 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Budget {
    Iterations { iterations: u64 },
    Convergence(ConvergenceRule),
    /// Enumerate every coalition of every layer in the support.
    Exhaustive,
}

/// `(1/|P|) Σ_i |φ_i^t − φ_i^{t−w}| / |φ_i^t|`, where points with
/// `|φ_i^t| < 1e-9` contribute 0.
pub fn relative_deviation(current: &[f64], previous: &[f64]) -> f64 {
    let mut total = NeumaierSum::new();
    for (c, p) in current.iter().zip(previous) {
        if c.abs() >= 1e-9 {
            total.add((c - p).abs() / c.abs());
        }
    }
    total.total() / current.len().max(1) as f64
}

/// Keeps the last `window` snapshots of the running estimates.
#[derive(Clone, Debug)]
pub struct ConvergenceMonitor {
    window: usize,
    history: VecDeque<Vec<f64>>,
}

impl ConvergenceMonitor {
    pub fn new(window: u64) -> Self {
        Self {
            window: window as usize,
            history: VecDeque::with_capacity(window as usize + 1),
        }
    }

    /// Records the estimates after an iteration; once more than `window`
    /// iterations have been seen, returns the deviation from the snapshot
    /// `window` iterations earlier.
    pub fn observe(&mut self, estimates: &[f64]) -> Option<f64> {
        self.history.push_back(estimates.to_vec());
        if self.history.len() <= self.window {
            return None;
        }
        let old = self.history.pop_front().expect("non-empty");
        Some(relative_deviation(estimates, &old))
    }
}

pub(crate) struct IterationOutcome {
    pub sums: Vec<NeumaierSum>,
    pub iterations: u64,
    pub converged: Option<bool>,
    pub trace: Vec<ConvergencePoint>,
    pub cost: Evaluation,
}

/// Drives a running-mean estimator. `step(t)` returns one marginal per
/// point for iteration `t` (1-based).
pub(crate) fn run_iterations<F>(n_points: usize, budget: Budget, mut step: F) -> Result<IterationOutcome>
where
    F: FnMut(u64) -> Result<(Vec<f64>, Evaluation)>,
{
    let (cap, rule) = match budget {
        Budget::Iterations { iterations } => (iterations, None),
        Budget::Convergence(rule) => {
            rule.validate()?;
            (rule.max_iterations, Some(rule))
        }
        Budget::Exhaustive => return Err(Error::Config("exhaustive budget is not iterative".into())),
    };
    let mut sums = vec![NeumaierSum::new(); n_points];
    let mut monitor = rule.map(|r| ConvergenceMonitor::new(r.window));
    let mut trace = Vec::new();
    let mut cost = Evaluation::default();
    let mut converged = rule.map(|_| false);
    let mut t = 0;
    while t < cap {
        t += 1;
        let (marginals, c) = step(t)?;
        cost.trainings += c.trainings;
        cost.cache_hits += c.cache_hits;
        for (s, m) in sums.iter_mut().zip(marginals) {
            s.add(m);
        }
        if let (Some(monitor), Some(rule)) = (monitor.as_mut(), rule) {
            let estimates: Vec<f64> = sums.iter().map(|s| s.total() / t as f64).collect();
            if let Some(deviation) = monitor.observe(&estimates) {
                trace.push(ConvergencePoint { iteration: t, deviation });
                if deviation < rule.threshold {
                    converged = Some(true);
                    break;
                }
            }
        }
    }
    Ok(IterationOutcome {
        sums,
        iterations: t,
        converged,
        trace,
        cost,
    })
}
