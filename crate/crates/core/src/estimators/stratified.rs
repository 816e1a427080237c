use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::layer::{layer_estimate, layer_exhaustive, MarginalMode};
use super::result::{LayerEstimate, Method, ValuationResult};
use super::sample_size::{
    epsilon_convex, h_hat, h_permutations, mk_convex_sgd, mk_hoeffding, mk_nonconvex_sgd, mk_strongly_convex,
    AccuracyTarget,
};
use crate::error::{Error, Result};
use crate::models::LossConstants;
use crate::seed::SeedTree;
use crate::summation::NeumaierSum;
use crate::utility::{check_point, Evaluation, Utility};

/// Where each layer's `m_k` comes from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SampleRule {
    StronglyConvex,
    ConvexSgd,
    NonconvexSgd,
    /// Marginals known to lie in an interval of this width.
    Hoeffding { range: f64 },
    Fixed { samples: u64 },
    /// Every coalition of every layer.
    Exhaustive,
}

impl SampleRule {
    fn needs_constants(self) -> bool {
        matches!(self, SampleRule::StronglyConvex | SampleRule::ConvexSgd | SampleRule::NonconvexSgd)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StratifiedConfig {
    pub target: AccuracyTarget,
    pub rule: SampleRule,
    #[serde(default)]
    pub mode: MarginalMode,
    /// Upper limit on the samples actually drawn per layer.
    #[serde(default)]
    pub layer_cap: Option<u64>,
    #[serde(default)]
    pub constants: Option<LossConstants>,
}

impl StratifiedConfig {
    pub fn new(target: AccuracyTarget, rule: SampleRule) -> Self {
        Self {
            target,
            rule,
            mode: MarginalMode::FixedSubsequence,
            layer_cap: None,
            constants: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.target.validate()?;
        if self.rule.needs_constants() {
            match &self.constants {
                Some(c) => c.validate()?,
                None => {
                    return Err(Error::Config(format!("sample rule {:?} needs loss constants", self.rule)));
                }
            }
        }
        match self.rule {
            SampleRule::Hoeffding { range } if !(range > 0.0 && range.is_finite()) => {
                return Err(Error::Config("Hoeffding range must be finite and > 0".into()));
            }
            SampleRule::Fixed { samples: 0 } => return Err(Error::Config("fixed sample count must be >= 1".into())),
            _ => {}
        }
        if self.layer_cap == Some(0) {
            return Err(Error::Config("layer cap must be >= 1".into()));
        }
        Ok(())
    }

    /// Theoretical `m_k` for layer `k` (0 means the layer is skipped).
    /// `None` under the exhaustive rule.
    pub fn theoretical_samples(&self, k: usize, n: usize) -> Option<u64> {
        let c = self.constants.as_ref();
        let t = &self.target;
        Some(match self.rule {
            SampleRule::StronglyConvex => mk_strongly_convex(k, n, t, c?),
            SampleRule::ConvexSgd => mk_convex_sgd(k, n, t, c?),
            SampleRule::NonconvexSgd => mk_nonconvex_sgd(k, n, t, c?),
            SampleRule::Hoeffding { range } => mk_hoeffding(range, n, t),
            SampleRule::Fixed { samples } => samples,
            SampleRule::Exhaustive => return None,
        })
    }

    /// Orders per marginal in expected-utility mode.
    pub fn permutations(&self, k: usize, n: usize, m_k: u64) -> Result<Option<u64>> {
        let MarginalMode::ExpectedUtility { h } = self.mode else {
            return Ok(None);
        };
        if let Some(h) = h {
            return Ok(Some(h));
        }
        let c = self.constants.as_ref();
        let epsilon = match (self.rule, c) {
            (SampleRule::ConvexSgd, Some(c)) => epsilon_convex(k, c),
            (SampleRule::NonconvexSgd, Some(c)) => h_hat(k, c).unwrap_or(0.0),
            _ => {
                return Err(Error::Config(
                    "expected-utility mode derives h only for the SGD rules; set h explicitly".into(),
                ))
            }
        };
        Ok(Some(h_permutations(epsilon, c.expect("checked"), &self.target, n, m_k)))
    }
}

/// `φ̂_i = (1/n) Σ_k φ̂_i^k`, each layer estimated from its own `m_k` draws
/// at per-layer confidence `b/n`. Layers whose `m_k` is 0 contribute 0.
/// Layer `k` of point `i` draws from `seeds.child("point", i).child("layer", k)`.
pub fn stratified_shapley<U: Utility + ?Sized>(
    utility: &U,
    points: &[usize],
    config: &StratifiedConfig,
    seeds: &SeedTree,
) -> Result<ValuationResult> {
    let start = Instant::now();
    config.validate()?;
    let n = utility.n_players();
    for &p in points {
        check_point(utility, p)?;
    }
    let tasks: Vec<(usize, usize, u64, Option<u64>)> = points
        .iter()
        .flat_map(|&i| (0..n).map(move |k| (i, k)))
        .map(|(i, k)| {
            let theory = config.theoretical_samples(k, n);
            let m = match theory {
                Some(m) => config.layer_cap.map_or(m, |cap| m.min(cap)),
                None => 1,
            };
            (i, k, m, theory)
        })
        .filter(|&(_, _, m, _)| m > 0)
        .collect();
    let outcomes: Vec<(LayerEstimate, Evaluation)> = tasks
        .par_iter()
        .map(|&(i, k, m, theory)| {
            let h = config.permutations(k, n, m)?;
            let mode = match config.mode {
                MarginalMode::ExpectedUtility { .. } => MarginalMode::ExpectedUtility { h },
                other => other,
            };
            let s = seeds.child("point", i as u64).child("layer", k as u64);
            let (mut est, cost) = match theory {
                Some(_) => layer_estimate(utility, i, k, m, mode, &s)?,
                None => layer_exhaustive(utility, i, k, mode, &s)?,
            };
            est.theoretical_samples = theory;
            est.permutations = h;
            Ok((est, cost))
        })
        .collect::<Result<_>>()?;

    let mut sums = vec![NeumaierSum::new(); points.len()];
    let mut cost = Evaluation::default();
    let mut layers = Vec::with_capacity(outcomes.len());
    for (est, c) in outcomes {
        let slot = points.iter().position(|&p| p == est.point).expect("task point");
        sums[slot].add(est.mean_contribution);
        cost.trainings += c.trainings;
        cost.cache_hits += c.cache_hits;
        layers.push(est);
    }
    let values = sums.iter().map(|s| s.total() / n as f64).collect();
    let mut result = ValuationResult::new(Method::Stratified, seeds.master_seed(), n, points.to_vec(), values);
    result.layers = layers;
    result.trainings_performed = cost.trainings;
    result.cache_hits = cost.cache_hits;
    result.wall_time_s = start.elapsed().as_secs_f64();
    Ok(result)
}
