use std::time::Instant;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::convergence::{run_iterations, Budget};
use super::layer::{layer_exhaustive, measure, summarize, MarginalMode};
use super::result::{LayerEstimate, Method, ValuationResult};
use super::semivalue::SemiValueSpec;
use crate::coalition::sample_coalition;
use crate::error::{Error, Result};
use crate::seed::SeedTree;
use crate::summation::NeumaierSum;
use crate::utility::{check_point, Evaluation, Utility};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaConfig {
    pub spec: SemiValueSpec,
    pub budget: Budget,
    #[serde(default)]
    pub mode: MarginalMode,
}

fn check_spec(spec: &SemiValueSpec, n: usize) -> Result<()> {
    if spec.n() != n {
        return Err(Error::Config(format!("semi-value spec covers {} layers for {n} points", spec.n())));
    }
    spec.validate()?;
    let support = spec.support();
    let (lo, hi) = (support[0], *support.last().expect("validated spec has support"));
    if lo < 1 || hi + 1 > n {
        return Err(Error::InvalidBand { lower: lo, upper: hi, n });
    }
    Ok(())
}

/// δ-Shapley: `Σ_s p_s φ_i^s` over the band. Each iteration `t` draws one
/// layer `s ~ p` from `seeds.child("iter", t).child("layer", 0)` and, for
/// every point `i`, one size-`s` coalition from
/// `seeds.child("iter", t).child("point", i)`; the estimate is the running
/// mean of the marginals.
pub fn delta_shapley<U: Utility + ?Sized>(
    utility: &U,
    points: &[usize],
    config: &DeltaConfig,
    seeds: &SeedTree,
) -> Result<ValuationResult> {
    let start = Instant::now();
    let n = utility.n_players();
    check_spec(&config.spec, n)?;
    for &p in points {
        check_point(utility, p)?;
    }
    let mut result = if config.budget == Budget::Exhaustive {
        exhaustive(utility, points, config, seeds)?
    } else {
        sampled(utility, points, config, seeds)?
    };
    result.band = config.spec.band;
    result.wall_time_s = start.elapsed().as_secs_f64();
    Ok(result)
}

fn sampled<U: Utility + ?Sized>(
    utility: &U,
    points: &[usize],
    config: &DeltaConfig,
    seeds: &SeedTree,
) -> Result<ValuationResult> {
    let n = utility.n_players();
    let layers = WeightedIndex::new(&config.spec.probabilities)
        .map_err(|e| Error::Config(format!("layer probabilities: {e}")))?;
    let mut per_layer: Vec<Vec<Vec<Evaluation>>> = vec![vec![Vec::new(); n]; points.len()];
    let outcome = run_iterations(points.len(), config.budget, |t| {
        let iter = seeds.child("iter", t);
        let k = layers.sample(&mut iter.child("layer", 0).rng());
        let marginals: Vec<Evaluation> = points
            .par_iter()
            .map(|&i| {
                let draw = iter.child("point", i as u64);
                let s = sample_coalition(&draw, n, k, i)?;
                measure(utility, i, &s, config.mode, &draw)
            })
            .collect::<Result<_>>()?;
        let mut cost = Evaluation::default();
        for (slot, e) in marginals.iter().enumerate() {
            cost.trainings += e.trainings;
            cost.cache_hits += e.cache_hits;
            per_layer[slot][k].push(*e);
        }
        Ok((marginals.iter().map(|e| e.value).collect(), cost))
    })?;
    let t = outcome.iterations.max(1) as f64;
    let values = outcome.sums.iter().map(|s| s.total() / t).collect();
    let mut r = ValuationResult::new(Method::Delta, seeds.master_seed(), n, points.to_vec(), values);
    r.layers = points
        .iter()
        .zip(&per_layer)
        .flat_map(|(&i, rows)| {
            rows.iter()
                .enumerate()
                .filter(|(_, ms)| !ms.is_empty())
                .map(move |(k, ms)| summarize(i, k, ms).0)
        })
        .collect();
    r.trainings_performed = outcome.cost.trainings;
    r.cache_hits = outcome.cost.cache_hits;
    r.iterations = Some(outcome.iterations);
    r.converged = outcome.converged;
    r.convergence_trace = outcome.trace;
    Ok(r)
}

fn exhaustive<U: Utility + ?Sized>(
    utility: &U,
    points: &[usize],
    config: &DeltaConfig,
    seeds: &SeedTree,
) -> Result<ValuationResult> {
    let n = utility.n_players();
    let support = config.spec.support();
    let tasks: Vec<(usize, usize)> = points.iter().flat_map(|&i| support.iter().map(move |&k| (i, k))).collect();
    let outcomes: Vec<(LayerEstimate, Evaluation)> = tasks
        .par_iter()
        .map(|&(i, k)| {
            let s = seeds.child("point", i as u64).child("layer", k as u64);
            layer_exhaustive(utility, i, k, config.mode, &s)
        })
        .collect::<Result<_>>()?;
    let mut sums = vec![NeumaierSum::new(); points.len()];
    let mut cost = Evaluation::default();
    for (est, c) in &outcomes {
        let slot = points.iter().position(|&p| p == est.point).expect("task point");
        sums[slot].add(config.spec.probabilities[est.layer] * est.mean_contribution);
        cost.trainings += c.trainings;
        cost.cache_hits += c.cache_hits;
    }
    let values = sums.iter().map(NeumaierSum::total).collect();
    let mut r = ValuationResult::new(Method::Delta, seeds.master_seed(), n, points.to_vec(), values);
    r.layers = outcomes.into_iter().map(|(e, _)| e).collect();
    r.trainings_performed = cost.trainings;
    r.cache_hits = cost.cache_hits;
    Ok(r)
}
