use std::time::Instant;

use rayon::prelude::*;

use super::convergence::{run_iterations, Budget};
use super::result::{Method, ValuationResult};
use crate::coalition::{sample_full_permutation, Coalition};
use crate::error::{Error, Result};
use crate::seed::SeedTree;
use crate::utility::{check_point, Evaluation, Utility};

/// Permutation-sampling Shapley estimate. Iteration `t` draws a permutation
/// of all players from `seeds.child("perm", t)`; each evaluated point's
/// predecessors form its coalition. When the utility's marginal is a plain
/// difference, the needed prefix utilities are evaluated once each and
/// shared between neighbouring points.
pub fn monte_carlo_shapley<U: Utility + ?Sized>(
    utility: &U,
    points: &[usize],
    budget: Budget,
    seeds: &SeedTree,
) -> Result<ValuationResult> {
    let start = Instant::now();
    let n = utility.n_players();
    if points.is_empty() {
        return Err(Error::Config("Monte Carlo needs at least one point".into()));
    }
    for &p in points {
        check_point(utility, p)?;
    }
    let prefix_reuse = utility.marginal_is_difference();
    let outcome = run_iterations(points.len(), budget, |t| {
        let perm = sample_full_permutation(&seeds.child("perm", t), n);
        let mut position = vec![0usize; n];
        for (pos, &j) in perm.iter().enumerate() {
            position[j] = pos;
        }
        let prefix = |len: usize| Coalition::new(perm[..len].to_vec());
        if prefix_reuse {
            let mut lengths: Vec<usize> = points.iter().flat_map(|&i| [position[i], position[i] + 1]).collect();
            lengths.sort_unstable();
            lengths.dedup();
            let evals: Vec<Evaluation> = lengths
                .par_iter()
                .map(|&len| utility.value(&prefix(len)?))
                .collect::<Result<_>>()?;
            let at = |len: usize| evals[lengths.binary_search(&len).expect("requested prefix")].value;
            let marginals = points.iter().map(|&i| at(position[i] + 1) - at(position[i])).collect();
            let cost = Evaluation {
                value: 0.0,
                trainings: evals.iter().map(|e| e.trainings).sum(),
                cache_hits: evals.iter().map(|e| e.cache_hits).sum(),
            };
            Ok((marginals, cost))
        } else {
            let evals: Vec<Evaluation> = points
                .par_iter()
                .map(|&i| utility.marginal(i, &prefix(position[i])?))
                .collect::<Result<_>>()?;
            let cost = Evaluation {
                value: 0.0,
                trainings: evals.iter().map(|e| e.trainings).sum(),
                cache_hits: evals.iter().map(|e| e.cache_hits).sum(),
            };
            Ok((evals.iter().map(|e| e.value).collect(), cost))
        }
    })?;
    let t = outcome.iterations.max(1) as f64;
    let values = outcome.sums.iter().map(|s| s.total() / t).collect();
    let mut r = ValuationResult::new(Method::MonteCarlo, seeds.master_seed(), n, points.to_vec(), values);
    r.trainings_performed = outcome.cost.trainings;
    r.cache_hits = outcome.cost.cache_hits;
    r.iterations = Some(outcome.iterations);
    r.converged = outcome.converged;
    r.convergence_trace = outcome.trace;
    r.wall_time_s = start.elapsed().as_secs_f64();
    Ok(r)
}
