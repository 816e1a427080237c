use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::exact::MAX_EXACT_PLAYERS;
use super::result::LayerEstimate;
use crate::coalition::{sample_coalition, Coalition};
use crate::error::{Error, Result};
use crate::seed::SeedTree;
use crate::summation::{mean, sample_variance};
use crate::utility::{check_point, Evaluation, Utility};

/// How one marginal contribution is measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MarginalMode {
    /// One training per coalition along its fixed visit order.
    #[default]
    FixedSubsequence,
    /// Average over `h` sampled orders. `None` lets the stratified
    /// estimator derive `h` from the regime's bound.
    ExpectedUtility { h: Option<u64> },
}

pub(crate) fn measure<U: Utility + ?Sized>(
    utility: &U,
    point: usize,
    coalition: &Coalition,
    mode: MarginalMode,
    seeds: &SeedTree,
) -> Result<Evaluation> {
    match mode {
        MarginalMode::FixedSubsequence => utility.marginal(point, coalition),
        MarginalMode::ExpectedUtility { h: Some(h) } => {
            utility.expected_marginal(point, coalition, h as usize, &seeds.child("orders", 0))
        }
        MarginalMode::ExpectedUtility { h: None } => {
            Err(Error::Config("expected-utility mode needs an explicit number of orders h".into()))
        }
    }
}

pub(crate) fn summarize(point: usize, layer: usize, marginals: &[Evaluation]) -> (LayerEstimate, Evaluation) {
    let xs: Vec<f64> = marginals.iter().map(|e| e.value).collect();
    let trainings = marginals.iter().map(|e| e.trainings).sum();
    let cache_hits = marginals.iter().map(|e| e.cache_hits).sum();
    let m = mean(&xs);
    let estimate = LayerEstimate {
        point,
        layer,
        mean_contribution: m,
        samples_used: xs.len() as u64,
        contribution_variance: sample_variance(&xs),
        theoretical_samples: None,
        permutations: None,
        trainings,
    };
    (
        estimate,
        Evaluation {
            value: m,
            trainings,
            cache_hits,
        },
    )
}

/// Mean marginal of `point` over `m_k` coalitions drawn uniformly, with
/// replacement, from layer `k`. Draw `j` uses `seeds.child("draw", j)`.
pub fn layer_estimate<U: Utility + ?Sized>(
    utility: &U,
    point: usize,
    k: usize,
    m_k: u64,
    mode: MarginalMode,
    seeds: &SeedTree,
) -> Result<(LayerEstimate, Evaluation)> {
    check_point(utility, point)?;
    let n = utility.n_players();
    if k + 1 > n {
        return Err(Error::InvalidLayer { layer: k, n });
    }
    if m_k == 0 {
        return Err(Error::Config("a layer estimate needs at least one sample".into()));
    }
    let marginals: Vec<Evaluation> = (0..m_k)
        .into_par_iter()
        .map(|j| {
            let draw = seeds.child("draw", j);
            let s = sample_coalition(&draw, n, k, point)?;
            measure(utility, point, &s, mode, &draw)
        })
        .collect::<Result<_>>()?;
    Ok(summarize(point, k, &marginals))
}

/// Exact layer average over all `C(n-1, k)` coalitions.
pub fn layer_exhaustive<U: Utility + ?Sized>(
    utility: &U,
    point: usize,
    k: usize,
    mode: MarginalMode,
    seeds: &SeedTree,
) -> Result<(LayerEstimate, Evaluation)> {
    check_point(utility, point)?;
    let n = utility.n_players();
    if n > MAX_EXACT_PLAYERS {
        return Err(Error::EnumerationGuard {
            n,
            max: MAX_EXACT_PLAYERS,
        });
    }
    if k + 1 > n {
        return Err(Error::InvalidLayer { layer: k, n });
    }
    let coalitions: Vec<Vec<usize>> = (0..n).filter(|&j| j != point).combinations(k).collect();
    let marginals: Vec<Evaluation> = coalitions
        .into_par_iter()
        .enumerate()
        .map(|(j, members)| {
            let s = Coalition::new(members)?;
            measure(utility, point, &s, mode, &seeds.child("draw", j as u64))
        })
        .collect::<Result<_>>()?;
    Ok(summarize(point, k, &marginals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::AdditiveGame;

    #[test]
    fn additive_layers_are_exact() {
        let g = AdditiveGame::new(vec![0.5, -1.25, 3.0, 0.0, 2.0]);
        for k in 0..5 {
            let (e, cost) = layer_estimate(&g, 1, k, 7, MarginalMode::FixedSubsequence, &SeedTree::new(1)).unwrap();
            assert_eq!(e.mean_contribution, -1.25);
            assert_eq!(e.contribution_variance, 0.0);
            assert_eq!(e.samples_used, 7);
            assert_eq!(cost.trainings, 14);
        }
    }

    #[test]
    fn rejects_bad_layers() {
        let g = AdditiveGame::new(vec![0.0; 4]);
        assert!(matches!(
            layer_estimate(&g, 0, 4, 1, MarginalMode::FixedSubsequence, &SeedTree::new(0)),
            Err(Error::InvalidLayer { .. })
        ));
        assert!(layer_estimate(&g, 0, 1, 0, MarginalMode::FixedSubsequence, &SeedTree::new(0)).is_err());
        assert!(layer_estimate(&g, 9, 1, 1, MarginalMode::FixedSubsequence, &SeedTree::new(0)).is_err());
    }

    #[test]
    fn exhaustive_counts_the_layer() {
        let g = AdditiveGame::new(vec![1.0; 6]);
        let (e, _) = layer_exhaustive(&g, 2, 2, MarginalMode::FixedSubsequence, &SeedTree::new(0)).unwrap();
        assert_eq!(e.samples_used, 10);
    }
}
