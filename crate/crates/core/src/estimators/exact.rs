use std::time::Instant;

use rayon::prelude::*;

use super::result::{Method, ValuationResult};
use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::summation::NeumaierSum;
use crate::utility::{Evaluation, Utility};

pub const MAX_EXACT_PLAYERS: usize = 20;

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// `v(S)` for every subset, indexed by membership bitmask.
pub fn utility_table<U: Utility + ?Sized>(utility: &U) -> Result<Vec<Evaluation>> {
    let n = utility.n_players();
    if n > MAX_EXACT_PLAYERS {
        return Err(Error::EnumerationGuard {
            n,
            max: MAX_EXACT_PLAYERS,
        });
    }
    (0..1u64 << n)
        .into_par_iter()
        .map(|mask| utility.value(&Coalition::from_mask(mask)))
        .collect()
}

fn shapley_from_table(table: &[Evaluation], n: usize) -> Vec<f64> {
    let weights: Vec<f64> = (0..n).map(|s| 1.0 / (n as f64 * binomial(n - 1, s))).collect();
    (0..n)
        .map(|i| {
            let bit = 1u64 << i;
            let mut total = NeumaierSum::new();
            for mask in (0..1u64 << n).filter(|m| m & bit == 0) {
                let s = mask.count_ones() as usize;
                total.add(weights[s] * (table[(mask | bit) as usize].value - table[mask as usize].value));
            }
            total.total()
        })
        .collect()
}

/// Shapley values by full enumeration:
/// `φ_i = Σ_{S ⊆ D∖i} (v(S ∪ i) − v(S)) / (n C(n−1, |S|))`.
pub fn exact_shapley<U: Utility + ?Sized>(utility: &U) -> Result<Vec<f64>> {
    let table = utility_table(utility)?;
    Ok(shapley_from_table(&table, utility.n_players()))
}

/// Exact layer averages `φ_i^s`, indexed `[i][s]` for `s = 0..n-1`.
pub fn exact_layer_averages<U: Utility + ?Sized>(utility: &U) -> Result<Vec<Vec<f64>>> {
    let n = utility.n_players();
    let table = utility_table(utility)?;
    Ok((0..n)
        .map(|i| {
            let bit = 1u64 << i;
            let mut sums = vec![NeumaierSum::new(); n];
            for mask in (0..1u64 << n).filter(|m| m & bit == 0) {
                let s = mask.count_ones() as usize;
                sums[s].add(table[(mask | bit) as usize].value - table[mask as usize].value);
            }
            sums.iter().enumerate().map(|(s, t)| t.total() / binomial(n - 1, s)).collect()
        })
        .collect())
}

/// [`exact_shapley`] over all points, packaged with its cost.
pub fn exact_valuation<U: Utility + ?Sized>(utility: &U, seed: u64) -> Result<ValuationResult> {
    let start = Instant::now();
    let n = utility.n_players();
    let table = utility_table(utility)?;
    let values = shapley_from_table(&table, n);
    let mut r = ValuationResult::new(Method::Exact, seed, n, (0..n).collect(), values);
    r.trainings_performed = table.iter().map(|e| e.trainings).sum();
    r.cache_hits = table.iter().map(|e| e.cache_hits).sum();
    r.wall_time_s = start.elapsed().as_secs_f64();
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::{AdditiveGame, FnGame, WeightedVotingGame};

    #[test]
    fn voting_game_by_permutations() {
        let g = WeightedVotingGame::new(vec![3.0, 2.0, 1.0], 4.0);
        let phi = exact_shapley(&g).unwrap();
        for (a, b) in phi.iter().zip([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn two_player_symmetric() {
        let g = FnGame::new(2, |s: &Coalition| match s.layer() {
            0 => 0.0,
            1 => 0.3,
            _ => 1.1,
        });
        let phi = exact_shapley(&g).unwrap();
        assert!((phi[0] - 0.55).abs() < 1e-12 && (phi[1] - 0.55).abs() < 1e-12);
    }

    #[test]
    fn layer_averages_of_additive_game() {
        let g = AdditiveGame::new(vec![1.0, -2.0, 0.5, 4.0]);
        let layers = exact_layer_averages(&g).unwrap();
        for (i, row) in layers.iter().enumerate() {
            for v in row {
                assert!((v - g.contributions[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn guard() {
        let g = AdditiveGame::new(vec![0.0; 21]);
        assert!(matches!(exact_shapley(&g), Err(Error::EnumerationGuard { n: 21, max: 20 })));
    }

    #[test]
    fn valuation_counts_every_subset() {
        let g = AdditiveGame::new(vec![1.0; 5]);
        let r = exact_valuation(&g, 0).unwrap();
        assert_eq!(r.trainings_performed, 32);
    }
}
