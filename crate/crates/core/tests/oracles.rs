//! Estimators checked against oracles computed a different way: Shapley
//! values by enumerating permutations, Spearman by the closed form for
//! tie-free data.

use dshap::estimators::{
    delta_shapley, exact_layer_averages, exact_shapley, layer_estimate, stratified_shapley, AccuracyTarget, Budget,
    DeltaConfig, MarginalMode, SampleRule, SemiValueSpec, StratifiedConfig,
};
use dshap::evaluation::spearman;
use dshap::games::{AdditiveGame, TableGame, WeightedVotingGame};
use dshap::{Coalition, SeedTree, Utility};
use proptest::prelude::*;

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Average marginal over all n! arrival orders.
fn shapley_by_permutations<U: Utility>(u: &U) -> Vec<f64> {
    let n = u.n_players();
    let perms = permutations(n);
    let mut phi = vec![0.0; n];
    for p in &perms {
        let mut prefix = Vec::new();
        let mut before = u.value(&Coalition::empty()).unwrap().value;
        for &i in p {
            prefix.push(i);
            let after = u.value(&Coalition::new(prefix.clone()).unwrap()).unwrap().value;
            phi[i] += after - before;
            before = after;
        }
    }
    phi.iter().map(|v| v / perms.len() as f64).collect()
}

fn game(n: usize, values: Vec<f64>) -> TableGame {
    TableGame::new(n, values[..1 << n].to_vec()).unwrap()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

fn table_strategy() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (1usize..=6).prop_flat_map(|n| (Just(n), prop::collection::vec(-1.0f64..1.0, 1 << n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_matches_permutation_enumeration((n, values) in table_strategy()) {
        let g = game(n, values);
        prop_assert!(close(&exact_shapley(&g).unwrap(), &shapley_by_permutations(&g), 1e-12));
    }

    #[test]
    fn exhaustive_stratified_matches_exact((n, values) in table_strategy(), seed in any::<u64>()) {
        let g = game(n, values);
        let cfg = StratifiedConfig::new(AccuracyTarget::new(0.1, 0.1).unwrap(), SampleRule::Exhaustive);
        let points: Vec<usize> = (0..n).collect();
        let r = stratified_shapley(&g, &points, &cfg, &SeedTree::new(seed)).unwrap();
        prop_assert!(close(&r.values, &shapley_by_permutations(&g), 1e-9));
    }

    #[test]
    fn banded_delta_is_the_band_average((n, values) in (3usize..=6).prop_flat_map(|n| (Just(n), prop::collection::vec(-1.0f64..1.0, 1 << n))), lo in 1usize..3) {
        let g = game(n, values);
        let hi = (lo + 1).min(n - 1);
        let cfg = DeltaConfig { spec: SemiValueSpec::banded(n, lo, hi).unwrap(), budget: Budget::Exhaustive, mode: MarginalMode::FixedSubsequence };
        let points: Vec<usize> = (0..n).collect();
        let r = delta_shapley(&g, &points, &cfg, &SeedTree::new(0)).unwrap();
        let layers = exact_layer_averages(&g).unwrap();
        let expected: Vec<f64> = layers
            .iter()
            .map(|phi| (lo..=hi).map(|s| phi[s]).sum::<f64>() / (hi - lo + 1) as f64)
            .collect();
        prop_assert!(close(&r.values, &expected, 1e-9));
    }

    #[test]
    fn constant_offset_leaves_values_unchanged(contributions in prop::collection::vec(-5.0f64..5.0, 1..8), offset in -100.0f64..100.0) {
        let plain = AdditiveGame::new(contributions.clone());
        let mut shifted = AdditiveGame::new(contributions.clone());
        shifted.offset = offset;
        let a = exact_shapley(&plain).unwrap();
        let b = exact_shapley(&shifted).unwrap();
        prop_assert!(close(&a, &b, 1e-9));
        prop_assert!(close(&a, &contributions, 1e-9));
    }

    #[test]
    fn spearman_matches_closed_form_without_ties(x in prop::collection::hash_set(-1000i32..1000, 2..40), seed in any::<u64>()) {
        let x: Vec<f64> = x.into_iter().map(f64::from).collect();
        let n = x.len();
        let mut y: Vec<f64> = (0..n).map(|j| ((j as u64).wrapping_mul(seed | 1) % 1_000_003) as f64 + j as f64 * 1e-3).collect();
        y.dedup();
        prop_assume!(y.len() == n);
        let rank = |v: &[f64]| {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
            let mut r = vec![0.0; v.len()];
            for (pos, &i) in idx.iter().enumerate() {
                r[i] = pos as f64 + 1.0;
            }
            r
        };
        let (rx, ry) = (rank(&x), rank(&y));
        let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b) * (a - b)).sum();
        let nf = n as f64;
        let expected = 1.0 - 6.0 * d2 / (nf * (nf * nf - 1.0));
        prop_assert!((spearman(&x, &y).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn spearman_ignores_monotone_transforms(x in prop::collection::vec(-10.0f64..10.0, 3..30), y in prop::collection::vec(-10.0f64..10.0, 30)) {
        let y = &y[..x.len()];
        let Ok(rho) = spearman(&x, y) else { return Ok(()); };
        let tx: Vec<f64> = x.iter().map(|v| v.exp() * 3.0 + 1.0).collect();
        let ty: Vec<f64> = y.iter().map(|v| v.powi(3) - 7.0).collect();
        prop_assert!((spearman(&tx, &ty).unwrap() - rho).abs() < 1e-9);
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        prop_assert!((spearman(&x, &neg).unwrap() + rho).abs() < 1e-9);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&rho));
    }
}

#[test]
fn voting_game_matches_hand_enumeration() {
    let g = WeightedVotingGame::new(vec![3.0, 2.0, 1.0], 4.0);
    assert!(close(&exact_shapley(&g).unwrap(), &[2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], 1e-12));
    assert!(close(&shapley_by_permutations(&g), &[2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], 1e-12));
}

#[test]
fn layer_estimates_are_unbiased() {
    // A 6-player game with non-trivial layer structure.
    let n = 6;
    let values: Vec<f64> = (0..1u64 << n)
        .map(|m| {
            let c = m.count_ones() as f64;
            (c * 0.7).sin() + if m & 1 == 1 { 0.3 * c } else { 0.0 } - if m & 0b100 != 0 { 0.2 } else { 0.0 }
        })
        .collect();
    let g = TableGame::new(n, values).unwrap();
    let exact = exact_layer_averages(&g).unwrap();
    for point in [0, 2, 5] {
        for k in [1, 2, 4] {
            let reps = 400;
            let m = 5;
            let mut estimates = Vec::with_capacity(reps);
            for r in 0..reps {
                let seeds = SeedTree::new(r as u64).child("point", point as u64);
                let (est, _) = layer_estimate(&g, point, k, m, MarginalMode::FixedSubsequence, &seeds).unwrap();
                estimates.push(est.mean_contribution);
            }
            let mean = estimates.iter().sum::<f64>() / reps as f64;
            let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
            let se = (var / reps as f64).sqrt().max(1e-12);
            assert!(
                (mean - exact[point][k]).abs() <= 4.0 * se + 1e-12,
                "point {point} layer {k}: mean {mean} exact {} se {se}",
                exact[point][k]
            );
        }
    }
}
