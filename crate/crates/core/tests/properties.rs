use dshap::dataset::{synth_dataset, SynthSpec};
use dshap::estimators::{
    band_presets, delta_shapley, exact_shapley, h_hat, h_permutations, mk_convex_sgd, mk_hoeffding,
    mk_nonconvex_sgd, mk_strongly_convex, monte_carlo_shapley, semivalue_weight_check, stratified_shapley,
    AccuracyTarget, BandPreset, Budget, DeltaConfig, MarginalMode, SampleRule, SemiValueSpec, StratifiedConfig,
};
use dshap::evaluation::{removal_order, Direction};
use dshap::games::TableGame;
use dshap::models::{LossConstants, ModelUtility, TrainConfig};
use dshap::{Coalition, SeedTree, Utility};
use proptest::prelude::*;

fn table_strategy(max_n: usize) -> impl Strategy<Value = (usize, Vec<f64>)> {
    (2usize..=max_n).prop_flat_map(|n| (Just(n), prop::collection::vec(-1.0f64..1.0, 1 << n)))
}

fn constants_strategy() -> impl Strategy<Value = LossConstants> {
    (0.1f64..5.0, 0.1f64..5.0, 0.01f64..2.0, 0.1f64..5.0, 0.1f64..5.0, 1.0f64..1000.0).prop_map(
        |(l, beta, lambda, g, c, t)| LossConstants {
            lipschitz: l,
            smoothness: beta,
            lambda,
            loss_bound: g,
            step_scale: c,
            steps: t,
            kernel_bound: 1.0,
        },
    )
}

fn target_strategy() -> impl Strategy<Value = AccuracyTarget> {
    (0.01f64..1.0, 0.01f64..0.5).prop_map(|(a, b)| AccuracyTarget::new(a, b).unwrap())
}

fn shapley(n: usize, table: Vec<f64>) -> Vec<f64> {
    exact_shapley(&TableGame::new(n, table).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn efficiency((n, t) in table_strategy(7)) {
        let total: f64 = shapley(n, t.clone()).iter().sum();
        prop_assert!((total - (t[(1 << n) - 1] - t[0])).abs() < 1e-9);
    }

    #[test]
    fn dummy_player((n, t) in table_strategy(7), d in 0usize..7) {
        let d = d % n;
        let table: Vec<f64> = (0..1usize << n).map(|m| t[m & !(1 << d)]).collect();
        prop_assert!(shapley(n, table)[d].abs() < 1e-9);
    }

    #[test]
    fn symmetric_players((n, t) in table_strategy(7), i in 0usize..7, j in 0usize..7) {
        let (i, j) = (i % n, j % n);
        prop_assume!(i != j);
        let swap = |m: usize| {
            let (bi, bj) = ((m >> i) & 1, (m >> j) & 1);
            (m & !(1 << i) & !(1 << j)) | (bj << i) | (bi << j)
        };
        let table: Vec<f64> = (0..1usize << n).map(|m| t[m] + t[swap(m)]).collect();
        let phi = shapley(n, table);
        prop_assert!((phi[i] - phi[j]).abs() < 1e-9);
    }

    #[test]
    fn linearity((n, t) in table_strategy(6), other in prop::collection::vec(-1.0f64..1.0, 64), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let w = other[..1 << n].to_vec();
        let mix: Vec<f64> = t.iter().zip(&w).map(|(x, y)| a * x + b * y).collect();
        let lhs = shapley(n, mix);
        let (pu, pw) = (shapley(n, t), shapley(n, w));
        for j in 0..n {
            prop_assert!((lhs[j] - (a * pu[j] + b * pw[j])).abs() < 1e-9);
        }
    }

    #[test]
    fn band_weights_are_normalized(n in 2usize..300, lo in 1usize..300, width in 0usize..300) {
        let lo = 1 + lo % (n - 1);
        let hi = (lo + width).min(n - 1);
        let spec = SemiValueSpec::banded(n, lo, hi).unwrap();
        let check = semivalue_weight_check(&spec, n);
        prop_assert!(check.passed, "residual {}", check.residual);
        prop_assert_eq!(spec.support(), (lo..=hi).collect::<Vec<_>>());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn sample_sizes_shrink_with_k(c in constants_strategy(), target in target_strategy(), n in 4usize..300) {
        for k in 2..n - 1 {
            prop_assert!(mk_strongly_convex(k + 1, n, &target, &c) <= mk_strongly_convex(k, n, &target, &c));
            prop_assert!(mk_convex_sgd(k + 1, n, &target, &c) <= mk_convex_sgd(k, n, &target, &c));
            prop_assert!(mk_nonconvex_sgd(k + 1, n, &target, &c) <= mk_nonconvex_sgd(k, n, &target, &c));
            prop_assert!(h_hat(k + 1, &c).unwrap() < h_hat(k, &c).unwrap());
        }
        prop_assert_eq!(mk_strongly_convex(0, n, &target, &c), 0);
        prop_assert_eq!(mk_nonconvex_sgd(1, n, &target, &c), 0);
    }

    #[test]
    fn sample_sizes_grow_with_accuracy(c in constants_strategy(), target in target_strategy(), n in 4usize..300, k in 2usize..300) {
        let k = 2 + k % (n - 2);
        let tighter = AccuracyTarget::new(target.a / 2.0, target.b).unwrap();
        let surer = AccuracyTarget::new(target.a, target.b / 2.0).unwrap();
        for t in [tighter, surer] {
            prop_assert!(mk_strongly_convex(k, n, &t, &c) >= mk_strongly_convex(k, n, &target, &c));
            prop_assert!(mk_convex_sgd(k, n, &t, &c) >= mk_convex_sgd(k, n, &target, &c));
            prop_assert!(mk_nonconvex_sgd(k, n, &t, &c) >= mk_nonconvex_sgd(k, n, &target, &c));
            prop_assert!(mk_hoeffding(1.0, n, &t) >= mk_hoeffding(1.0, n, &target));
        }
    }

    #[test]
    fn permutation_count_grows_with_epsilon(c in constants_strategy(), target in target_strategy(), n in 2usize..200, m in 1u64..1000, eps in 0.001f64..10.0) {
        let h = h_permutations(eps, &c, &target, n, m);
        prop_assert!(h >= 1);
        prop_assert!(h_permutations(eps * 2.0, &c, &target, n, m) >= h);
        prop_assert!(h_permutations(eps, &c, &target, n, m * 2) >= h);
    }
}

#[test]
fn band_presets_are_normalized() {
    for n in 4..=200 {
        for preset in [BandPreset::Mid, BandPreset::Low] {
            let spec = band_presets(n, preset).unwrap();
            assert!(semivalue_weight_check(&spec, n).passed, "n={n} {preset:?}");
        }
        assert!(semivalue_weight_check(&SemiValueSpec::shapley(n), n).passed);
    }
}

#[test]
fn monte_carlo_is_unbiased() {
    let n = 5;
    let table: Vec<f64> = (0..1u64 << n).map(|m| ((m * 2654435761) % 1000) as f64 / 1000.0).collect();
    let g = TableGame::new(n, table).unwrap();
    let exact = exact_shapley(&g).unwrap();
    let points: Vec<usize> = (0..n).collect();
    let reps = 300;
    let runs: Vec<Vec<f64>> = (0..reps)
        .map(|r| {
            monte_carlo_shapley(&g, &points, Budget::Iterations { iterations: 4 }, &SeedTree::new(r))
                .unwrap()
                .values
        })
        .collect();
    for i in 0..n {
        let xs: Vec<f64> = runs.iter().map(|v| v[i]).collect();
        let mean = xs.iter().sum::<f64>() / reps as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        assert!((mean - exact[i]).abs() <= 4.0 * se + 1e-12, "point {i}: {mean} vs {}", exact[i]);
    }
}

#[test]
fn monte_carlo_values_are_efficient_per_permutation() {
    let n = 6;
    let table: Vec<f64> = (0..1u64 << n).map(|m| (m as f64).sqrt()).collect();
    let g = TableGame::new(n, table.clone()).unwrap();
    let points: Vec<usize> = (0..n).collect();
    let r = monte_carlo_shapley(&g, &points, Budget::Iterations { iterations: 7 }, &SeedTree::new(3)).unwrap();
    let total: f64 = r.values.iter().sum();
    assert!((total - (table[(1 << n) - 1] - table[0])).abs() < 1e-9);
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn estimates_do_not_depend_on_thread_count() {
    let data = synth_dataset(&SynthSpec::blobs(16, 40, 2, 2.0), &SeedTree::new(4)).unwrap();
    let cfg = TrainConfig::strongly_convex(0.1).calibrated(&data);
    let points: Vec<usize> = (0..16).collect();
    let run = |threads: usize| {
        in_pool(threads, || {
            let u = ModelUtility::new(&data, cfg.clone(), SeedTree::new(1), true).unwrap();
            let mc = monte_carlo_shapley(&u, &points, Budget::Iterations { iterations: 6 }, &SeedTree::new(2)).unwrap();
            let delta = delta_shapley(
                &u,
                &points,
                &DeltaConfig {
                    spec: band_presets(16, BandPreset::Mid).unwrap(),
                    budget: Budget::Iterations { iterations: 6 },
                    mode: MarginalMode::FixedSubsequence,
                },
                &SeedTree::new(2),
            )
            .unwrap();
            let strat = stratified_shapley(
                &u,
                &points,
                &StratifiedConfig::new(AccuracyTarget::new(0.1, 0.1).unwrap(), SampleRule::Fixed { samples: 2 }),
                &SeedTree::new(2),
            )
            .unwrap();
            (mc, delta, strat)
        })
    };
    let (a, b) = (run(1), run(4));
    for (x, y) in [(&a.0, &b.0), (&a.1, &b.1), (&a.2, &b.2)] {
        let bits = |v: &[f64]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&x.values), bits(&y.values));
        assert_eq!(x.trainings_performed, y.trainings_performed);
    }
}

#[test]
fn sgd_utility_is_reproducible_and_cache_invisible() {
    let data = synth_dataset(&SynthSpec::blobs(12, 30, 3, 1.5), &SeedTree::new(9)).unwrap();
    let cfg = TrainConfig::convex_sgd(0.05, 3).calibrated(&data);
    let cached = ModelUtility::new(&data, cfg.clone(), SeedTree::new(5), true).unwrap();
    let plain = ModelUtility::new(&data, cfg, SeedTree::new(5), false).unwrap();
    for members in [vec![], vec![3], vec![0, 4, 7], (0..12).collect()] {
        let s = Coalition::new(members).unwrap();
        let a = cached.value(&s).unwrap().value;
        let b = plain.value(&s).unwrap().value;
        let again = cached.value(&s).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(again.value.to_bits(), a.to_bits());
        assert_eq!(again.trainings, 0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn removal_orders_are_permutations(values in prop::collection::vec(-1.0f64..1.0, 1..60), seed in any::<u64>()) {
        let seeds = SeedTree::new(seed);
        let hi = removal_order(&values, Direction::HighestFirst, &seeds);
        let lo = removal_order(&values, Direction::LowestFirst, &seeds);
        let rnd = removal_order(&values, Direction::Random, &seeds);
        for order in [&hi, &lo, &rnd] {
            let mut sorted = order.clone();
            sorted.sort_unstable();
            prop_assert_eq!(sorted, (0..values.len()).collect::<Vec<_>>());
        }
        prop_assert!(hi.windows(2).all(|w| values[w[0]] >= values[w[1]]));
        prop_assert!(lo.windows(2).all(|w| values[w[0]] <= values[w[1]]));
        prop_assert_eq!(rnd, removal_order(&values, Direction::Random, &seeds));
    }
}
