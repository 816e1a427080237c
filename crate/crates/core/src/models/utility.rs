use std::sync::{Arc, OnceLock};

use dashmap::DashMap;

use super::{sgd_train, train_deterministic, ModelParams, TrainConfig};
use crate::coalition::{insert_into_sequence, sample_permutation, Coalition};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seed::SeedTree;
use crate::summation::NeumaierSum;
use crate::utility::{check_point, Evaluation, Utility};

/// Mean cross-entropy over the evaluation split, each term clamped to
/// `[0, loss_bound]`.
pub fn test_loss(model: &ModelParams, data: &Dataset, loss_bound: f64) -> f64 {
    let mut total = NeumaierSum::new();
    for j in 0..data.n_eval() {
        total.add(model.cross_entropy(data.eval_row(j), data.eval_label(j)).min(loss_bound));
    }
    total.total() / data.n_eval() as f64
}

pub fn accuracy(model: &ModelParams, data: &Dataset) -> f64 {
    let hits = (0..data.n_eval())
        .filter(|&j| model.predict(data.eval_row(j)) == data.eval_label(j))
        .count();
    hits as f64 / data.n_eval() as f64
}

type Slot = Arc<OnceLock<Result<f64, String>>>;

/// `v(S) = -test_loss(A(S))` for a dataset and training configuration.
///
/// Under the SGD regimes `A` visits `S` in the order
/// `π(S) = sample_permutation(seeds.child_of_slice("order", S), S)`, and
/// the marginal of `i` splices `i` into `π(S)` at a position drawn from
/// `seeds.child_of_slice("insert", S).child("point", i)`. MLP
/// initialization is drawn once from `seeds.child("init", 0)` and shared by
/// every training.
///
/// With caching on, each distinct training input is trained exactly once no
/// matter how many workers ask for it concurrently, so training counts are
/// independent of scheduling.
pub struct ModelUtility<'a> {
    data: &'a Dataset,
    config: TrainConfig,
    seeds: SeedTree,
    init_seeds: SeedTree,
    cache: Option<DashMap<Vec<usize>, Slot>>,
}

impl<'a> ModelUtility<'a> {
    pub fn new(data: &'a Dataset, config: TrainConfig, seeds: SeedTree, cache: bool) -> Result<Self> {
        config.validate()?;
        if let Some(w) = &config.warm_start {
            if w.n_features != data.n_features() || w.n_classes != data.n_classes() {
                return Err(Error::Config("warm start dimensions do not match the dataset".into()));
            }
        }
        Ok(Self {
            data,
            init_seeds: seeds.child("init", 0),
            seeds,
            config,
            cache: cache.then(DashMap::new),
        })
    }

    pub fn data(&self) -> &Dataset {
        self.data
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Number of distinct training inputs stored so far.
    pub fn cache_len(&self) -> usize {
        self.cache.as_ref().map_or(0, DashMap::len)
    }

    pub fn train(&self, coalition: &Coalition) -> Result<ModelParams> {
        if self.config.regime.is_sgd() {
            sgd_train(&self.order(coalition), self.data, &self.config, &self.init_seeds)
        } else {
            train_deterministic(coalition, self.data, &self.config)
        }
    }

    /// The SGD visit order `π(S)`.
    pub fn order(&self, coalition: &Coalition) -> Vec<usize> {
        sample_permutation(&self.seeds.child_of_slice("order", coalition.members()), coalition)
    }

    fn loss_of(&self, model: &ModelParams) -> f64 {
        test_loss(model, self.data, self.config.constants.loss_bound)
    }

    fn compute(&self, key: &[usize]) -> Result<f64> {
        let model = if self.config.regime.is_sgd() {
            sgd_train(key, self.data, &self.config, &self.init_seeds)?
        } else {
            train_deterministic(&Coalition::new(key.to_vec())?, self.data, &self.config)?
        };
        Ok(-self.loss_of(&model))
    }

    /// Utility of a training input: the sorted member list in the
    /// deterministic regime, the visit sequence under SGD.
    fn evaluate_key(&self, key: Vec<usize>) -> Result<Evaluation> {
        let Some(cache) = &self.cache else {
            return Ok(Evaluation::trained(self.compute(&key)?));
        };
        let slot = cache.entry(key.clone()).or_default().clone();
        let mut trained = false;
        let stored = slot.get_or_init(|| {
            trained = true;
            self.compute(&key).map_err(|e| e.to_string())
        });
        match stored {
            Ok(v) if trained => Ok(Evaluation::trained(*v)),
            Ok(v) => Ok(Evaluation::cached(*v)),
            Err(msg) => Err(Error::Training(msg.clone())),
        }
    }

    fn check_members(&self, coalition: &Coalition) -> Result<()> {
        match coalition.members().last() {
            Some(&last) if last >= self.data.n_train() => Err(Error::IndexOutOfRange {
                index: last,
                n: self.data.n_train(),
            }),
            _ => Ok(()),
        }
    }
}

impl Utility for ModelUtility<'_> {
    fn n_players(&self) -> usize {
        self.data.n_train()
    }

    fn value(&self, coalition: &Coalition) -> Result<Evaluation> {
        self.check_members(coalition)?;
        if self.config.regime.is_sgd() {
            self.evaluate_key(self.order(coalition))
        } else {
            self.evaluate_key(coalition.members().to_vec())
        }
    }

    fn marginal(&self, point: usize, coalition: &Coalition) -> Result<Evaluation> {
        check_point(self, point)?;
        self.check_members(coalition)?;
        if coalition.contains(point) {
            return Err(Error::DuplicateMember(point));
        }
        if !self.config.regime.is_sgd() {
            let with = coalition.with(point)?;
            return Ok(self.value(&with)?.minus(self.value(coalition)?));
        }
        let base = self.order(coalition);
        let insert_seeds = self.seeds.child_of_slice("insert", coalition.members()).child("point", point as u64);
        let with = insert_into_sequence(&base, point, &insert_seeds)?;
        Ok(self.evaluate_key(with)?.minus(self.evaluate_key(base)?))
    }

    /// Averages over `h` orders `seeds.child("expected", j)` of `S ∪ i`; the
    /// without-`i` run visits the same order with `i` left out.
    fn expected_marginal(&self, point: usize, coalition: &Coalition, h: usize, seeds: &SeedTree) -> Result<Evaluation> {
        if !self.config.regime.is_sgd() {
            return self.marginal(point, coalition);
        }
        if h == 0 {
            return Err(Error::Config("expected-utility mode needs h >= 1".into()));
        }
        check_point(self, point)?;
        self.check_members(coalition)?;
        let union = coalition.with(point)?;
        let mut total = NeumaierSum::new();
        let mut cost = Evaluation::default();
        for j in 0..h {
            let with = sample_permutation(&seeds.child("expected", j as u64), &union);
            let without: Vec<usize> = with.iter().copied().filter(|&x| x != point).collect();
            let e = self.evaluate_key(with)?.minus(self.evaluate_key(without)?);
            total.add(e.value);
            cost.trainings += e.trainings;
            cost.cache_hits += e.cache_hits;
        }
        cost.value = total.total() / h as f64;
        Ok(cost)
    }

    fn marginal_is_difference(&self) -> bool {
        !self.config.regime.is_sgd()
    }
}

/// `v(S)` without caching.
pub fn utility(coalition: &Coalition, data: &Dataset, config: &TrainConfig, seeds: &SeedTree) -> Result<f64> {
    Ok(ModelUtility::new(data, config.clone(), seeds.clone(), false)?.value(coalition)?.value)
}

/// `v(S ∪ i) - v(S) = L(A(S)) - L(A(S ∪ i))`.
pub fn marginal_contribution(
    point: usize,
    coalition: &Coalition,
    data: &Dataset,
    config: &TrainConfig,
    seeds: &SeedTree,
) -> Result<f64> {
    Ok(ModelUtility::new(data, config.clone(), seeds.clone(), false)?.marginal(point, coalition)?.value)
}

/// The marginal is trained under `seeds`; the `h` orders are drawn from
/// `seeds.child("draws", 0)`.
pub fn expected_marginal(
    point: usize,
    coalition: &Coalition,
    data: &Dataset,
    config: &TrainConfig,
    h: usize,
    seeds: &SeedTree,
) -> Result<f64> {
    let u = ModelUtility::new(data, config.clone(), seeds.clone(), false)?;
    Ok(u.expected_marginal(point, coalition, h, &seeds.child("draws", 0))?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coalition::sample_coalition;
    use crate::dataset::{synth_dataset, SynthSpec};
    use crate::models::{Activation, Architecture};
    use crate::summation::{mean, sample_variance};

    fn blobs(n: usize, sep: f64) -> Dataset {
        synth_dataset(&SynthSpec::blobs(n, 200, 2, sep), &SeedTree::new(11)).unwrap()
    }

    #[test]
    fn zero_model_loss_is_ln2() {
        let ds = blobs(20, 2.0);
        let m = ModelParams::zeros(Architecture::Logistic, 2, 2);
        assert!((test_loss(&m, &ds, 10.0) - std::f64::consts::LN_2).abs() < 1e-12);
        let cfg = TrainConfig::strongly_convex(0.1).calibrated(&ds);
        let v = utility(&Coalition::empty(), &ds, &cfg, &SeedTree::new(0)).unwrap();
        assert!((v + std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn saturated_separator_has_small_loss() {
        let eval_x = vec![1.0, 2.0, -1.0, -3.0];
        let ds = Dataset::new("sep", 1, vec![1.0, -1.0], vec![1, 0], eval_x, vec![1, 1, 0, 0]).unwrap();
        let m = ModelParams {
            weights: vec![50.0],
            ..ModelParams::zeros(Architecture::Logistic, 1, 2)
        };
        assert!(test_loss(&m, &ds, 10.0) <= 0.01);
        assert_eq!(accuracy(&m, &ds), 1.0);
        let flipped = ModelParams {
            weights: vec![-1e6],
            ..m
        };
        let g = crate::models::LossConstants::DEFAULT_LOSS_BOUND;
        assert!((test_loss(&flipped, &ds, g) - g).abs() < 1e-12);
    }

    #[test]
    fn utilities_lie_in_range() {
        let ds = blobs(30, 1.0);
        let cfg = TrainConfig::strongly_convex(0.05).calibrated(&ds);
        let u = ModelUtility::new(&ds, cfg.clone(), SeedTree::new(1), true).unwrap();
        for k in [0, 1, 5, 29] {
            let s = sample_coalition(&SeedTree::new(k as u64), 30, k, 0).unwrap();
            let v = u.value(&s).unwrap().value;
            assert!((-cfg.constants.loss_bound..=0.0).contains(&v), "{v}");
        }
    }

    #[test]
    fn larger_coalitions_help_on_average() {
        let ds = blobs(60, 4.0);
        let cfg = TrainConfig::strongly_convex(0.1).calibrated(&ds);
        let u = ModelUtility::new(&ds, cfg, SeedTree::new(2), false).unwrap();
        let avg = |k: usize| {
            let vals: Vec<f64> = (0..50)
                .map(|j| {
                    let s = sample_coalition(&SeedTree::new(7).child("draw", j), 60, k, 0).unwrap();
                    u.value(&s).unwrap().value
                })
                .collect();
            mean(&vals)
        };
        assert!(avg(20) >= avg(2));
    }

    #[test]
    fn cache_is_invisible_and_counted() {
        let ds = blobs(20, 2.0);
        let cfg = TrainConfig::convex_sgd(0.01, 2).calibrated(&ds);
        let cached = ModelUtility::new(&ds, cfg.clone(), SeedTree::new(5), true).unwrap();
        let plain = ModelUtility::new(&ds, cfg, SeedTree::new(5), false).unwrap();
        let s = Coalition::new(vec![1, 4, 9]).unwrap();
        let a = cached.marginal(3, &s).unwrap();
        let b = cached.marginal(3, &s).unwrap();
        let c = plain.marginal(3, &s).unwrap();
        assert_eq!(a.value, c.value);
        assert_eq!(a.value, b.value);
        assert_eq!((a.trainings, a.cache_hits), (2, 0));
        assert_eq!((b.trainings, b.cache_hits), (0, 2));
        assert_eq!(cached.cache_len(), 2);
    }

    #[test]
    fn duplicate_member_rejected() {
        let ds = blobs(10, 2.0);
        let cfg = TrainConfig::strongly_convex(0.1).calibrated(&ds);
        let s = Coalition::new(vec![2, 3]).unwrap();
        assert!(matches!(
            marginal_contribution(3, &s, &ds, &cfg, &SeedTree::new(0)),
            Err(Error::DuplicateMember(3))
        ));
    }

    #[test]
    fn marginal_within_stability_envelope() {
        let ds = blobs(100, 2.0);
        let cfg = TrainConfig::strongly_convex(0.1).calibrated(&ds);
        let u = ModelUtility::new(&ds, cfg.clone(), SeedTree::new(0), true).unwrap();
        for t in 0..60u64 {
            let k = 1 + (t as usize * 7) % 98;
            let i = (t as usize * 13) % 100;
            let s = sample_coalition(&SeedTree::new(3).child("s", t), 100, k, i).unwrap();
            let m = u.marginal(i, &s).unwrap().value;
            assert!(m.abs() <= cfg.constants.stability_envelope(k), "k={k}: {m}");
        }
    }

    #[test]
    fn uninformative_point_contributes_little() {
        let base = blobs(40, 2.0);
        let mut xs: Vec<f64> = (0..40).flat_map(|i| base.train_row(i).to_vec()).collect();
        let mut ys = base.train_labels().to_vec();
        xs.extend_from_slice(&[0.0, 0.0]);
        ys.push(1);
        let ex: Vec<f64> = (0..base.n_eval()).flat_map(|j| base.eval_row(j).to_vec()).collect();
        let ds = Dataset::new("z", 2, xs, ys, ex, base.eval_labels().to_vec()).unwrap();
        let cfg = TrainConfig::strongly_convex(0.1).calibrated(&ds);
        let u = ModelUtility::new(&ds, cfg, SeedTree::new(0), true).unwrap();
        let mut mine = Vec::new();
        let mut medians = Vec::new();
        for t in 0..100u64 {
            let s = sample_coalition(&SeedTree::new(9).child("s", t), 41, 5, 40).unwrap();
            let mut all: Vec<f64> = (0..41)
                .filter(|j| !s.contains(*j))
                .map(|j| u.marginal(j, &s).unwrap().value.abs())
                .collect();
            mine.push(u.marginal(40, &s).unwrap().value.abs());
            all.sort_by(f64::total_cmp);
            medians.push(all[all.len() / 2]);
        }
        assert!(mean(&mine) < mean(&medians), "{} vs {}", mean(&mine), mean(&medians));
    }

    #[test]
    fn expected_marginal_variance_shrinks() {
        let ds = synth_dataset(&SynthSpec::blobs(12, 100, 2, 2.0), &SeedTree::new(4)).unwrap();
        let cfg = TrainConfig::convex_sgd(0.01, 1).calibrated(&ds);
        let u = ModelUtility::new(&ds, cfg, SeedTree::new(0), false).unwrap();
        let s = Coalition::new(vec![0, 1, 2, 3, 5, 8]).unwrap();
        let run = |h: usize| -> Vec<f64> {
            (0..200u64)
                .map(|t| u.expected_marginal(4, &s, h, &SeedTree::new(77).child("trial", t)).unwrap().value)
                .collect()
        };
        let v1 = sample_variance(&run(1));
        let v16 = sample_variance(&run(16));
        assert!(v16 <= v1 / 8.0 + 1e-6, "{v16} vs {v1}");
    }

    #[test]
    fn expected_marginal_h1_and_deterministic() {
        let ds = blobs(12, 2.0);
        let sgd = TrainConfig::convex_sgd(0.01, 1).calibrated(&ds);
        let s = Coalition::new(vec![0, 2]).unwrap();
        let u = ModelUtility::new(&ds, sgd, SeedTree::new(0), false).unwrap();
        let seeds = SeedTree::new(8);
        let one = u.expected_marginal(5, &s, 1, &seeds).unwrap().value;
        let order = sample_permutation(&seeds.child("expected", 0), &s.with(5).unwrap());
        let without: Vec<usize> = order.iter().copied().filter(|&x| x != 5).collect();
        let direct = u.evaluate_key(order).unwrap().value - u.evaluate_key(without).unwrap().value;
        assert_eq!(one, direct);

        let det = TrainConfig::strongly_convex(0.1).calibrated(&ds);
        let a = expected_marginal(5, &s, &ds, &det, 1, &seeds).unwrap();
        let b = expected_marginal(5, &s, &ds, &det, 9, &seeds).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mlp_utility_is_deterministic() {
        let ds = synth_dataset(&SynthSpec::images(20, 20, 3, 2.0), &SeedTree::new(1)).unwrap();
        let cfg = TrainConfig::nonconvex_sgd(4, Activation::Softplus, 1e-3, 2).calibrated(&ds);
        let s = Coalition::new(vec![1, 2, 3, 7]).unwrap();
        let a = marginal_contribution(0, &s, &ds, &cfg, &SeedTree::new(3)).unwrap();
        let b = marginal_contribution(0, &s, &ds, &cfg, &SeedTree::new(3)).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
