use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coalition::{sample_full_permutation, Coalition};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::models::{accuracy, test_loss, train_deterministic, Regime, TrainConfig};
use crate::seed::SeedTree;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    HighestFirst,
    LowestFirst,
    Random,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::HighestFirst, Direction::LowestFirst, Direction::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::HighestFirst => "highest-first",
            Direction::LowestFirst => "lowest-first",
            Direction::Random => "random",
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Direction::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown removal direction {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemovalCurve {
    pub direction: Direction,
    pub fractions_removed: Vec<f64>,
    pub accuracies: Vec<f64>,
    pub losses: Vec<f64>,
    /// Set when the curve stopped before 50% because a class ran short.
    pub truncated: bool,
}

impl RemovalCurve {
    /// Mean accuracy over the recorded fractions in `[lo, hi]`.
    pub fn mean_accuracy_between(&self, lo: f64, hi: f64) -> Option<f64> {
        let picked: Vec<f64> = self
            .fractions_removed
            .iter()
            .zip(&self.accuracies)
            .filter(|(f, _)| **f >= lo - 1e-12 && **f <= hi + 1e-12)
            .map(|(_, a)| *a)
            .collect();
        (!picked.is_empty()).then(|| crate::summation::mean(&picked))
    }

    /// Tidy rows `direction,fraction_removed,statistic,value,seed,dataset_hash`.
    pub fn write_csv<W: Write>(&self, writer: W, seed: u64, dataset_hash: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["direction", "fraction_removed", "statistic", "value", "seed", "dataset_hash"])?;
        for (j, f) in self.fractions_removed.iter().enumerate() {
            for (name, v) in [("accuracy", self.accuracies[j]), ("loss", self.losses[j])] {
                w.write_record([
                    self.direction.as_str().to_string(),
                    format!("{f:.16e}"),
                    name.to_string(),
                    format!("{v:.16e}"),
                    seed.to_string(),
                    dataset_hash.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Removal order: by value (ties by index) or a permutation drawn from
/// `seeds.child("removal-order", 0)`.
pub fn removal_order(values: &[f64], direction: Direction, seeds: &SeedTree) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    match direction {
        Direction::HighestFirst => order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b))),
        Direction::LowestFirst => order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b))),
        Direction::Random => order = sample_full_permutation(&seeds.child("removal-order", 0), values.len()),
    }
    order
}

/// Removes points in `direction` order in steps of `step_fraction` up to
/// half the training set, retraining the deterministic model on what
/// remains and recording test accuracy and loss at each step.
pub fn removal_curve(
    values: &[f64],
    data: &Dataset,
    config: &TrainConfig,
    direction: Direction,
    step_fraction: f64,
    seeds: &SeedTree,
) -> Result<RemovalCurve> {
    let n = data.n_train();
    if values.len() != n {
        return Err(Error::Alignment(format!("{} values for {n} training points", values.len())));
    }
    if !(step_fraction > 0.0 && step_fraction <= 0.5) {
        return Err(Error::Config(format!("step fraction must lie in (0, 0.5], got {step_fraction}")));
    }
    if config.regime != Regime::StronglyConvex {
        return Err(Error::Config("removal curves retrain with the strongly convex regime".into()));
    }
    let order = removal_order(values, direction, seeds);
    let steps = (0.5 / step_fraction + 1e-9).floor() as usize;
    let mut curve = RemovalCurve {
        direction,
        fractions_removed: Vec::new(),
        accuracies: Vec::new(),
        losses: Vec::new(),
        truncated: false,
    };
    for j in 0..=steps {
        let fraction = j as f64 * step_fraction;
        let removed = ((fraction * n as f64).round() as usize).min(n);
        let mut keep: Vec<usize> = order[removed..].to_vec();
        keep.sort_unstable();
        let mut counts = vec![0usize; data.n_classes()];
        for &i in &keep {
            counts[data.train_label(i)] += 1;
        }
        if counts.iter().any(|&c| c < 2) {
            curve.truncated = true;
            break;
        }
        let model = train_deterministic(&Coalition::new(keep)?, data, config)?;
        curve.fractions_removed.push(fraction);
        curve.accuracies.push(accuracy(&model, data));
        curve.losses.push(test_loss(&model, data, config.constants.loss_bound));
    }
    Ok(curve)
}

/// One curve per direction, computed concurrently.
pub fn removal_curves(
    values: &[f64],
    data: &Dataset,
    config: &TrainConfig,
    directions: &[Direction],
    step_fraction: f64,
    seeds: &SeedTree,
) -> Result<Vec<RemovalCurve>> {
    directions
        .par_iter()
        .map(|&d| removal_curve(values, data, config, d, step_fraction, seeds))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_dataset, SynthSpec};

    fn setup() -> (Dataset, TrainConfig) {
        let ds = synth_dataset(&SynthSpec::blobs(40, 100, 2, 2.0), &SeedTree::new(2)).unwrap();
        let cfg = TrainConfig::strongly_convex(0.1).calibrated(&ds);
        (ds, cfg)
    }

    #[test]
    fn first_point_is_full_data_accuracy() {
        let (ds, cfg) = setup();
        let values: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let curve = removal_curve(&values, &ds, &cfg, Direction::HighestFirst, 0.1, &SeedTree::new(0)).unwrap();
        let full = train_deterministic(&Coalition::full(40), &ds, &cfg).unwrap();
        assert_eq!(curve.accuracies[0], accuracy(&full, &ds));
        assert_eq!(curve.fractions_removed.len(), 6);
        assert!(!curve.truncated);
        assert!(curve.accuracies.iter().all(|a| (0.0..=1.0).contains(a)));
    }

    #[test]
    fn random_direction_is_seeded() {
        let (ds, cfg) = setup();
        let values = vec![0.0; 40];
        let run = |s| removal_curve(&values, &ds, &cfg, Direction::Random, 0.1, &SeedTree::new(s)).unwrap();
        assert_eq!(run(1), run(1));
        assert_ne!(removal_order(&values, Direction::Random, &SeedTree::new(1)), removal_order(&values, Direction::Random, &SeedTree::new(2)));
    }

    #[test]
    fn ties_broken_by_index() {
        let v = [1.0, 3.0, 1.0, 3.0];
        assert_eq!(removal_order(&v, Direction::HighestFirst, &SeedTree::new(0)), vec![1, 3, 0, 2]);
        assert_eq!(removal_order(&v, Direction::LowestFirst, &SeedTree::new(0)), vec![0, 2, 1, 3]);
    }

    #[test]
    fn truncates_when_a_class_runs_out() {
        let (ds, cfg) = setup();
        let values: Vec<f64> = (0..40).map(|i| ds.train_label(i) as f64).collect();
        let curve = removal_curve(&values, &ds, &cfg, Direction::HighestFirst, 0.25, &SeedTree::new(0)).unwrap();
        assert!(curve.truncated);
        assert_eq!(curve.fractions_removed.len(), 2);
    }
}
