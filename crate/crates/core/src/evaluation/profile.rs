use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coalition::sample_coalition;
use crate::error::{Error, Result};
use crate::seed::SeedTree;
use crate::summation::{mean, sample_variance};
use crate::utility::Utility;

/// Statistics of sampled marginal contributions at one coalition size.
/// Computed from the sorted samples, so they do not depend on sample order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerProfile {
    pub layer: usize,
    pub samples: usize,
    pub mean_abs: f64,
    pub median_abs: f64,
    pub max_abs: f64,
    pub std_abs: f64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityProfile {
    pub layers: Vec<LayerProfile>,
}

impl StabilityProfile {
    pub fn layer(&self, k: usize) -> Option<&LayerProfile> {
        self.layers.iter().find(|l| l.layer == k)
    }

    /// Tidy rows `layer,statistic,value,seed,dataset_hash`.
    pub fn write_csv<W: Write>(&self, writer: W, seed: u64, dataset_hash: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["layer", "statistic", "value", "seed", "dataset_hash"])?;
        for l in &self.layers {
            let stats = [
                ("samples", l.samples as f64),
                ("mean_abs", l.mean_abs),
                ("median_abs", l.median_abs),
                ("max_abs", l.max_abs),
                ("std_abs", l.std_abs),
                ("mean", l.mean),
                ("std", l.std),
            ];
            for (name, v) in stats {
                w.write_record([
                    l.layer.to_string(),
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

fn median_of_sorted(xs: &[f64]) -> f64 {
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

pub fn summarize_layer(layer: usize, marginals: &[f64]) -> LayerProfile {
    let mut signed = marginals.to_vec();
    signed.sort_by(f64::total_cmp);
    let mut abs: Vec<f64> = marginals.iter().map(|v| v.abs()).collect();
    abs.sort_by(f64::total_cmp);
    LayerProfile {
        layer,
        samples: marginals.len(),
        mean_abs: mean(&abs),
        median_abs: median_of_sorted(&abs),
        max_abs: abs.last().copied().unwrap_or(0.0),
        std_abs: sample_variance(&abs).sqrt(),
        mean: mean(&signed),
        std: sample_variance(&signed).sqrt(),
    }
}

/// For each size `k`, draws `samples_per_layer` (point, coalition) pairs
/// from `seeds.child("layer", k).child("sample", j)` and records the
/// marginal contributions.
pub fn stability_profile<U: Utility + ?Sized>(
    utility: &U,
    layer_sizes: &[usize],
    samples_per_layer: usize,
    seeds: &SeedTree,
) -> Result<StabilityProfile> {
    if samples_per_layer < 10 {
        return Err(Error::Config(format!("need at least 10 samples per layer, got {samples_per_layer}")));
    }
    let n = utility.n_players();
    if let Some(&k) = layer_sizes.iter().find(|&&k| k + 1 > n) {
        return Err(Error::InvalidLayer { layer: k, n });
    }
    let layers = layer_sizes
        .iter()
        .map(|&k| {
            let marginals: Vec<f64> = (0..samples_per_layer)
                .into_par_iter()
                .map(|j| {
                    let s = seeds.child("layer", k as u64).child("sample", j as u64);
                    let i = rand::Rng::random_range(&mut s.child("point", 0).rng(), 0..n);
                    let coalition = sample_coalition(&s.child("coalition", 0), n, k, i)?;
                    Ok(utility.marginal(i, &coalition)?.value)
                })
                .collect::<Result<_>>()?;
            Ok(summarize_layer(k, &marginals))
        })
        .collect::<Result<_>>()?;
    Ok(StabilityProfile { layers })
}
