use super::{Architecture, ModelParams, Regime, Scratch, TrainConfig};
use crate::coalition::Coalition;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seed::SeedTree;

pub const GRADIENT_TOLERANCE: f64 = 1e-8;
pub const DETERMINISTIC_MAX_ITERATIONS: usize = 10_000;

fn initial_model(data: &Dataset, config: &TrainConfig, seeds: &SeedTree) -> ModelParams {
    match &config.warm_start {
        Some(w) => w.clone(),
        None => ModelParams::seeded_init(config.architecture, data.n_features(), data.n_classes(), seeds),
    }
}

/// Minimizes `(1/|S|) Σ ce(θ; z) + (λ/2)‖θ‖²` over the coalition by
/// full-batch gradient descent with step `1/β_S`, where `β_S` is the
/// trace bound on the objective's curvature. Stops at gradient norm
/// [`GRADIENT_TOLERANCE`] or after [`DETERMINISTIC_MAX_ITERATIONS`].
/// The empty coalition returns the initial (zero or warm-start) model.
pub fn train_deterministic(coalition: &Coalition, data: &Dataset, config: &TrainConfig) -> Result<ModelParams> {
    if config.regime != Regime::StronglyConvex || config.architecture != Architecture::Logistic {
        return Err(Error::Config("deterministic training needs the strongly-convex logistic setup".into()));
    }
    let mut model = initial_model(data, config, &SeedTree::new(0));
    if coalition.is_empty() {
        return Ok(model);
    }
    let members = coalition.members();
    if let Some(&last) = members.last() {
        if last >= data.n_train() {
            return Err(Error::IndexOutOfRange {
                index: last,
                n: data.n_train(),
            });
        }
    }
    let lambda = config.constants.lambda;
    let m = members.len() as f64;
    let curvature = if data.n_classes() > 2 { 0.5 } else { 0.25 };
    let intercept = if config.fit_intercept { 1.0 } else { 0.0 };
    let trace: f64 = members
        .iter()
        .map(|&i| data.train_row(i).iter().map(|x| x * x).sum::<f64>() + intercept)
        .sum::<f64>()
        / m;
    let step = 1.0 / (curvature * trace + lambda);

    let mut grad = model.zeros_like();
    let mut scratch = Scratch::default();
    for iteration in 0..DETERMINISTIC_MAX_ITERATIONS {
        grad.scale(0.0);
        let mut loss = 0.0;
        for &i in members {
            loss += model.accumulate_gradient(data.train_row(i), data.train_label(i), 1.0 / m, &mut grad, &mut scratch);
        }
        grad.axpy(lambda, &model, true);
        if !config.fit_intercept {
            grad.bias.iter_mut().for_each(|b| *b = 0.0);
        }
        if !loss.is_finite() {
            return Err(Error::Divergence { iterations: iteration });
        }
        if grad.norm_squared().sqrt() <= GRADIENT_TOLERANCE {
            break;
        }
        model.axpy(-step, &grad, config.fit_intercept);
    }
    if !model.is_finite() {
        return Err(Error::Divergence {
            iterations: DETERMINISTIC_MAX_ITERATIONS,
        });
    }
    Ok(model)
}

/// Runs exactly `T` single-example SGD steps visiting `sequence` in order,
/// cycling when `T` exceeds its length. Each step descends the regularized
/// per-example loss `ce(θ; z) + (λ/2)‖θ‖²`. The starting point is the warm
/// start if configured, otherwise zeros for the linear model and a draw
/// from `seeds` for the MLP.
pub fn sgd_train(sequence: &[usize], data: &Dataset, config: &TrainConfig, seeds: &SeedTree) -> Result<ModelParams> {
    let mut model = initial_model(data, config, seeds);
    if sequence.is_empty() {
        return Ok(model);
    }
    if let Some(&bad) = sequence.iter().find(|&&i| i >= data.n_train()) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            n: data.n_train(),
        });
    }
    let total = config.steps.total_steps(sequence.len());
    let lambda = config.constants.lambda;
    let mut grad = model.zeros_like();
    let mut scratch = Scratch::default();
    for t in 1..=total {
        let i = sequence[((t - 1) % sequence.len() as u64) as usize];
        grad.scale(0.0);
        model.accumulate_gradient(data.train_row(i), data.train_label(i), 1.0, &mut grad, &mut scratch);
        grad.axpy(lambda, &model, true);
        model.axpy(-config.step_size(t), &grad, config.fit_intercept);
    }
    if !model.is_finite() {
        return Err(Error::Divergence { iterations: total as usize });
    }
    Ok(model)
}
