//! Model parameters, forward pass, and per-example cross-entropy gradients.
//!
//! Class 0 is the reference class with logit fixed at zero, so a `K`-class
//! model carries `K - 1` output rows and a binary model is plain logistic
//! regression with `d` weights.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::SeedTree;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    #[default]
    Softplus,
    Relu,
}

impl Activation {
    fn apply(self, a: f64) -> f64 {
        match self {
            Activation::Softplus => softplus(a),
            Activation::Relu => a.max(0.0),
        }
    }

    fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Softplus => sigmoid(a),
            Activation::Relu => (a > 0.0) as i32 as f64,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Architecture {
    #[default]
    Logistic,
    Mlp { hidden: usize, activation: Activation },
}

/// Flat parameter storage. Logistic: `weights = W (o×d)`, `bias = b (o)`.
/// MLP: `weights = [W1 (h×d), W2 (o×h)]`, `bias = [b1 (h), b2 (o)]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub architecture: Architecture,
    pub n_features: usize,
    pub n_classes: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Reusable buffers for one forward/backward pass.
#[derive(Clone, Debug, Default)]
pub struct Scratch {
    pre: Vec<f64>,
    hidden: Vec<f64>,
    logits: Vec<f64>,
    dlogits: Vec<f64>,
    dhidden: Vec<f64>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(a: f64) -> f64 {
    if a > 30.0 {
        a
    } else {
        a.max(0.0) + (-a.abs()).exp().ln_1p()
    }
}

impl ModelParams {
    /// `(weights, bias)` lengths, `None` on overflow.
    pub fn shape(architecture: Architecture, n_features: usize, n_classes: usize) -> Option<(usize, usize)> {
        let o = n_classes.saturating_sub(1).max(1);
        match architecture {
            Architecture::Logistic => Some((o.checked_mul(n_features)?, o)),
            Architecture::Mlp { hidden, .. } => Some((
                hidden.checked_mul(n_features)?.checked_add(o.checked_mul(hidden)?)?,
                hidden.checked_add(o)?,
            )),
        }
    }

    pub fn zeros(architecture: Architecture, n_features: usize, n_classes: usize) -> Self {
        let (nw, nb) = Self::shape(architecture, n_features, n_classes).expect("parameter count overflows usize");
        Self {
            architecture,
            n_features,
            n_classes,
            weights: vec![0.0; nw],
            bias: vec![0.0; nb],
        }
    }

    /// Zero biases and `N(0, 1/fan_in)` weights. Logistic models stay at zero.
    pub fn seeded_init(architecture: Architecture, n_features: usize, n_classes: usize, seeds: &SeedTree) -> Self {
        let mut p = Self::zeros(architecture, n_features, n_classes);
        if let Architecture::Mlp { hidden, .. } = architecture {
            let mut rng = seeds.rng();
            let split = hidden * n_features;
            let (w1, w2) = p.weights.split_at_mut(split);
            let s1 = (1.0 / n_features as f64).sqrt();
            let s2 = (1.0 / hidden as f64).sqrt();
            w1.iter_mut().for_each(|w| *w = s1 * rng.sample::<f64, _>(StandardNormal));
            w2.iter_mut().for_each(|w| *w = s2 * rng.sample::<f64, _>(StandardNormal));
        }
        p
    }

    pub fn outputs(&self) -> usize {
        self.n_classes.saturating_sub(1).max(1)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            weights: vec![0.0; self.weights.len()],
            bias: vec![0.0; self.bias.len()],
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_features == 0 || self.n_classes < 2 {
            return Err(Error::Config("model needs at least one feature and two classes".into()));
        }
        if let Architecture::Mlp { hidden, .. } = self.architecture {
            if hidden == 0 {
                return Err(Error::Config("mlp needs at least one hidden unit".into()));
            }
        }
        let expected = Self::shape(self.architecture, self.n_features, self.n_classes);
        if expected != Some((self.weights.len(), self.bias.len())) {
            return Err(Error::Config(format!(
                "parameter shapes ({}, {}) do not match architecture (expected {expected:?})",
                self.weights.len(),
                self.bias.len(),
            )));
        }
        if self.weights.iter().chain(&self.bias).any(|x| !x.is_finite()) {
            return Err(Error::Config("non-finite model parameter".into()));
        }
        Ok(())
    }

    pub fn from_json_slice(bytes: &[u8]) -> Result<Self> {
        let p: Self = serde_json::from_slice(bytes)?;
        p.validate()?;
        Ok(p)
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|x| x.is_finite())
    }

    pub fn norm_squared(&self) -> f64 {
        self.weights.iter().chain(&self.bias).map(|x| x * x).sum()
    }

    /// `self += alpha * other`, optionally leaving biases untouched.
    pub fn axpy(&mut self, alpha: f64, other: &ModelParams, include_bias: bool) {
        for (w, g) in self.weights.iter_mut().zip(&other.weights) {
            *w += alpha * g;
        }
        if include_bias {
            for (b, g) in self.bias.iter_mut().zip(&other.bias) {
                *b += alpha * g;
            }
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.weights.iter_mut().chain(self.bias.iter_mut()).for_each(|x| *x *= alpha);
    }

    fn forward(&self, x: &[f64], s: &mut Scratch) {
        let d = self.n_features;
        let o = self.outputs();
        s.logits.clear();
        match self.architecture {
            Architecture::Logistic => {
                for j in 0..o {
                    let row = &self.weights[j * d..(j + 1) * d];
                    s.logits.push(self.bias[j] + dot(row, x));
                }
            }
            Architecture::Mlp { hidden, activation } => {
                s.pre.clear();
                s.hidden.clear();
                for u in 0..hidden {
                    let a = self.bias[u] + dot(&self.weights[u * d..(u + 1) * d], x);
                    s.pre.push(a);
                    s.hidden.push(activation.apply(a));
                }
                let w2 = &self.weights[hidden * d..];
                for j in 0..o {
                    s.logits.push(self.bias[hidden + j] + dot(&w2[j * hidden..(j + 1) * hidden], &s.hidden));
                }
            }
        }
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let mut s = Scratch::default();
        self.forward(x, &mut s);
        s.logits
    }

    /// Unclamped cross-entropy of one example.
    pub fn cross_entropy(&self, x: &[f64], y: usize) -> f64 {
        let mut s = Scratch::default();
        self.forward(x, &mut s);
        cross_entropy_of_logits(&s.logits, y).0
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let z = self.logits(x);
        let mut best = (0usize, 0.0f64);
        for (j, &zj) in z.iter().enumerate() {
            if zj > best.1 {
                best = (j + 1, zj);
            }
        }
        best.0
    }

    /// Adds `scale * ∇ ce(x, y)` into `grad` and returns the unclamped loss.
    pub fn accumulate_gradient(&self, x: &[f64], y: usize, scale: f64, grad: &mut ModelParams, s: &mut Scratch) -> f64 {
        self.forward(x, s);
        let d = self.n_features;
        let o = self.outputs();
        let lse = log_sum_exp_with_zero(&s.logits);
        let loss = lse - if y == 0 { 0.0 } else { s.logits[y - 1] };
        s.dlogits.clear();
        for j in 0..o {
            let p = (s.logits[j] - lse).exp();
            s.dlogits.push(scale * (p - if y == j + 1 { 1.0 } else { 0.0 }));
        }
        match self.architecture {
            Architecture::Logistic => {
                for j in 0..o {
                    let g = s.dlogits[j];
                    let row = &mut grad.weights[j * d..(j + 1) * d];
                    for (w, xi) in row.iter_mut().zip(x) {
                        *w += g * xi;
                    }
                    grad.bias[j] += g;
                }
            }
            Architecture::Mlp { hidden, activation } => {
                let (gw1, gw2) = grad.weights.split_at_mut(hidden * d);
                let w2 = &self.weights[hidden * d..];
                s.dhidden.clear();
                s.dhidden.resize(hidden, 0.0);
                for j in 0..o {
                    let g = s.dlogits[j];
                    for u in 0..hidden {
                        gw2[j * hidden + u] += g * s.hidden[u];
                        s.dhidden[u] += g * w2[j * hidden + u];
                    }
                    grad.bias[hidden + j] += g;
                }
                for u in 0..hidden {
                    let da = s.dhidden[u] * activation.derivative(s.pre[u]);
                    if da != 0.0 {
                        for (w, xi) in gw1[u * d..(u + 1) * d].iter_mut().zip(x) {
                            *w += da * xi;
                        }
                    }
                    grad.bias[u] += da;
                }
            }
        }
        loss
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn log_sum_exp_with_zero(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(0.0f64, f64::max);
    let s = (-m).exp() + z.iter().map(|&v| (v - m).exp()).sum::<f64>();
    m + s.ln()
}

fn cross_entropy_of_logits(z: &[f64], y: usize) -> (f64, f64) {
    let lse = log_sum_exp_with_zero(z);
    (lse - if y == 0 { 0.0 } else { z[y - 1] }, lse)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn random_model(arch: Architecture, d: usize, k: usize, seed: u64) -> ModelParams {
        let mut p = ModelParams::zeros(arch, d, k);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        p.weights.iter_mut().chain(p.bias.iter_mut()).for_each(|w| *w = rng.random_range(-1.0..1.0));
        p
    }

    fn loss_at(p: &ModelParams, x: &[f64], y: usize) -> f64 {
        p.cross_entropy(x, y)
    }

    // Central finite differences vs the analytic gradient on random probes.
    fn gradient_check(arch: Architecture, k: usize) {
        let d = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut worst: f64 = 0.0;
        for probe in 0..100 {
            let p = random_model(arch, d, k, probe);
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y = rng.random_range(0..k);
            let mut grad = p.zeros_like();
            p.accumulate_gradient(&x, y, 1.0, &mut grad, &mut Scratch::default());
            let h = 1e-6;
            let n_w = p.weights.len();
            for idx in 0..n_w + p.bias.len() {
                let mut plus = p.clone();
                let mut minus = p.clone();
                let (analytic, slot_p, slot_m) = if idx < n_w {
                    (grad.weights[idx], &mut plus.weights[idx], &mut minus.weights[idx])
                } else {
                    (grad.bias[idx - n_w], &mut plus.bias[idx - n_w], &mut minus.bias[idx - n_w])
                };
                *slot_p += h;
                *slot_m -= h;
                let numeric = (loss_at(&plus, &x, y) - loss_at(&minus, &x, y)) / (2.0 * h);
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3);
                worst = worst.max(rel);
            }
        }
        assert!(worst < 1e-5, "{arch:?} k={k}: worst relative error {worst}");
    }

    #[test]
    fn logistic_gradient_matches_finite_differences() {
        gradient_check(Architecture::Logistic, 2);
        gradient_check(Architecture::Logistic, 3);
    }

    #[test]
    fn mlp_gradient_matches_finite_differences() {
        gradient_check(
            Architecture::Mlp {
                hidden: 5,
                activation: Activation::Softplus,
            },
            2,
        );
    }

    #[test]
    fn zero_model_is_uniform() {
        let p = ModelParams::zeros(Architecture::Logistic, 3, 2);
        assert!((p.cross_entropy(&[1.0, -2.0, 0.5], 1) - std::f64::consts::LN_2).abs() < 1e-15);
        let p3 = ModelParams::zeros(Architecture::Logistic, 3, 3);
        assert!((p3.cross_entropy(&[1.0, -2.0, 0.5], 2) - 3f64.ln()).abs() < 1e-15);
        assert_eq!(p.predict(&[1.0, 1.0, 1.0]), 0);
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let arch = Architecture::Mlp {
            hidden: 3,
            activation: Activation::Softplus,
        };
        let p = ModelParams::seeded_init(arch, 4, 2, &SeedTree::new(1));
        let text = serde_json::to_string(&p).unwrap();
        assert!(text.contains("\"kind\":\"mlp\""));
        assert_eq!(ModelParams::from_json_slice(text.as_bytes()).unwrap(), p);
        let mut bad = p.clone();
        bad.bias.pop();
        assert!(ModelParams::from_json_slice(serde_json::to_string(&bad).unwrap().as_bytes()).is_err());
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0 && softplus(-1000.0) < 1e-300);
    }
}
