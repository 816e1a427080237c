use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::summation::NeumaierSum;

/// Layer probabilities `p_s` over coalition sizes `s = 0..n-1`. The value
/// of point `i` is `Σ_s p_s φ_i^s` with `φ_i^s` the layer average.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemiValueSpec {
    pub probabilities: Vec<f64>,
    /// Inclusive coalition-size band when the spec is banded.
    pub band: Option<(usize, usize)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandPreset {
    Mid,
    Low,
}

impl SemiValueSpec {
    /// Shapley weights: every layer with probability `1/n`.
    pub fn shapley(n: usize) -> Self {
        Self {
            probabilities: vec![1.0 / n as f64; n],
            band: None,
        }
    }

    pub fn banded(n: usize, lower: usize, upper: usize) -> Result<Self> {
        if lower < 1 || lower > upper || upper + 1 > n {
            return Err(Error::InvalidBand { lower, upper, n });
        }
        let p = 1.0 / (upper - lower + 1) as f64;
        let probabilities = (0..n).map(|s| if (lower..=upper).contains(&s) { p } else { 0.0 }).collect();
        Ok(Self {
            probabilities,
            band: Some((lower, upper)),
        })
    }

    pub fn n(&self) -> usize {
        self.probabilities.len()
    }

    /// Layers with non-zero probability, in increasing order.
    pub fn support(&self) -> Vec<usize> {
        (0..self.n()).filter(|&s| self.probabilities[s] > 0.0).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Config("layer probabilities must be finite and non-negative".into()));
        }
        let total: f64 = crate::summation::sum(self.probabilities.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("layer probabilities sum to {total}, not 1")));
        }
        Ok(())
    }
}

/// Mid: `(round(n/3), round(2n/3))`; low: `(round(2n/10), round(3n/10))`;
/// both clamped to `[1, n-1]`.
pub fn band_presets(n: usize, preset: BandPreset) -> Result<SemiValueSpec> {
    if n < 4 {
        return Err(Error::Config(format!("band presets need at least 4 points, got {n}")));
    }
    let nf = n as f64;
    let (lo, hi) = match preset {
        BandPreset::Mid => (nf / 3.0, 2.0 * nf / 3.0),
        BandPreset::Low => (2.0 * nf / 10.0, 3.0 * nf / 10.0),
    };
    let clamp = |x: f64| (x.round() as usize).clamp(1, n - 1);
    SemiValueSpec::banded(n, clamp(lo), clamp(hi))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightCheck {
    pub passed: bool,
    pub residual: f64,
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Normalization check for the semi-value weights
/// `w(k) = n p_{k-1} / C(n-1, k-1)`, `k = 1..n` indexing by `|S| + 1`:
/// residual `|Σ_k C(n-1, k-1) w(k) − n|`, passing below 1e-9. Layers beyond
/// the spec's length count as probability zero.
pub fn semivalue_weight_check(spec: &SemiValueSpec, n: usize) -> WeightCheck {
    let mut total = NeumaierSum::new();
    for k in 1..=n {
        let p = spec.probabilities.get(k - 1).copied().unwrap_or(0.0);
        let c = binomial(n - 1, k - 1);
        let w = n as f64 * p / c;
        total.add(c * w);
    }
    let residual = (total.total() - n as f64).abs();
    WeightCheck {
        passed: residual < 1e-9,
        residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_rounding() {
        let band = |n, p| band_presets(n, p).unwrap().band.unwrap();
        assert_eq!(band(100, BandPreset::Mid), (33, 67));
        assert_eq!(band(100, BandPreset::Low), (20, 30));
        assert_eq!(band(50, BandPreset::Mid), (17, 33));
        assert_eq!(band(4, BandPreset::Low), (1, 1));
        assert!(band_presets(3, BandPreset::Mid).is_err());
    }

    #[test]
    fn banded_validation() {
        assert!(matches!(SemiValueSpec::banded(10, 0, 3), Err(Error::InvalidBand { .. })));
        assert!(SemiValueSpec::banded(10, 4, 3).is_err());
        assert!(SemiValueSpec::banded(10, 2, 10).is_err());
        let s = SemiValueSpec::banded(10, 2, 9).unwrap();
        s.validate().unwrap();
        assert_eq!(s.support(), (2..=9).collect::<Vec<_>>());
    }

    #[test]
    fn weight_check_cases() {
        for n in [10, 50, 100] {
            assert!(semivalue_weight_check(&SemiValueSpec::shapley(n), n).passed);
            for p in [BandPreset::Mid, BandPreset::Low] {
                let c = semivalue_weight_check(&band_presets(n, p).unwrap(), n);
                assert!(c.passed, "{n} {p:?}: {}", c.residual);
            }
        }
        let zero = SemiValueSpec {
            probabilities: vec![0.0; 10],
            band: None,
        };
        let c = semivalue_weight_check(&zero, 10);
        assert!(!c.passed);
        assert_eq!(c.residual, 10.0);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(9, 3), 84.0);
        assert_eq!(binomial(5, 0), 1.0);
        assert_eq!(binomial(5, 5), 1.0);
    }
}
