//! Closed-form games used as utility doubles: they stand in for model
//! training wherever an estimator needs to be checked against known values.

use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::utility::{Evaluation, Utility};

/// `v(S) = Σ_{j∈S} c_j`; every marginal of `i` equals `c_i`.
#[derive(Clone, Debug)]
pub struct AdditiveGame {
    pub contributions: Vec<f64>,
    pub offset: f64,
}

impl AdditiveGame {
    pub fn new(contributions: Vec<f64>) -> Self {
        Self {
            contributions,
            offset: 0.0,
        }
    }
}

impl Utility for AdditiveGame {
    fn n_players(&self) -> usize {
        self.contributions.len()
    }

    fn value(&self, coalition: &Coalition) -> Result<Evaluation> {
        let v = self.offset + coalition.members().iter().map(|&j| self.contributions[j]).sum::<f64>();
        Ok(Evaluation::trained(v))
    }
}

/// Simple majority game: `v(S) = 1` when the members' weights reach the quota.
#[derive(Clone, Debug)]
pub struct WeightedVotingGame {
    pub weights: Vec<f64>,
    pub quota: f64,
}

impl WeightedVotingGame {
    pub fn new(weights: Vec<f64>, quota: f64) -> Self {
        Self { weights, quota }
    }
}

impl Utility for WeightedVotingGame {
    fn n_players(&self) -> usize {
        self.weights.len()
    }

    fn value(&self, coalition: &Coalition) -> Result<Evaluation> {
        let w: f64 = coalition.members().iter().map(|&j| self.weights[j]).sum();
        Ok(Evaluation::trained(if w >= self.quota { 1.0 } else { 0.0 }))
    }
}

/// Arbitrary game on at most 20 players given by a table indexed by bitmask.
#[derive(Clone, Debug)]
pub struct TableGame {
    n: usize,
    values: Vec<f64>,
}

impl TableGame {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if n > 20 {
            return Err(Error::EnumerationGuard { n, max: 20 });
        }
        if values.len() != 1 << n {
            return Err(Error::Config(format!("table needs 2^{n} entries, got {}", values.len())));
        }
        Ok(Self { n, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl Utility for TableGame {
    fn n_players(&self) -> usize {
        self.n
    }

    fn value(&self, coalition: &Coalition) -> Result<Evaluation> {
        Ok(Evaluation::trained(self.values[coalition.mask() as usize]))
    }
}

/// Game defined by a closure over coalitions.
pub struct FnGame<F> {
    n: usize,
    f: F,
}

impl<F: Fn(&Coalition) -> f64 + Sync> FnGame<F> {
    pub fn new(n: usize, f: F) -> Self {
        Self { n, f }
    }
}

impl<F: Fn(&Coalition) -> f64 + Sync> Utility for FnGame<F> {
    fn n_players(&self) -> usize {
        self.n
    }

    fn value(&self, coalition: &Coalition) -> Result<Evaluation> {
        Ok(Evaluation::trained((self.f)(coalition)))
    }
}
