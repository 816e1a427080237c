//! The set-function interface every estimator is written against.

use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::seed::SeedTree;

/// A utility value (or a difference of two) together with how many model
/// trainings it cost and how many lookups were served from a cache.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub trainings: u64,
    pub cache_hits: u64,
}

impl Evaluation {
    pub fn trained(value: f64) -> Self {
        Self {
            value,
            trainings: 1,
            cache_hits: 0,
        }
    }

    pub fn cached(value: f64) -> Self {
        Self {
            value,
            trainings: 0,
            cache_hits: 1,
        }
    }

    /// `self - other`, with costs added.
    pub fn minus(self, other: Evaluation) -> Evaluation {
        Evaluation {
            value: self.value - other.value,
            trainings: self.trainings + other.trainings,
            cache_hits: self.cache_hits + other.cache_hits,
        }
    }
}

/// Cooperative game over training points: `v(S)` for coalitions of
/// `0..n_players()`.
pub trait Utility: Sync {
    fn n_players(&self) -> usize;

    fn value(&self, coalition: &Coalition) -> Result<Evaluation>;

    /// `v(S ∪ i) - v(S)`.
    fn marginal(&self, point: usize, coalition: &Coalition) -> Result<Evaluation> {
        let with = coalition.with(point)?;
        Ok(self.value(&with)?.minus(self.value(coalition)?))
    }

    /// Marginal averaged over `h` random training orders of `S ∪ i`. Utilities
    /// without internal randomness return the plain marginal for any `h`.
    fn expected_marginal(
        &self,
        point: usize,
        coalition: &Coalition,
        h: usize,
        seeds: &SeedTree,
    ) -> Result<Evaluation> {
        let _ = (h, seeds);
        self.marginal(point, coalition)
    }

    /// True when `marginal` is exactly a difference of two `value` calls, so
    /// permutation walks may reuse prefix utilities.
    fn marginal_is_difference(&self) -> bool {
        true
    }
}

pub(crate) fn check_point<U: Utility + ?Sized>(utility: &U, point: usize) -> Result<()> {
    let n = utility.n_players();
    if point >= n {
        return Err(Error::IndexOutOfRange { index: point, n });
    }
    Ok(())
}
