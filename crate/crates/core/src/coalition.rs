//! Coalitions and the seeded samplers that draw them.

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::SeedTree;

/// A set of training-row indices kept in canonical (sorted, duplicate-free)
/// form. Its layer is its cardinality.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Coalition {
    members: Vec<usize>,
}

impl Coalition {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a coalition from indices in any order. Duplicates are an error.
    pub fn new(mut members: Vec<usize>) -> Result<Self> {
        members.sort_unstable();
        if let Some(w) = members.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateMember(w[0]));
        }
        Ok(Self { members })
    }

    /// Like [`Coalition::new`] but also checks every index is below `n`.
    pub fn within(members: Vec<usize>, n: usize) -> Result<Self> {
        let c = Self::new(members)?;
        if let Some(&last) = c.members.last() {
            if last >= n {
                return Err(Error::IndexOutOfRange { index: last, n });
            }
        }
        Ok(c)
    }

    pub fn full(n: usize) -> Self {
        Self {
            members: (0..n).collect(),
        }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn layer(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    /// `S ∪ {i}`; errors when `i` is already present.
    pub fn with(&self, i: usize) -> Result<Self> {
        match self.members.binary_search(&i) {
            Ok(_) => Err(Error::DuplicateMember(i)),
            Err(pos) => {
                let mut members = Vec::with_capacity(self.members.len() + 1);
                members.extend_from_slice(&self.members[..pos]);
                members.push(i);
                members.extend_from_slice(&self.members[pos..]);
                Ok(Self { members })
            }
        }
    }

    pub fn without(&self, i: usize) -> Self {
        Self {
            members: self.members.iter().copied().filter(|&m| m != i).collect(),
        }
    }

    /// Bitmask over the first 64 players, for small-game enumeration.
    pub fn mask(&self) -> u64 {
        self.members.iter().fold(0u64, |m, &i| m | (1u64 << i))
    }

    pub fn from_mask(mask: u64) -> Self {
        Self {
            members: (0..64).filter(|i| mask & (1u64 << i) != 0).collect(),
        }
    }
}

impl TryFrom<Vec<usize>> for Coalition {
    type Error = Error;

    fn try_from(members: Vec<usize>) -> Result<Self> {
        Self::new(members)
    }
}

impl From<Coalition> for Vec<usize> {
    fn from(c: Coalition) -> Self {
        c.members
    }
}

/// Uniformly random size-`k` subset of `{0..n} \ {exclude}`.
pub fn sample_coalition(seeds: &SeedTree, n: usize, k: usize, exclude: usize) -> Result<Coalition> {
    if exclude >= n {
        return Err(Error::IndexOutOfRange { index: exclude, n });
    }
    if k > n - 1 {
        return Err(Error::InvalidLayer { layer: k, n });
    }
    let mut rng = seeds.rng();
    let mut members: Vec<usize> = index::sample(&mut rng, n - 1, k)
        .into_iter()
        .map(|j| if j >= exclude { j + 1 } else { j })
        .collect();
    members.sort_unstable();
    Ok(Coalition { members })
}

/// Uniformly random ordering of the coalition's members.
pub fn sample_permutation(seeds: &SeedTree, coalition: &Coalition) -> Vec<usize> {
    let mut order = coalition.members.clone();
    order.shuffle(&mut seeds.rng());
    order
}

/// Uniformly random permutation of `0..n`.
pub fn sample_full_permutation(seeds: &SeedTree, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeds.rng());
    order
}

/// Splices `i` into `seq` at a uniformly random position in `0..=len`.
pub fn insert_into_sequence(seq: &[usize], i: usize, seeds: &SeedTree) -> Result<Vec<usize>> {
    if seq.contains(&i) {
        return Err(Error::DuplicateMember(i));
    }
    let pos = seeds.rng().random_range(0..=seq.len());
    let mut out = Vec::with_capacity(seq.len() + 1);
    out.extend_from_slice(&seq[..pos]);
    out.push(i);
    out.extend_from_slice(&seq[pos..]);
    Ok(out)
}
