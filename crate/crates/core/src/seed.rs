//! Hierarchical, order-independent seed derivation.
//!
//! A [`SeedTree`] node is identified by the master seed and a path of
//! `(label, index)` pairs. Its 256-bit key is a SHA-256 chain over that path
//! and seeds a ChaCha8 stream, so a node's randomness depends only on where it
//! sits in the tree and never on which worker reaches it first.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SeedTree {
    master_seed: u64,
    path: Vec<(&'static str, u64)>,
    key: [u8; 32],
}

impl SeedTree {
    pub fn new(master_seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"dshap/seed-tree/v1");
        h.update(master_seed.to_le_bytes());
        Self {
            master_seed,
            path: Vec::new(),
            key: h.finalize().into(),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path(&self) -> &[(&'static str, u64)] {
        &self.path
    }

    pub fn child(&self, label: &'static str, index: u64) -> Self {
        let mut h = self.hasher(label);
        h.update(index.to_le_bytes());
        self.derive(label, index, h)
    }

    /// Child keyed by an index list, e.g. the members of a coalition. The
    /// recorded path index is the first 8 bytes of the digest.
    pub fn child_of_slice(&self, label: &'static str, items: &[usize]) -> Self {
        let mut h = self.hasher(label);
        h.update((items.len() as u64).to_le_bytes());
        for &x in items {
            h.update((x as u64).to_le_bytes());
        }
        let key: [u8; 32] = h.finalize().into();
        let index = u64::from_le_bytes(key[..8].try_into().expect("8 bytes"));
        let mut path = self.path.clone();
        path.push((label, index));
        Self {
            master_seed: self.master_seed,
            path,
            key,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.key)
    }

    fn hasher(&self, label: &str) -> Sha256 {
        let mut h = Sha256::new();
        h.update(self.key);
        h.update((label.len() as u64).to_le_bytes());
        h.update(label.as_bytes());
        h
    }

    fn derive(&self, label: &'static str, index: u64, h: Sha256) -> Self {
        let mut path = self.path.clone();
        path.push((label, index));
        Self {
            master_seed: self.master_seed,
            path,
            key: h.finalize().into(),
        }
    }
}

impl fmt::Debug for SeedTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SeedTree({}", self.master_seed)?;
        for (label, index) in &self.path {
            write!(f, "/{label}:{index}")?;
        }
        write!(f, ")")
    }
}
