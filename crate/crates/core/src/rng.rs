//! Named, independent random substreams derived from one master seed.
//!
//! Every consumer of randomness asks for a stream by name plus a small index
//! path (trial, block, ...). The stream seed is a SHA-256 digest of the master
//! seed, the name and the indices, so adding or removing a consumer never
//! shifts the numbers another consumer sees.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    master: u64,
}

impl SeedTree {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn stream(&self, name: &str, path: &[u64]) -> ChaCha8Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.master.to_le_bytes());
        hasher.update((name.len() as u64).to_le_bytes());
        hasher.update(name.as_bytes());
        for idx in path {
            hasher.update(idx.to_le_bytes());
        }
        ChaCha8Rng::from_seed(hasher.finalize().into())
    }

    /// A 64-bit seed for APIs that take a plain integer.
    pub fn derive_u64(&self, name: &str, path: &[u64]) -> u64 {
        self.stream(name, path).gen()
    }
}

/// One draw from CN(0, variance).
#[inline]
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(scale * re, scale * im)
}
