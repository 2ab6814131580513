//! Counter-based random stream derivation.
//!
//! Every random quantity in a simulation comes from a ChaCha8 generator
//! whose 256-bit key is the tuple `(seed, domain, a, b)`. Distinct tuples give
//! independent streams, and a stream's contents depend only on its tuple, so
//! work can be scheduled on any number of threads in any order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::numkit::C64;

/// Separates streams that share a seed but feed different consumers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    SisoTaps = 0x5153_4953_4f54_4150,
    MimoEntries = 0x4d49_4d4f_454e_5452,
    Link = 0x4c49_4e4b_424c_4f43,
}

pub fn derive(seed: u64, domain: Domain, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (chunk, word) in key.chunks_exact_mut(8).zip([seed, domain as u64, a, b]) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Circularly-symmetric complex Gaussian sample with `E|z|² = variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let scale = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(scale * re, scale * im)
}
