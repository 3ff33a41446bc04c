//! Deterministic random streams.
//!
//! Every stochastic draw in the crate comes from a ChaCha20 generator keyed by
//! the master seed, with the 64-bit ChaCha stream id set to
//! `(tag << 48) | index`. Tags name the kind of draw ([`Stream`]) and `index`
//! is a counter such as the OFDM symbol, the receive antenna or the Monte
//! Carlo trial. Streams never overlap, so results do not depend on how work
//! is split between threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::C64;

/// Purpose tags for child streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Bits = 1,
    RadarNoise = 2,
    Targets = 3,
    Channel = 4,
    CommNoise = 5,
    Trial = 6,
    Precoder = 7,
    Scatterers = 8,
    TimeNoise = 9,
}

const INDEX_BITS: u32 = 48;

/// Child generator for `(stream, index)` under `master`.
pub fn child_rng(master: u64, stream: Stream, index: u64) -> ChaCha20Rng {
    debug_assert!(index < (1 << INDEX_BITS));
    let mut rng = ChaCha20Rng::seed_from_u64(master);
    rng.set_stream(((stream as u64) << INDEX_BITS) | (index & ((1 << INDEX_BITS) - 1)));
    rng
}

/// Seed for Monte Carlo trial `trial`, derived with a SplitMix64 finalizer.
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    let mut z = master ^ trial.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Circular complex Gaussian sample with total variance `var`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

/// Complex Gaussian with the given mean and total variance, used for target
/// and channel coefficients.
pub fn complex_coefficient<R: Rng + ?Sized>(rng: &mut R, mean: C64, var: f64) -> C64 {
    mean + complex_normal(rng, var)
}

/// Uniformly random bits as 0/1 bytes.
pub fn random_bits<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.random::<bool>() as u8).collect()
}
