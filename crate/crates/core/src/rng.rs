//! Counter-derived random sub-streams.
//!
//! Every random draw in the simulator comes from a stream keyed by the
//! master seed plus a path of labels (drop index, purpose, chunk, ...), so a
//! result never depends on the order in which work items are scheduled.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SimRng = ChaCha8Rng;

/// Stream purposes, used as labels in seed paths.
pub mod purpose {
    pub const DEPLOY: u64 = 1;
    pub const ALAMOUTI_MC: u64 = 2;
    pub const BASELINE_MC: u64 = 3;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `labels` into `seed`.
pub fn derive_seed(seed: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(splitmix64(seed), |acc, &l| splitmix64(acc ^ splitmix64(l)))
}

pub fn stream(seed: u64, labels: &[u64]) -> SimRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, labels))
}

/// One draw of CN(0, 1).
#[inline]
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}
