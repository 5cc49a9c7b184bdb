//! Seeded random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream whose seed is
//! derived from a master seed and a stream index with SplitMix64, so
//! independent replicates can run in any order or on any thread and still
//! reproduce bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

/// One SplitMix64 step.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of stream `stream` under `master`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(stream.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// Seed for replicate `replicate` of setting `setting`.
pub fn replicate_seed(master: u64, setting: u64, replicate: u64) -> u64 {
    derive_seed(derive_seed(master, setting), replicate)
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(master: u64, index: u64) -> Rng {
    rng_from_seed(derive_seed(master, index))
}

pub fn standard_normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Student t draw as `Z / sqrt(χ²_ν / ν)`, with the chi-square built from
/// `ν` squared standard normals. Variance `ν / (ν − 2)` for `ν > 2`.
pub fn student_t(rng: &mut Rng, dof: u32) -> f64 {
    let z = standard_normal(rng);
    let mut chi2 = 0.0;
    for _ in 0..dof {
        let g = standard_normal(rng);
        chi2 += g * g;
    }
    z / libm::sqrt(chi2 / dof as f64)
}

/// Innovation law of the simulation design: t with 6 degrees of freedom, variance 1.5.
pub fn t6(rng: &mut Rng) -> f64 {
    student_t(rng, 6)
}
