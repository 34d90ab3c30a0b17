//! Reproducible standard-normal streams.
//!
//! Uniforms come from ChaCha8 keyed by `seed_from_u64(seed)`; each path gets
//! its own ChaCha stream id, `mix(stream, path_index)`. Normals are produced in
//! pairs by the Box-Muller transform evaluated with `libm`, so the sequence is
//! the same on every platform.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RngAlgorithm {
    /// ChaCha8 uniforms, Box-Muller normals.
    #[default]
    Chacha8BoxMuller,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSpec {
    pub algorithm: RngAlgorithm,
    pub seed: u64,
    pub stream: u64,
}

impl RngSpec {
    pub const DEFAULT_SEED: u64 = 20_240_917;

    pub fn new(seed: u64, stream: u64) -> Self {
        Self {
            algorithm: RngAlgorithm::Chacha8BoxMuller,
            seed,
            stream,
        }
    }

    /// Generator for one path.
    pub fn normals(&self, path_index: u64) -> NormalStream {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(mix(self.stream, path_index));
        NormalStream { rng, spare: None }
    }
}

impl Default for RngSpec {
    fn default() -> Self {
        Self::new(Self::DEFAULT_SEED, 0)
    }
}

/// SplitMix64 finalizer applied to the combined stream and path index.
pub fn mix(stream: u64, path_index: u64) -> u64 {
    let mut z = stream
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(path_index)
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub struct NormalStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalStream {
    /// Uniform on `(0, 1]` with 53 random bits.
    fn open_unit(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    fn half_open_unit(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.open_unit();
        let u2 = self.half_open_unit();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * libm::sin(theta));
        r * libm::cos(theta)
    }
}
