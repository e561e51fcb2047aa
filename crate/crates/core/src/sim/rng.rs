//! Deterministic standard normal streams.
//!
//! Each `(seed, stream)` pair selects an independent ChaCha8 keystream; the
//! block counter makes draw `k` a pure function of `(seed, stream, k)`, so
//! the values do not depend on thread scheduling. Uniforms use the top 53
//! bits of each word shifted to the open interval and are mapped to normals
//! by the inverse normal CDF.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use statrs::distribution::{ContinuousCDF, Normal};

pub struct NormalStream {
    rng: ChaCha8Rng,
    dist: Normal,
}

impl NormalStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self {
            rng,
            dist: Normal::new(0.0, 1.0).expect("standard normal"),
        }
    }

    /// Uniform on `(0, 1)`, never exactly 0 or 1.
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    }

    pub fn normal(&mut self) -> f64 {
        let u = self.uniform();
        self.dist.inverse_cdf(u)
    }

    pub fn normals(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }
}
