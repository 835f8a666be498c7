//! Reproducible Gaussian streams.
//!
//! Each trajectory draws from ChaCha8 keyed by `seed` on stream `index`, so
//! ensemble members are independent and a given `(seed, index)` always
//! replays the same noise.

use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct GaussianStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        Self { rng, spare: None }
    }

    /// Uniform on the open interval `(0, 1)`.
    fn open_unit(&mut self) -> f64 {
        // 53 random bits, shifted off zero by half an ulp.
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// One standard normal variate (Box–Muller, both outputs used).
    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.open_unit();
        let u2 = self.open_unit();
        let rad = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare = Some(rad * s);
        rad * c
    }

    pub fn fill_normal<S: Scalar>(&mut self, out: &mut [S]) {
        for o in out {
            *o = S::lit(self.next_normal());
        }
    }
}
