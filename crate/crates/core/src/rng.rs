//! Random sources for the stochastic solvers.
//!
//! Every solver draws through [`UniformSource`] so tests can substitute a
//! scripted stream. Seeded solves use [`SolverRng`] (ChaCha8), which yields
//! the same sequence on every platform for a given seed.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seedable generator used by all solvers.
pub type SolverRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SolverRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A stream of uniform draws on `[0, 1)`.
pub trait UniformSource {
    fn uniform(&mut self) -> f64;

    /// Uniform on `[lo, hi)`; returns `lo` when the interval is empty.
    fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform index in `0..n`. `n` must be non-zero.
    fn index(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }
}

impl<R: RngCore> UniformSource for R {
    #[inline]
    fn uniform(&mut self) -> f64 {
        self.random::<f64>()
    }
}
