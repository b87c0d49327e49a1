//! Replayable random streams.
//!
//! Every random quantity in the crate comes from a [`DrawStream`]: ChaCha20
//! keyed from a 64-bit seed via `rand_core`'s `seed_from_u64` expansion, with
//! the ChaCha stream id selecting the purpose (see [`streams`]). The stream
//! position is tracked as a count of 64-bit draws, so a stream can be resumed
//! exactly from `(seed, stream, draws)`.
//!
//! Derived variates:
//!
//! * uniform `[0, 1)`: `(x >> 11) * 2^-53` for one draw `x`.
//! * standard normal: Box-Muller on two uniforms `u1, u2` taken in that order,
//!   `sqrt(-2 ln(1 - u1)) * cos(2π u2)`. The sine branch is discarded so each
//!   normal costs exactly two draws.
//! * phase in `[0, 2π)`: `2π u`, mapped to 0 if rounding lands on `2π`.

use std::f64::consts::TAU;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

/// ChaCha stream ids used by the crate.
pub mod streams {
    /// Encoder bases and phases, including regeneration.
    pub const ENCODER: u64 = 0;
    /// Model perturbation.
    pub const NOISE: u64 = 1;
    /// Per-epoch shuffling.
    pub const SHUFFLE: u64 = 2;
    /// Dataset splits.
    pub const SPLIT: u64 = 3;
    /// Synthetic data.
    pub const SYNTH: u64 = 4;
}

#[derive(Clone, Debug)]
pub struct DrawStream {
    rng: ChaCha20Rng,
    draws: u64,
}

impl DrawStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self::resume(seed, stream, 0)
    }

    /// Positions the stream after `draws` 64-bit draws.
    pub fn resume(seed: u64, stream: u64, draws: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        // A 64-bit draw consumes two 32-bit words.
        rng.set_word_pos(u128::from(draws) * 2);
        Self { rng, draws }
    }

    pub fn draws(&self) -> u64 {
        self.draws
    }

    pub fn next_u64(&mut self) -> u64 {
        self.draws += 1;
        self.rng.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn gaussian(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (TAU * u2).cos()
    }

    pub fn phase(&mut self) -> f64 {
        let p = TAU * self.uniform();
        if p >= TAU {
            0.0
        } else {
            p
        }
    }

    /// Uniform integer in `[0, bound)` by rejection.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % bound;
            }
        }
    }

    /// Fisher-Yates shuffle, drawing from the back.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    /// `count` distinct indices from `0..total`, in draw order.
    pub fn sample_indices(&mut self, total: usize, count: usize) -> Vec<usize> {
        assert!(count <= total);
        let mut pool: Vec<usize> = (0..total).collect();
        for i in 0..count {
            let j = i + self.below((total - i) as u64) as usize;
            pool.swap(i, j);
        }
        pool.truncate(count);
        pool
    }
}
