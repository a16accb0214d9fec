//! Seeded, splittable random streams.
//!
//! Each [`RngState`] is a ChaCha8 keystream addressed by `(seed, stream)`:
//! the seed selects the key and the stream id selects one of 2⁶⁴ disjoint
//! keystreams, so datasets, shuffles and initializations for different
//! trials never share draws regardless of scheduling.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{domain, Result};

#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64, stream: StreamId) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream.0);
        Self {
            seed,
            stream: stream.0,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Number of 32-bit words consumed so far.
    pub fn position(&self) -> u128 {
        self.rng.get_word_pos()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on [0, 1) with 53 random bits.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(domain("uniform", format!("empty range [{lo}, {hi})")));
        }
        let x = lo + (hi - lo) * self.unit();
        // rounding can land exactly on hi for wide ranges
        Ok(if x < hi { x } else { lo })
    }

    /// Standard normal draw by Box–Muller; consumes exactly two uniforms.
    pub fn std_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.unit();
        let u2 = self.unit();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform index in 0..n (n > 0), rejection-free multiply-shift.
    pub fn index(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }
}

/// What a stream is used for; part of the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum StreamKind {
    TrainData = 1,
    TestData = 2,
    Shuffle = 3,
    Init = 4,
    Unbiasedness = 5,
    Bootstrap = 6,
    Misc = 7,
}

/// 64-bit stream identifier: `kind:8 | mode:8 | trial:16 | size:32`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamId(pub u64);

impl StreamId {
    pub fn new(kind: StreamKind, size: u64, trial: u32, mode: u8) -> Self {
        debug_assert!(size <= u32::MAX as u64 && trial <= u16::MAX as u32);
        StreamId(
            (kind as u64) << 56
                | (mode as u64) << 48
                | ((trial as u64) & 0xffff) << 32
                | (size & 0xffff_ffff),
        )
    }

    pub fn of(kind: StreamKind) -> Self {
        Self::new(kind, 0, 0, 0)
    }
}
