//! SplitMix64 used as a counter-based generator.
//!
//! Output `i` (1-based) is `mix64(seed + i * GOLDEN_GAMMA)` with wrapping
//! arithmetic, which is exactly the sequence of the reference SplitMix64
//! generator started from state `seed`. Any position can be computed
//! directly, so other implementations only need `mix64` to reproduce a
//! stream.

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The SplitMix64 finalizer (variant 13 of Stafford's mixers).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitMix64 {
    seed: u64,
    counter: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { seed, counter: 0 }
    }

    /// Number of outputs drawn so far.
    pub fn position(&self) -> u64 {
        self.counter
    }

    /// Output at 1-based position `i`, independent of the current state.
    pub fn at(seed: u64, i: u64) -> u64 {
        mix64(seed.wrapping_add(i.wrapping_mul(GOLDEN_GAMMA)))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        Self::at(self.seed, self.counter)
    }

    /// Uniform double strictly inside (0, 1): the top 52 bits, offset by half
    /// a grid step so both ends stay representable.
    #[inline]
    pub fn next_open01(&mut self) -> f64 {
        open01(self.next_u64())
    }
}

#[inline]
pub fn open01(x: u64) -> f64 {
    ((x >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Seed for trial `index` of an experiment with `base_seed`.
pub fn derive_seed(base_seed: u64, index: u64) -> u64 {
    mix64(base_seed ^ mix64(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}
