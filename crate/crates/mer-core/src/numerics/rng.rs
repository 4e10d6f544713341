//! Deterministic random number generator with a fully documented recurrence.
//!
//! Ports in other languages must be able to reproduce every random stream
//! bit-exactly, so the generator is written out here instead of delegating to
//! a library whose algorithm may change between versions.
//!
//! Seeding: the user seed is passed through one round of SplitMix64,
//!
//! ```text
//! z  = seed + 0x9E3779B97F4A7C15
//! z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9
//! z ^= z >> 27;  z *= 0x94D049BB133111EB
//! z ^= z >> 31
//! ```
//!
//! (all arithmetic mod 2^64). If the result is zero it is replaced by the
//! SplitMix64 increment constant, since the xorshift state must be nonzero.
//!
//! Stream: xorshift64* (Vigna 2016),
//!
//! ```text
//! s ^= s >> 12;  s ^= s << 25;  s ^= s >> 27
//! output = s * 0x2545F4914F6CDD1D
//! ```
//!
//! `next_f64` maps the top 53 bits of the output onto [0, 1):
//! `(output >> 11) * 2^-53`.

const SPLITMIX_INC: u64 = 0x9E37_79B9_7F4A_7C15;
const XORSHIFT_MUL: u64 = 0x2545_F491_4F6C_DD1D;

fn splitmix64(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(SPLITMIX_INC);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seedable xorshift64* generator. Identical seeds produce identical streams.
///
/// Single-owner by design: the struct is `Send` but not shared, the caller
/// threads one generator through a computation to keep draws reproducible.
#[derive(Debug, Clone)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        let mut state = splitmix64(seed);
        if state == 0 {
            state = SPLITMIX_INC;
        }
        Rng { state }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut s = self.state;
        s ^= s >> 12;
        s ^= s << 25;
        s ^= s >> 27;
        self.state = s;
        s.wrapping_mul(XORSHIFT_MUL)
    }

    /// Uniform draw in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform index in [0, n). Uses a plain modulo; the bias is below
    /// n / 2^64, irrelevant at the sizes this crate draws.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        (self.next_u64() % n as u64) as usize
    }

    /// In-place Fisher-Yates shuffle driven by this generator.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
