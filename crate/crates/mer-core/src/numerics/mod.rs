//! Dense tensors, elementary linear algebra and the seedable RNG that
//! underpin every other module.

mod rng;
mod tensor;

pub use rng::Rng;
pub use tensor::{Reduce, Tensor};

/// Fills a tensor with i.i.d. draws from Uniform(-limit, +limit), consuming
/// the generator in row-major order.
///
/// Panics if `limit <= 0`; a zero-width interval is a caller bug.
pub fn uniform_init(rng: &mut Rng, shape: &[usize], limit: f64) -> Tensor {
    assert!(limit > 0.0, "uniform_init limit must be positive, got {limit}");
    let numel: usize = shape.iter().product();
    let data: Vec<f64> = (0..numel).map(|_| rng.uniform(-limit, limit)).collect();
    Tensor::new(shape, data)
}

/// FNV-1a 64-bit hash. Used for deterministic song-id splits and config
/// provenance hashes; written out so other-language ports can match it.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100_0000_01b3);
    }
    hash
}

/// Avalanche finalizer (the SplitMix64 output mix). FNV-1a mixes its high
/// bits poorly on short inputs, so hash-derived fractions pass through this
/// first.
pub fn mix64(value: u64) -> u64 {
    let mut z = value;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_init_deterministic() {
        let a = uniform_init(&mut Rng::new(17), &[4, 5], 0.3);
        let b = uniform_init(&mut Rng::new(17), &[4, 5], 0.3);
        assert_eq!(a, b);
    }

    #[test]
    #[should_panic(expected = "limit must be positive")]
    fn uniform_init_rejects_zero_limit() {
        let _ = uniform_init(&mut Rng::new(0), &[2], 0.0);
    }

    #[test]
    fn uniform_init_tiny_limit_is_near_zero() {
        let t = uniform_init(&mut Rng::new(3), &[100], 1e-12);
        assert!(t.data().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn uniform_init_moments() {
        // 1e5 draws with limit 0.5: mean within 0.01 of 0, variance within 5%
        // of (2*0.5)^2 / 12.
        let t = uniform_init(&mut Rng::new(123), &[100_000], 0.5);
        let n = t.numel() as f64;
        let mean: f64 = t.data().iter().sum::<f64>() / n;
        let var: f64 = t.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let want_var = 1.0 / 12.0;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - want_var).abs() / want_var < 0.05, "var {var}");
    }

    #[test]
    fn fnv1a64_known_values() {
        // reference values of the FNV-1a 64-bit test vectors
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
    }
}
