//! Reproducible random numbers: one ChaCha12 generator per purpose, derived
//! from a single 64-bit seed. Separate substreams keep e.g. the regressor
//! draws identical when only the outlier fraction changes.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Substream identifiers, one per generation purpose.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Regressors = 0,
    Truth = 1,
    OutlierLocations = 2,
    OutlierValues = 3,
    Noise = 4,
    Inputs = 5,
    SystemCoefficients = 6,
}

/// Counter-based generator on substream `stream` of `seed`.
pub fn substream(seed: u64, stream: Stream) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Stable 64-bit mix (splitmix64 finalizer chain) used to derive per-trial
/// seeds from a master seed and structural coordinates.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mut h = master ^ 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        h = h.wrapping_add(p).wrapping_add(0x9e37_79b9_7f4a_7c15);
        h = splitmix(h);
    }
    splitmix(h)
}

fn splitmix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn substreams_are_independent_and_reproducible() {
        let mut a1 = substream(7, Stream::Regressors);
        let mut a2 = substream(7, Stream::Regressors);
        let mut b = substream(7, Stream::Noise);
        let x1: f64 = a1.gen();
        let x2: f64 = a2.gen();
        let y: f64 = b.gen();
        assert_eq!(x1, x2);
        assert_ne!(x1, y);
    }

    #[test]
    fn derive_seed_depends_on_every_part() {
        let s = derive_seed(1, &[2, 3, 4]);
        assert_ne!(s, derive_seed(1, &[2, 3, 5]));
        assert_ne!(s, derive_seed(1, &[2, 4, 4]));
        assert_ne!(s, derive_seed(2, &[2, 3, 4]));
        assert_eq!(s, derive_seed(1, &[2, 3, 4]));
    }
}
