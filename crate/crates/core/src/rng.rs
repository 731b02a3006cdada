//! Reproducible random streams for parallel Monte Carlo.
//!
//! Every consumer of randomness (a sensor's observations, a sensor's
//! channel, an oracle) gets its own ChaCha8 stream derived from the
//! experiment seed plus a key tuple such as `(trial, sensor, role)`. The
//! derivation is a splitmix64 expansion, so streams are independent of
//! execution order and thread count: trial 17's draws are the same whether
//! it runs first, last, or on another worker.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::fmath;
use crate::Complex64;

/// splitmix64 step; the de-facto standard seed expander.
#[inline]
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent ChaCha8 stream from a base seed and a key tuple.
///
/// The key parts are folded into the seed one by one through splitmix64,
/// then expanded to the full 256-bit ChaCha seed. Distinct key tuples give
/// (for all practical purposes) uncorrelated streams.
pub fn substream(seed: u64, key: &[u64]) -> ChaCha8Rng {
    let mut state = splitmix64(seed ^ 0x5e9d_e7ec_7ab1_0c3d);
    for &k in key {
        state = splitmix64(state ^ splitmix64(k));
    }
    let mut bytes = [0u8; 32];
    for chunk in bytes.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}

/// Uniform draw in `(0, 1]`; never returns zero, safe for `ln`.
#[inline]
pub fn uniform_open01(rng: &mut impl RngCore) -> f64 {
    (((rng.next_u64() >> 11) + 1) as f64) * (1.0 / 9007199254740992.0)
}

/// Uniform draw in `[0, 1)`.
#[inline]
pub fn uniform01(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64) * (1.0 / 9007199254740992.0)
}

/// One Box-Muller pair of independent standard normal variates.
#[inline]
pub fn standard_normal_pair(rng: &mut impl RngCore) -> (f64, f64) {
    let u1 = uniform_open01(rng);
    let u2 = uniform01(rng);
    let r = fmath::sqrt(-2.0 * fmath::ln(u1));
    let theta = core::f64::consts::TAU * u2;
    (r * fmath::cos(theta), r * fmath::sin(theta))
}

/// Circularly symmetric complex Gaussian with the given mean and *total*
/// variance (each real component carries `total_var / 2`).
#[inline]
pub fn complex_gaussian(rng: &mut impl RngCore, mean: Complex64, total_var: f64) -> Complex64 {
    let (n1, n2) = standard_normal_pair(rng);
    let s = fmath::sqrt(total_var * 0.5);
    Complex64::new(mean.re + s * n1, mean.im + s * n2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substreams_are_deterministic_and_distinct() {
        let mut a = substream(42, &[1, 2, 3]);
        let mut b = substream(42, &[1, 2, 3]);
        let mut c = substream(42, &[1, 2, 4]);
        let (xa, xb, xc) = (a.next_u64(), b.next_u64(), c.next_u64());
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }

    #[test]
    fn complex_gaussian_moments() {
        let mut rng = substream(7, &[0]);
        let n = 200_000;
        let (mut sum, mut sq) = (Complex64::new(0.0, 0.0), 0.0);
        for _ in 0..n {
            let z = complex_gaussian(&mut rng, Complex64::new(1.0, -2.0), 3.0);
            sum += z;
            sq += (z - Complex64::new(1.0, -2.0)).norm_sqr();
        }
        let mean = sum / n as f64;
        assert!((mean.re - 1.0).abs() < 0.02, "mean.re {}", mean.re);
        assert!((mean.im + 2.0).abs() < 0.02, "mean.im {}", mean.im);
        assert!((sq / n as f64 - 3.0).abs() < 0.05, "var {}", sq / n as f64);
    }

    #[test]
    fn uniform_open01_is_in_range() {
        let mut rng = substream(0, &[]);
        for _ in 0..10_000 {
            let u = uniform_open01(&mut rng);
            assert!(u > 0.0 && u <= 1.0);
        }
    }
}
