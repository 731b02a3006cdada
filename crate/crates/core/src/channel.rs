//! Sensor-to-fusion-center links: signaling levels and channel models.
//!
//! A one-bit message is mapped to a complex transmission level (`level_a`
//! for `+1`, `level_b` for `-1`) and then pushed through one of six channel
//! models. Discrete channels act on the bit itself; continuous channels act
//! on the transmitted symbol with a per-message channel gain and additive
//! circular complex Gaussian noise. All variances are *total* variances
//! (each real component carries half), which keeps the LLR exponents of the
//! fusion rules free of stray factors of two.

use rand_core::RngCore;

use crate::detection::Bit;
use crate::rng::{complex_gaussian, uniform01};
use crate::Complex64;

/// Errors from link-side operations.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelError {
    /// Input variant does not match the channel family (bit vs symbol).
    InputMismatch,
    InvalidParameter(&'static str),
}

impl core::fmt::Display for ChannelError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ChannelError::InputMismatch => write!(f, "channel/input mismatch"),
            ChannelError::InvalidParameter(p) => write!(f, "invalid parameter: {p}"),
        }
    }
}

impl core::error::Error for ChannelError {}

/// Transmission levels with peak and floor power constraints.
///
/// `peak_amplitude` (`P`) bounds both levels from above in magnitude;
/// `floor_amplitude` (`Q`) bounds them from below, ensuring an incoming
/// message is detectable at all. Antipodal signaling (`a = -b`, `|a| = P`)
/// is the usual choice when received signals differ in mean; `|a| = P`,
/// `|b| = Q` maximizes the variance separation under fading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Signaling {
    level_a: Complex64,
    level_b: Complex64,
    peak_amplitude: f64,
    floor_amplitude: f64,
}

impl Signaling {
    pub fn new(
        level_a: Complex64,
        level_b: Complex64,
        peak_amplitude: f64,
        floor_amplitude: f64,
    ) -> Result<Self, ChannelError> {
        if !(peak_amplitude > 0.0) || !peak_amplitude.is_finite() {
            return Err(ChannelError::InvalidParameter("peak_amplitude"));
        }
        if !(floor_amplitude >= 0.0) || floor_amplitude > peak_amplitude {
            return Err(ChannelError::InvalidParameter("floor_amplitude"));
        }
        if !level_a.is_finite() || !level_b.is_finite() {
            return Err(ChannelError::InvalidParameter("transmission level"));
        }
        let (pa, pb) = (level_a.norm_sqr(), level_b.norm_sqr());
        let p2 = peak_amplitude * peak_amplitude;
        let q2 = floor_amplitude * floor_amplitude;
        // Exact constraint checks with a relative tolerance for round-trip
        // constructed levels like sqrt(P^2).
        let tol = 1e-12 * (1.0 + p2);
        if pa > p2 + tol || pb > p2 + tol {
            return Err(ChannelError::InvalidParameter("peak power exceeded"));
        }
        if pa + tol < q2 || pb + tol < q2 {
            return Err(ChannelError::InvalidParameter("floor power violated"));
        }
        Ok(Self {
            level_a,
            level_b,
            peak_amplitude,
            floor_amplitude,
        })
    }

    /// Antipodal levels at full peak power: `a = P`, `b = -P`.
    pub fn antipodal(peak_amplitude: f64) -> Result<Self, ChannelError> {
        Self::new(
            Complex64::new(peak_amplitude, 0.0),
            Complex64::new(-peak_amplitude, 0.0),
            peak_amplitude,
            0.0,
        )
    }

    /// On-off-keying-like levels: `|a| = P`, `|b| = Q`, both real positive.
    pub fn on_off(peak_amplitude: f64, floor_amplitude: f64) -> Result<Self, ChannelError> {
        Self::new(
            Complex64::new(peak_amplitude, 0.0),
            Complex64::new(floor_amplitude, 0.0),
            peak_amplitude,
            floor_amplitude,
        )
    }

    pub fn level_a(&self) -> Complex64 {
        self.level_a
    }

    pub fn level_b(&self) -> Complex64 {
        self.level_b
    }

    pub fn peak_amplitude(&self) -> f64 {
        self.peak_amplitude
    }

    pub fn floor_amplitude(&self) -> f64 {
        self.floor_amplitude
    }
}

/// Maps a bit to its transmission level.
pub fn transmit(bit: Bit, signaling: &Signaling) -> Complex64 {
    match bit {
        Bit::Plus => signaling.level_a,
        Bit::Minus => signaling.level_b,
    }
}

/// The supported sensor-to-fusion-center channel models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelModel {
    /// Transparent: the bit arrives unchanged.
    Ideal,
    /// Binary erasure: the bit is lost with probability `epsilon`.
    Bec { epsilon: f64 },
    /// Binary symmetric: the bit is flipped with probability `epsilon`.
    /// Restricted to `epsilon < 0.5` so received bits keep their sign
    /// information.
    Bsc { epsilon: f64 },
    /// Additive white Gaussian noise with a known constant complex gain.
    Awgn { gain: Complex64, noise_var: f64 },
    /// Rayleigh fading: zero-mean complex Gaussian gain, redrawn per
    /// message.
    Rayleigh { gain_var: f64, noise_var: f64 },
    /// Rician fading: complex Gaussian gain with nonzero mean, redrawn per
    /// message.
    Rician {
        gain_mean: Complex64,
        gain_var: f64,
        noise_var: f64,
    },
}

impl ChannelModel {
    pub fn validate(&self) -> Result<(), ChannelError> {
        match *self {
            ChannelModel::Ideal => Ok(()),
            ChannelModel::Bec { epsilon } => {
                if (0.0..=1.0).contains(&epsilon) {
                    Ok(())
                } else {
                    Err(ChannelError::InvalidParameter("bec epsilon"))
                }
            }
            ChannelModel::Bsc { epsilon } => {
                if (0.0..0.5).contains(&epsilon) {
                    Ok(())
                } else {
                    Err(ChannelError::InvalidParameter("bsc epsilon"))
                }
            }
            ChannelModel::Awgn { gain, noise_var } => {
                if !gain.is_finite() {
                    return Err(ChannelError::InvalidParameter("awgn gain"));
                }
                if noise_var > 0.0 && noise_var.is_finite() {
                    Ok(())
                } else {
                    Err(ChannelError::InvalidParameter("awgn noise_var"))
                }
            }
            ChannelModel::Rayleigh {
                gain_var,
                noise_var,
            } => {
                if !(gain_var > 0.0) || !gain_var.is_finite() {
                    return Err(ChannelError::InvalidParameter("rayleigh gain_var"));
                }
                if noise_var > 0.0 && noise_var.is_finite() {
                    Ok(())
                } else {
                    Err(ChannelError::InvalidParameter("rayleigh noise_var"))
                }
            }
            ChannelModel::Rician {
                gain_mean,
                gain_var,
                noise_var,
            } => {
                if !gain_mean.is_finite() {
                    return Err(ChannelError::InvalidParameter("rician gain_mean"));
                }
                if !(gain_var >= 0.0) || !gain_var.is_finite() {
                    return Err(ChannelError::InvalidParameter("rician gain_var"));
                }
                if noise_var > 0.0 && noise_var.is_finite() {
                    Ok(())
                } else {
                    Err(ChannelError::InvalidParameter("rician noise_var"))
                }
            }
        }
    }

    /// True for the bit-in / bit-or-erasure-out families.
    pub fn is_discrete(&self) -> bool {
        matches!(
            self,
            ChannelModel::Ideal | ChannelModel::Bec { .. } | ChannelModel::Bsc { .. }
        )
    }
}

/// What the channel delivers to the fusion center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReceivedSignal {
    Binary(Bit),
    Erased,
    Complex(Complex64),
}

/// Channel input: a raw bit for discrete channels, a transmitted symbol for
/// continuous ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelInput {
    Bit(Bit),
    Symbol(Complex64),
}

/// Pushes one transmission through the channel.
///
/// Channel gains and noise are drawn fresh per call: fading is
/// block-constant within a message and independent across messages.
pub fn propagate(
    input: ChannelInput,
    channel: &ChannelModel,
    rng: &mut impl RngCore,
) -> Result<ReceivedSignal, ChannelError> {
    channel.validate()?;
    match (channel, input) {
        (ChannelModel::Ideal, ChannelInput::Bit(b)) => Ok(ReceivedSignal::Binary(b)),
        (ChannelModel::Bec { epsilon }, ChannelInput::Bit(b)) => {
            if uniform01(rng) < *epsilon {
                Ok(ReceivedSignal::Erased)
            } else {
                Ok(ReceivedSignal::Binary(b))
            }
        }
        (ChannelModel::Bsc { epsilon }, ChannelInput::Bit(b)) => {
            if uniform01(rng) < *epsilon {
                Ok(ReceivedSignal::Binary(b.flipped()))
            } else {
                Ok(ReceivedSignal::Binary(b))
            }
        }
        (ChannelModel::Awgn { gain, noise_var }, ChannelInput::Symbol(x)) => {
            let z = complex_gaussian(rng, gain * x, *noise_var);
            Ok(ReceivedSignal::Complex(z))
        }
        (
            ChannelModel::Rayleigh {
                gain_var,
                noise_var,
            },
            ChannelInput::Symbol(x),
        ) => {
            let h = complex_gaussian(rng, Complex64::new(0.0, 0.0), *gain_var);
            let z = complex_gaussian(rng, h * x, *noise_var);
            Ok(ReceivedSignal::Complex(z))
        }
        (
            ChannelModel::Rician {
                gain_mean,
                gain_var,
                noise_var,
            },
            ChannelInput::Symbol(x),
        ) => {
            let h = complex_gaussian(rng, *gain_mean, *gain_var);
            let z = complex_gaussian(rng, h * x, *noise_var);
            Ok(ReceivedSignal::Complex(z))
        }
        _ => Err(ChannelError::InputMismatch),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn transmit_picks_levels() {
        let s = Signaling::new(
            Complex64::new(3.0, 0.0),
            Complex64::new(-3.0, 0.0),
            3.0,
            0.0,
        )
        .unwrap();
        assert_eq!(transmit(Bit::Plus, &s), Complex64::new(3.0, 0.0));
        assert_eq!(transmit(Bit::Minus, &s), Complex64::new(-3.0, 0.0));

        let p = 10.0_f64;
        let anti = Signaling::antipodal(p).unwrap();
        assert_eq!(transmit(Bit::Minus, &anti), Complex64::new(-10.0, 0.0));

        let ook = Signaling::on_off(10.0_f64.sqrt(), 1.0).unwrap();
        assert!((transmit(Bit::Minus, &ook).norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn signaling_rejects_constraint_violations() {
        let a = Complex64::new(4.0, 0.0);
        let b = Complex64::new(-1.0, 0.0);
        assert!(Signaling::new(a, b, 3.0, 0.0).is_err()); // peak exceeded
        assert!(Signaling::new(a, b, 4.0, 2.0).is_err()); // floor violated
        assert!(Signaling::new(a, b, 4.0, 5.0).is_err()); // Q > P
        assert!(Signaling::new(a, b, 4.0, 1.0).is_ok());
    }

    #[test]
    fn bec_zero_is_transparent() {
        let ch = ChannelModel::Bec { epsilon: 0.0 };
        let mut rng = substream(5, &[0]);
        for _ in 0..100 {
            let out = propagate(ChannelInput::Bit(Bit::Plus), &ch, &mut rng).unwrap();
            assert_eq!(out, ReceivedSignal::Binary(Bit::Plus));
        }
    }

    #[test]
    fn bsc_flip_fraction_matches_epsilon() {
        let ch = ChannelModel::Bsc { epsilon: 0.1 };
        let mut rng = substream(6, &[0]);
        let n = 100_000;
        let mut flips = 0;
        for _ in 0..n {
            match propagate(ChannelInput::Bit(Bit::Plus), &ch, &mut rng).unwrap() {
                ReceivedSignal::Binary(Bit::Minus) => flips += 1,
                ReceivedSignal::Binary(Bit::Plus) => {}
                _ => panic!("bsc emits bits"),
            }
        }
        let p = flips as f64 / n as f64;
        let se = (0.1 * 0.9 / n as f64).sqrt();
        assert!((p - 0.1).abs() <= 3.0 * se, "flip fraction {p}");
    }

    #[test]
    fn awgn_noiseless_limit() {
        let ch = ChannelModel::Awgn {
            gain: Complex64::new(1.0, 0.0),
            noise_var: 1e-18,
        };
        let a = Complex64::new(2.0, 1.0);
        let mut rng = substream(7, &[0]);
        match propagate(ChannelInput::Symbol(a), &ch, &mut rng).unwrap() {
            ReceivedSignal::Complex(z) => assert!((z - a).norm_sqr().sqrt() < 6e-9),
            _ => panic!("awgn emits symbols"),
        }
    }

    #[test]
    fn sample_moments_match_channel_statistics() {
        let x = Complex64::new(2.0, -1.0);
        let n = 100_000usize;
        let nf = n as f64;

        // AWGN: mean h*x, variance sigma^2.
        let (h, s2) = (Complex64::new(0.5, 0.25), 0.8);
        let ch = ChannelModel::Awgn {
            gain: h,
            noise_var: s2,
        };
        let mut rng = substream(8, &[1]);
        let mut mean = Complex64::new(0.0, 0.0);
        let mut var = 0.0;
        for _ in 0..n {
            if let ReceivedSignal::Complex(z) =
                propagate(ChannelInput::Symbol(x), &ch, &mut rng).unwrap()
            {
                mean += z;
                var += (z - h * x).norm_sqr();
            }
        }
        mean /= nf;
        var /= nf;
        let se_mean = (s2 / nf).sqrt();
        assert!((mean - h * x).norm_sqr().sqrt() < 4.0 * se_mean);
        assert!((var - s2).abs() < 4.0 * s2 * (2.0 / nf).sqrt());

        // Rayleigh: mean 0, variance |x|^2 sh2 + s2.
        let (sh2, s2) = (0.6, 0.4);
        let ch = ChannelModel::Rayleigh {
            gain_var: sh2,
            noise_var: s2,
        };
        let tot = x.norm_sqr() * sh2 + s2;
        let mut rng = substream(8, &[2]);
        let mut mean = Complex64::new(0.0, 0.0);
        let mut var = 0.0;
        for _ in 0..n {
            if let ReceivedSignal::Complex(z) =
                propagate(ChannelInput::Symbol(x), &ch, &mut rng).unwrap()
            {
                mean += z;
                var += z.norm_sqr();
            }
        }
        mean /= nf;
        var /= nf;
        assert!(
            mean.norm_sqr().sqrt() < 4.0 * (tot / nf).sqrt(),
            "rayleigh mean {mean}"
        );
        // |z|^2 is exponential with std = mean, so the variance estimate has
        // std error tot/sqrt(n).
        assert!(
            (var - tot).abs() < 4.0 * tot / nf.sqrt(),
            "rayleigh var {var} vs {tot}"
        );

        // Rician: mean mu*x, variance |x|^2 sh2 + s2.
        let mu = Complex64::new(0.3, 0.7);
        let ch = ChannelModel::Rician {
            gain_mean: mu,
            gain_var: sh2,
            noise_var: s2,
        };
        let mut rng = substream(8, &[3]);
        let mut mean = Complex64::new(0.0, 0.0);
        let mut var = 0.0;
        for _ in 0..n {
            if let ReceivedSignal::Complex(z) =
                propagate(ChannelInput::Symbol(x), &ch, &mut rng).unwrap()
            {
                mean += z;
                var += (z - mu * x).norm_sqr();
            }
        }
        mean /= nf;
        var /= nf;
        assert!((mean - mu * x).norm_sqr().sqrt() < 4.0 * (tot / nf).sqrt());
        assert!((var - tot).abs() < 4.0 * tot / nf.sqrt());
    }

    #[test]
    fn input_variant_mismatch_is_rejected() {
        let mut rng = substream(9, &[0]);
        let e = propagate(
            ChannelInput::Symbol(Complex64::new(1.0, 0.0)),
            &ChannelModel::Ideal,
            &mut rng,
        );
        assert_eq!(e, Err(ChannelError::InputMismatch));
        let e = propagate(
            ChannelInput::Bit(Bit::Plus),
            &ChannelModel::Awgn {
                gain: Complex64::new(1.0, 0.0),
                noise_var: 1.0,
            },
            &mut rng,
        );
        assert_eq!(e, Err(ChannelError::InputMismatch));
    }

    #[test]
    fn parameter_ranges_enforced() {
        assert!(ChannelModel::Bsc { epsilon: 0.5 }.validate().is_err());
        assert!(ChannelModel::Bec { epsilon: 1.0 }.validate().is_ok());
        assert!(ChannelModel::Bec { epsilon: 1.1 }.validate().is_err());
        assert!(ChannelModel::Awgn {
            gain: Complex64::new(1.0, 0.0),
            noise_var: 0.0
        }
        .validate()
        .is_err());
    }
}
