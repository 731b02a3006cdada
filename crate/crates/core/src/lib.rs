//! Channel-aware decentralized sequential detection via level-triggered sampling.
//!
//! A network of sensors observes noisy signals, accumulates local
//! log-likelihood ratios (LLRs), and applies level-triggered sampling: a
//! sensor transmits a single bit whenever its accumulated LLR since the last
//! transmission leaves `(-threshold_down, threshold_up)`. The bits travel
//! over noisy channels (erasure, symmetric, AWGN, Rayleigh, Rician) to a
//! fusion center that computes the LLR of each *received* signal — using the
//! sensors' local error probabilities and the channel statistics — and runs
//! a sequential probability ratio test on the running sum.
//!
//! The crate provides:
//!
//! - [`detection`]: observation models, LLR increments, level-triggered
//!   samplers, local error-probability estimation and threshold calibration;
//! - [`channel`]: signaling levels and channel models with their sampling
//!   rules;
//! - [`fusion`]: channel-aware LLR updates per channel family, the global
//!   SPRT state machine, conventional demodulate-then-fuse baselines, and a
//!   per-slot fusion rule for unreliably detected transmission times;
//! - [`kl`]: Kullback-Leibler information bookkeeping — observed /
//!   transmitted / received information, channel penalty terms, delay
//!   predictions and the decision-delay identity;
//! - [`sim`]: a deterministic single-trial engine combining all of the above;
//! - [`quad`], [`logexp`], [`rng`]: quadrature, stable log-sum-exp and
//!   reproducible substream utilities used throughout.
//!
//! The crate is `no_std`-compatible (requires `alloc`); all transcendental
//! math is routed through `libm` so results are identical with or without
//! the `std` feature. Every randomized operation takes an explicit random
//! source, and [`rng::substream`] derives independent streams from
//! `(seed, key…)` tuples, so simulations parallelize without losing
//! reproducibility.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]
// Parameter guards use `!(x > 0.0)` so that NaN fails validation too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod channel;
pub mod detection;
pub mod fusion;
pub mod kl;
pub mod logexp;
pub mod quad;
pub mod rng;
pub mod sim;

mod fmath;

pub use num_complex::Complex64;

/// The two hypotheses of the binary detection problem.
///
/// Quantities indexed by hypothesis (error probabilities, KL information,
/// expected delays) use `H1` first and `H0` second throughout the crate,
/// matching the convention that `H1` is the signal-present hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    H0,
    H1,
}

impl Hypothesis {
    /// Index `i` with `H0 -> 0`, `H1 -> 1`.
    pub fn index(self) -> usize {
        match self {
            Hypothesis::H0 => 0,
            Hypothesis::H1 => 1,
        }
    }

    /// Sign convention for turning mean LLRs into KL information:
    /// `+1` under `H1`, `-1` under `H0`.
    pub fn kl_sign(self) -> f64 {
        match self {
            Hypothesis::H0 => -1.0,
            Hypothesis::H1 => 1.0,
        }
    }
}

/// A pair of values indexed by hypothesis, `(under H1, under H0)`.
///
/// Used for error probabilities, KL information numbers and delay
/// predictions, which all come in hypothesis-indexed pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ByHypothesis {
    pub h1: f64,
    pub h0: f64,
}

impl ByHypothesis {
    pub fn new(h1: f64, h0: f64) -> Self {
        Self { h1, h0 }
    }

    pub fn get(&self, hyp: Hypothesis) -> f64 {
        match hyp {
            Hypothesis::H1 => self.h1,
            Hypothesis::H0 => self.h0,
        }
    }
}
