//! Kullback-Leibler information bookkeeping for the detection system.
//!
//! Three information levels describe one sensor's first message: the
//! *observed* information `I_i = ±E_i[λ]` accumulated by the sampler, the
//! *transmitted* information `Î_i = ±E_i[λ̂]` carried by the emitted bit on
//! an ideal channel, and the *received* information `Ĩ_i = ±E_i[λ̃]` left
//! after the channel. Data processing orders them `0 ≤ Ĩ ≤ Î ≤ I`.
//!
//! For continuous channels the received information decomposes as
//! `Ĩ₁ = Î₁ + β·C₁` and `Ĩ₀ = Î₀ + α·C₀` with nonpositive penalty terms
//! `C_i` that collect the channel's information loss:
//!
//! - AWGN with separation `s = |a-b||h|/σ`: `C_i` are Gaussian expectations
//!   of log-mixture ratios in `ζ = -s² + √2·s·ν`;
//! - Rayleigh with variance ratio `ρ = σ_a²/σ_b²`: expectations against a
//!   unit-exponential `u = |z|²/σ²` in `ζ_a = u(1-ρ)`, `ζ_b = u(1-ρ⁻¹)`;
//! - Rician with distinct level magnitudes: the same structure with
//!   noncentral quadratic exponents, evaluated by Monte Carlo over the
//!   underlying complex Gaussians (exact by construction) and cross-checked
//!   by tensor Gauss-Hermite quadrature; with equal magnitudes it reduces
//!   to the AWGN form at `s = |a-b||μ|/σ_a`.
//!
//! Quadrature values feed the grids; every penalty also has a Monte Carlo
//! oracle that runs the actual channel, and tests require the two routes
//! to agree within the oracle's standard error.
//!
//! The effective per-slot information `Ĩ_i(1) = Σ_k η̃_i^k I_i^k(1)` sets the
//! asymptotic decision delay `E_i[T̃] ≈ |log target error| / Ĩ_i(1)`, and a
//! non-asymptotic identity ties the mean delay to the stopped information
//! plus post-stopping correction terms; [`verify_delay_identity`] checks it
//! end to end on the trial engine.

use alloc::vec;

use rand_core::RngCore;

use crate::channel::{propagate, transmit, ChannelInput, ChannelModel, Signaling};
use crate::detection::{sample_first_crossing, Bit, Estimate, SensorConfig};
use crate::fmath;
use crate::fusion::received_llr;
use crate::logexp::ln_ratio_1p_exp;
use crate::quad::{exp_weighted_integral, GaussHermite};
use crate::rng::{complex_gaussian, substream, uniform01};
use crate::sim::{run_trial_extended, FusionMode, System};
use crate::{ByHypothesis, Complex64, Hypothesis};

/// Errors from the information analysis.
#[derive(Debug, Clone, PartialEq)]
pub enum KlError {
    InvalidParameter(&'static str),
    /// Two quadrature orders disagreed beyond tolerance.
    QuadratureUnconverged {
        coarse: f64,
        fine: f64,
    },
    /// Quadrature and the Monte Carlo oracle disagreed beyond three oracle
    /// standard errors.
    OracleDisagreement {
        quadrature: f64,
        monte_carlo: f64,
        std_error: f64,
    },
}

impl core::fmt::Display for KlError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            KlError::InvalidParameter(p) => write!(f, "invalid parameter: {p}"),
            KlError::QuadratureUnconverged { coarse, fine } => {
                write!(f, "quadrature unconverged: {coarse} vs {fine}")
            }
            KlError::OracleDisagreement {
                quadrature,
                monte_carlo,
                std_error,
            } => write!(
                f,
                "quadrature {quadrature} disagrees with oracle {monte_carlo} (se {std_error})"
            ),
        }
    }
}

impl core::error::Error for KlError {}

fn check_prob_open(p: f64, name: &'static str) -> Result<(), KlError> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(KlError::InvalidParameter(name))
    }
}

/// Binary KL divergence `p log(p/q) + (1-p) log((1-p)/(1-q))`.
fn kl_bernoulli(p: f64, q: f64) -> f64 {
    p * fmath::ln(p / q) + (1.0 - p) * fmath::ln((1.0 - p) / (1.0 - q))
}

/// Transmitted (ideal-channel) information of one message,
/// `(Î₁, Î₀)`: the KL divergences between the bit distributions
/// `Bernoulli(1-β)` and `Bernoulli(α)` in the two directions.
pub fn kl_transmitted_hat(alpha: f64, beta: f64) -> Result<ByHypothesis, KlError> {
    check_prob_open(alpha, "alpha")?;
    check_prob_open(beta, "beta")?;
    Ok(ByHypothesis::new(
        kl_bernoulli(1.0 - beta, alpha),
        kl_bernoulli(alpha, 1.0 - beta),
    ))
}

/// Received information under a binary erasure channel: survivors carry the
/// ideal LLR, so the information simply scales by the survival probability.
pub fn kl_received_bec(alpha: f64, beta: f64, epsilon: f64) -> Result<ByHypothesis, KlError> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(KlError::InvalidParameter("bec epsilon"));
    }
    let hat = kl_transmitted_hat(alpha, beta)?;
    Ok(ByHypothesis::new(
        (1.0 - epsilon) * hat.h1,
        (1.0 - epsilon) * hat.h0,
    ))
}

/// Received information under a binary symmetric channel: the ideal formula
/// at the effective error probabilities `(1-2ε)α + ε`, `(1-2ε)β + ε`.
pub fn kl_received_bsc(alpha: f64, beta: f64, epsilon: f64) -> Result<ByHypothesis, KlError> {
    if !(0.0..0.5).contains(&epsilon) {
        return Err(KlError::InvalidParameter("bsc epsilon"));
    }
    check_prob_open(alpha, "alpha")?;
    check_prob_open(beta, "beta")?;
    let (ah, bh) = crate::fusion::bsc_effective_probs(alpha, beta, epsilon);
    kl_transmitted_hat(ah, bh)
}

/// Sufficient condition for the channel penalties to be monotone in the
/// level separation: with `F = (1-α)/α` and `G = (1-β)/β`, both `F² ≥ G`
/// and `G² ≥ F` must hold.
pub fn penalty_monotone_region(alpha: f64, beta: f64) -> bool {
    let f = (1.0 - alpha) / alpha;
    let g = (1.0 - beta) / beta;
    f * f >= g && g * g >= f
}

// Log-coefficients shared by the penalty integrands. E1 integrates
// ln[(1 + G⁻¹ r_a e^ζ)/(1 + F r_a e^ζ)]; E2 integrates
// ln[(1 + G r_b e^ζ)/(1 + F⁻¹ r_b e^ζ)]; the penalties assemble as
// C₁ = G·E1 + E2 and C₀ = -E1 - F·E2.
struct PenaltyCoeffs {
    f: f64,
    g: f64,
    ln_ginv_ra: f64,
    ln_f_ra: f64,
    ln_g_rb: f64,
    ln_finv_rb: f64,
}

impl PenaltyCoeffs {
    fn new(alpha: f64, beta: f64, ratio_a: f64, ratio_b: f64) -> Self {
        let f = (1.0 - alpha) / alpha;
        let g = (1.0 - beta) / beta;
        Self {
            f,
            g,
            ln_ginv_ra: fmath::ln(ratio_a / g),
            ln_f_ra: fmath::ln(f * ratio_a),
            ln_g_rb: fmath::ln(g * ratio_b),
            ln_finv_rb: fmath::ln(ratio_b / f),
        }
    }

    #[inline]
    fn e1_term(&self, zeta: f64) -> f64 {
        ln_ratio_1p_exp(self.ln_ginv_ra, self.ln_f_ra, zeta)
    }

    #[inline]
    fn e2_term(&self, zeta: f64) -> f64 {
        ln_ratio_1p_exp(self.ln_g_rb, self.ln_finv_rb, zeta)
    }

    fn assemble(&self, e1: f64, e2: f64) -> ByHypothesis {
        ByHypothesis::new(self.g * e1 + e2, -e1 - self.f * e2)
    }
}

/// AWGN penalty terms `(C₁, C₀)` at separation `s = |a-b||h|/σ`, by
/// Gauss-Hermite quadrature with the supplied rule.
pub fn penalty_awgn_gh(
    alpha: f64,
    beta: f64,
    s: f64,
    rule: &GaussHermite,
) -> Result<ByHypothesis, KlError> {
    check_prob_open(alpha, "alpha")?;
    check_prob_open(beta, "beta")?;
    if !(s >= 0.0) || !s.is_finite() {
        return Err(KlError::InvalidParameter("s"));
    }
    let coef = PenaltyCoeffs::new(alpha, beta, 1.0, 1.0);
    let sqrt2s = core::f64::consts::SQRT_2 * s;
    let s2 = s * s;
    // ζ_a = -s² - √2·s·ν and ζ_b = -s² + √2·s·ν share one distribution;
    // evaluating both signs at each node halves the quadrature error from
    // odd components.
    let e1 = rule.normal_expectation(|v| {
        0.5 * (coef.e1_term(-s2 - sqrt2s * v) + coef.e1_term(-s2 + sqrt2s * v))
    });
    let e2 = rule.normal_expectation(|v| {
        0.5 * (coef.e2_term(-s2 - sqrt2s * v) + coef.e2_term(-s2 + sqrt2s * v))
    });
    Ok(coef.assemble(e1, e2))
}

/// AWGN penalty terms `(C₁, C₀)` by adaptive quadrature over the Gaussian
/// weight (the integrand turns cliff-like at large `s`, where fixed rules
/// lose digits), gated against the 64-node Gauss-Hermite value.
pub fn penalty_awgn(alpha: f64, beta: f64, s: f64) -> Result<ByHypothesis, KlError> {
    check_prob_open(alpha, "alpha")?;
    check_prob_open(beta, "beta")?;
    if !(s >= 0.0) || !s.is_finite() {
        return Err(KlError::InvalidParameter("s"));
    }
    let coef = PenaltyCoeffs::new(alpha, beta, 1.0, 1.0);
    let sqrt2s = core::f64::consts::SQRT_2 * s;
    let s2 = s * s;
    let e1 = crate::quad::normal_expectation_adaptive(|v| coef.e1_term(-s2 + sqrt2s * v), 1e-11);
    let e2 = crate::quad::normal_expectation_adaptive(|v| coef.e2_term(-s2 + sqrt2s * v), 1e-11);
    let fine = coef.assemble(e1, e2);
    let coarse = penalty_awgn_gh(alpha, beta, s, &GaussHermite::new(64))?;
    for (c, f) in [(coarse.h1, fine.h1), (coarse.h0, fine.h0)] {
        if (c - f).abs() > 1e-3 * (1.0 + c.abs()) {
            return Err(KlError::QuadratureUnconverged { coarse: c, fine: f });
        }
    }
    Ok(fine)
}

/// A penalty pair estimated by Monte Carlo, with standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyEstimate {
    pub value: ByHypothesis,
    pub std_error: ByHypothesis,
}

/// Monte Carlo oracle for the AWGN penalties: runs bits through the actual
/// channel at a concrete realization of the separation `s` (antipodal
/// levels `±s/2`, unit gain and noise) and recovers `C_i` from the measured
/// received information.
pub fn penalty_awgn_oracle(
    alpha: f64,
    beta: f64,
    s: f64,
    trials: u64,
    rng: &mut impl RngCore,
) -> Result<PenaltyEstimate, KlError> {
    check_prob_open(alpha, "alpha")?;
    check_prob_open(beta, "beta")?;
    if trials == 0 {
        return Err(KlError::InvalidParameter("trials"));
    }
    let signaling = Signaling::new(
        Complex64::new(0.5 * s, 0.0),
        Complex64::new(-0.5 * s, 0.0),
        0.5 * s + 1.0,
        0.0,
    )
    .map_err(|_| KlError::InvalidParameter("s"))?;
    let channel = ChannelModel::Awgn {
        gain: Complex64::new(1.0, 0.0),
        noise_var: 1.0,
    };
    let received = kl_received_mc(&channel, alpha, beta, &signaling, trials, rng)?;
    penalty_from_received(alpha, beta, &received)
}

fn penalty_from_received(
    alpha: f64,
    beta: f64,
    received: &ReceivedInfoEstimate,
) -> Result<PenaltyEstimate, KlError> {
    let hat = kl_transmitted_hat(alpha, beta)?;
    Ok(PenaltyEstimate {
        value: ByHypothesis::new(
            (received.info.h1 - hat.h1) / beta,
            (received.info.h0 - hat.h0) / alpha,
        ),
        std_error: ByHypothesis::new(received.std_error.h1 / beta, received.std_error.h0 / alpha),
    })
}

/// Rayleigh penalty terms `(C₁, C₀)` as a function of the received
/// variance ratio `ρ = σ_a²/σ_b²`, by adaptive quadrature against the
/// unit-exponential weight.
pub fn penalty_rayleigh(alpha: f64, beta: f64, rho: f64) -> Result<ByHypothesis, KlError> {
    check_prob_open(alpha, "alpha")?;
    check_prob_open(beta, "beta")?;
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(KlError::InvalidParameter("rho"));
    }
    let coef = PenaltyCoeffs::new(alpha, beta, rho, 1.0 / rho);
    let slope_a = 1.0 - rho;
    let slope_b = 1.0 - 1.0 / rho;
    let e1 = exp_weighted_integral(|u| coef.e1_term(u * slope_a), 1e-11);
    let e2 = exp_weighted_integral(|u| coef.e2_term(u * slope_b), 1e-11);
    Ok(coef.assemble(e1, e2))
}

/// Monte Carlo oracle for the Rayleigh penalties: simulates the actual
/// fading channel and recovers `C_i` from the measured received
/// information.
pub fn penalty_rayleigh_oracle(
    alpha: f64,
    beta: f64,
    gain_var: f64,
    noise_var: f64,
    signaling: &Signaling,
    trials: u64,
    rng: &mut impl RngCore,
) -> Result<PenaltyEstimate, KlError> {
    let channel = ChannelModel::Rayleigh {
        gain_var,
        noise_var,
    };
    channel
        .validate()
        .map_err(|_| KlError::InvalidParameter("rayleigh channel"))?;
    let received = kl_received_mc(&channel, alpha, beta, signaling, trials, rng)?;
    penalty_from_received(alpha, beta, &received)
}

/// Rayleigh penalties gated by the through-channel oracle: errors if the
/// quadrature value falls outside three oracle standard errors.
pub fn penalty_rayleigh_checked(
    alpha: f64,
    beta: f64,
    gain_var: f64,
    noise_var: f64,
    signaling: &Signaling,
    trials: u64,
    rng: &mut impl RngCore,
) -> Result<ByHypothesis, KlError> {
    let (va, vb) = crate::fusion::fading_level_variances(signaling, gain_var, noise_var);
    let quad = penalty_rayleigh(alpha, beta, va / vb)?;
    let oracle = penalty_rayleigh_oracle(alpha, beta, gain_var, noise_var, signaling, trials, rng)?;
    for (q, (m, se)) in [
        (quad.h1, (oracle.value.h1, oracle.std_error.h1)),
        (quad.h0, (oracle.value.h0, oracle.std_error.h0)),
    ] {
        // Absolute slack covers the degenerate equal-variance point whose
        // oracle variance is exactly zero.
        if (q - m).abs() > 3.0 * se + 1e-9 {
            return Err(KlError::OracleDisagreement {
                quadrature: q,
                monte_carlo: m,
                std_error: se,
            });
        }
    }
    Ok(quad)
}

fn rician_zetas(
    signaling: &Signaling,
    gain_mean: Complex64,
    var_a: f64,
    var_b: f64,
    ztil_a: Complex64,
    ztil_b: Complex64,
) -> (f64, f64) {
    let diff = signaling.level_a() - signaling.level_b();
    let zeta_a = ztil_a.norm_sqr() / var_a - (ztil_a + diff * gain_mean).norm_sqr() / var_b;
    let zeta_b = ztil_b.norm_sqr() / var_b - (ztil_b - diff * gain_mean).norm_sqr() / var_a;
    (zeta_a, zeta_b)
}

/// Rician penalty terms by Monte Carlo over the underlying complex
/// Gaussians (the fluctuation `z̃ = x·(h-μ) + w` is sampled exactly, so the
/// only error is statistical).
#[allow(clippy::too_many_arguments)]
pub fn penalty_rician_mc(
    alpha: f64,
    beta: f64,
    signaling: &Signaling,
    gain_mean: Complex64,
    gain_var: f64,
    noise_var: f64,
    trials: u64,
    rng: &mut impl RngCore,
) -> Result<PenaltyEstimate, KlError> {
    check_prob_open(alpha, "alpha")?;
    check_prob_open(beta, "beta")?;
    if trials == 0 {
        return Err(KlError::InvalidParameter("trials"));
    }
    let (va, vb) = crate::fusion::fading_level_variances(signaling, gain_var, noise_var);
    let rho = va / vb;
    let coef = PenaltyCoeffs::new(alpha, beta, rho, 1.0 / rho);
    let zero = Complex64::new(0.0, 0.0);
    let (mut s1, mut q1, mut s2, mut q2) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..trials {
        let ztil_a = complex_gaussian(rng, zero, va);
        let ztil_b = complex_gaussian(rng, zero, vb);
        let (zeta_a, zeta_b) = rician_zetas(signaling, gain_mean, va, vb, ztil_a, ztil_b);
        let t1 = coef.e1_term(zeta_a);
        let t2 = coef.e2_term(zeta_b);
        s1 += t1;
        q1 += t1 * t1;
        s2 += t2;
        q2 += t2 * t2;
    }
    let n = trials as f64;
    let (e1, e2) = (s1 / n, s2 / n);
    let var1 = (q1 / n - e1 * e1).max(0.0) / n;
    let var2 = (q2 / n - e2 * e2).max(0.0) / n;
    Ok(PenaltyEstimate {
        value: coef.assemble(e1, e2),
        std_error: ByHypothesis::new(
            fmath::sqrt(coef.g * coef.g * var1 + var2),
            fmath::sqrt(var1 + coef.f * coef.f * var2),
        ),
    })
}

/// Rician penalty terms by tensor Gauss-Hermite quadrature over the real
/// and imaginary fluctuation components; cross-check for the Monte Carlo
/// evaluator.
pub fn penalty_rician_quad(
    alpha: f64,
    beta: f64,
    signaling: &Signaling,
    gain_mean: Complex64,
    gain_var: f64,
    noise_var: f64,
    rule: &GaussHermite,
) -> Result<ByHypothesis, KlError> {
    check_prob_open(alpha, "alpha")?;
    check_prob_open(beta, "beta")?;
    let (va, vb) = crate::fusion::fading_level_variances(signaling, gain_var, noise_var);
    let rho = va / vb;
    let coef = PenaltyCoeffs::new(alpha, beta, rho, 1.0 / rho);
    let (sa, sb) = (fmath::sqrt(va * 0.5), fmath::sqrt(vb * 0.5));
    let diff = signaling.level_a() - signaling.level_b();
    let e1 = rule.normal_expectation_2d(|x, y| {
        let ztil = Complex64::new(sa * x, sa * y);
        let zeta = ztil.norm_sqr() / va - (ztil + diff * gain_mean).norm_sqr() / vb;
        coef.e1_term(zeta)
    });
    let e2 = rule.normal_expectation_2d(|x, y| {
        let ztil = Complex64::new(sb * x, sb * y);
        let zeta = ztil.norm_sqr() / vb - (ztil - diff * gain_mean).norm_sqr() / va;
        coef.e2_term(zeta)
    });
    Ok(coef.assemble(e1, e2))
}

/// Rician penalty terms `(C₁, C₀)`.
///
/// Equal level magnitudes reduce to the AWGN form at
/// `s = |a-b||μ|/σ_a`; distinct magnitudes use the Monte Carlo evaluator
/// cross-checked against quadrature (three standard errors), returning the
/// Monte Carlo values.
#[allow(clippy::too_many_arguments)]
pub fn penalty_rician(
    alpha: f64,
    beta: f64,
    signaling: &Signaling,
    gain_mean: Complex64,
    gain_var: f64,
    noise_var: f64,
    trials: u64,
    rng: &mut impl RngCore,
) -> Result<ByHypothesis, KlError> {
    if !(noise_var > 0.0) {
        return Err(KlError::InvalidParameter("noise_var"));
    }
    if !(gain_var >= 0.0) {
        return Err(KlError::InvalidParameter("gain_var"));
    }
    let (va, _vb) = crate::fusion::fading_level_variances(signaling, gain_var, noise_var);
    let (na, nb) = (
        fmath::sqrt(signaling.level_a().norm_sqr()),
        fmath::sqrt(signaling.level_b().norm_sqr()),
    );
    let diff_mag = fmath::sqrt((signaling.level_a() - signaling.level_b()).norm_sqr());
    let mu_mag = fmath::sqrt(gain_mean.norm_sqr());
    if gain_var == 0.0 || (na - nb).abs() <= 1e-9 * (1.0 + na.max(nb)) {
        let s = diff_mag * mu_mag / fmath::sqrt(va);
        return penalty_awgn(alpha, beta, s);
    }
    let mc = penalty_rician_mc(
        alpha, beta, signaling, gain_mean, gain_var, noise_var, trials, rng,
    )?;
    let quad = penalty_rician_quad(
        alpha,
        beta,
        signaling,
        gain_mean,
        gain_var,
        noise_var,
        &GaussHermite::new(64),
    )?;
    for (q, (m, se)) in [
        (quad.h1, (mc.value.h1, mc.std_error.h1)),
        (quad.h0, (mc.value.h0, mc.std_error.h0)),
    ] {
        if (q - m).abs() > 3.0 * se + 1e-4 * (1.0 + q.abs()) {
            return Err(KlError::OracleDisagreement {
                quadrature: q,
                monte_carlo: m,
                std_error: se,
            });
        }
    }
    Ok(mc.value)
}

/// Received information measured by Monte Carlo through the actual channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceivedInfoEstimate {
    pub info: ByHypothesis,
    pub std_error: ByHypothesis,
}

/// Direct Monte Carlo estimate of the received information `(Ĩ₁, Ĩ₀)`:
/// bits are drawn from their distribution under each hypothesis,
/// transmitted, propagated, and scored with the channel-aware LLR.
pub fn kl_received_mc(
    channel: &ChannelModel,
    alpha: f64,
    beta: f64,
    signaling: &Signaling,
    trials: u64,
    rng: &mut impl RngCore,
) -> Result<ReceivedInfoEstimate, KlError> {
    check_prob_open(alpha, "alpha")?;
    check_prob_open(beta, "beta")?;
    if trials == 0 {
        return Err(KlError::InvalidParameter("trials"));
    }
    channel
        .validate()
        .map_err(|_| KlError::InvalidParameter("channel"))?;
    let mut out = [Estimate {
        value: 0.0,
        std_error: 0.0,
    }; 2];
    for (slot, hyp) in [(0usize, Hypothesis::H1), (1usize, Hypothesis::H0)] {
        let p_plus = match hyp {
            Hypothesis::H1 => 1.0 - beta,
            Hypothesis::H0 => alpha,
        };
        let (mut sum, mut sq) = (0.0f64, 0.0f64);
        for _ in 0..trials {
            let bit = if uniform01(rng) < p_plus {
                Bit::Plus
            } else {
                Bit::Minus
            };
            let input = if channel.is_discrete() {
                ChannelInput::Bit(bit)
            } else {
                ChannelInput::Symbol(transmit(bit, signaling))
            };
            let received =
                propagate(input, channel, rng).map_err(|_| KlError::InvalidParameter("channel"))?;
            let lam = received_llr(&received, channel, signaling, alpha, beta)
                .map_err(|_| KlError::InvalidParameter("fusion"))?;
            sum += lam;
            sq += lam * lam;
        }
        let n = trials as f64;
        let mean = sum / n;
        let var = (sq / n - mean * mean).max(0.0);
        out[slot] = Estimate {
            value: hyp.kl_sign() * mean,
            std_error: fmath::sqrt(var / n),
        };
    }
    Ok(ReceivedInfoEstimate {
        info: ByHypothesis::new(out[0].value, out[1].value),
        std_error: ByHypothesis::new(out[0].std_error, out[1].std_error),
    })
}

/// Received information `(Ĩ₁, Ĩ₀)` by direct integration of the
/// channel-aware LLR against the received-signal distribution, without
/// going through the penalty decomposition.
///
/// This is an independent evaluation route: it exercises the fusion-rule
/// code itself (exact enumeration for binary channels, quadrature over the
/// channel noise for continuous ones), so it cross-validates both the
/// penalty integrals and the LLR implementations.
pub fn kl_received_quad_direct(
    channel: &ChannelModel,
    alpha: f64,
    beta: f64,
    signaling: &Signaling,
    rule: &GaussHermite,
) -> Result<ByHypothesis, KlError> {
    check_prob_open(alpha, "alpha")?;
    check_prob_open(beta, "beta")?;
    channel
        .validate()
        .map_err(|_| KlError::InvalidParameter("channel"))?;
    // P_i(bit = +1) under H1 and H0.
    let p_plus = ByHypothesis::new(1.0 - beta, alpha);
    let llr_of = |sig: &crate::channel::ReceivedSignal| {
        received_llr(sig, channel, signaling, alpha, beta).expect("validated parameters")
    };
    let mean_bit = |emitted_plus: f64, f: &mut dyn FnMut(Bit) -> f64| {
        emitted_plus * f(Bit::Plus) + (1.0 - emitted_plus) * f(Bit::Minus)
    };
    let expect = |hyp: Hypothesis, per_bit: &mut dyn FnMut(Bit) -> f64| {
        hyp.kl_sign() * mean_bit(p_plus.get(hyp), per_bit)
    };
    let value = |per_bit: &mut dyn FnMut(Bit) -> f64| {
        ByHypothesis::new(
            expect(Hypothesis::H1, per_bit),
            expect(Hypothesis::H0, per_bit),
        )
    };
    match *channel {
        ChannelModel::Ideal => {
            let mut f = |b: Bit| llr_of(&crate::channel::ReceivedSignal::Binary(b));
            Ok(value(&mut f))
        }
        ChannelModel::Bec { epsilon } => {
            let mut f = |b: Bit| {
                (1.0 - epsilon) * llr_of(&crate::channel::ReceivedSignal::Binary(b))
                    + epsilon * llr_of(&crate::channel::ReceivedSignal::Erased)
            };
            Ok(value(&mut f))
        }
        ChannelModel::Bsc { epsilon } => {
            let mut f = |b: Bit| {
                (1.0 - epsilon) * llr_of(&crate::channel::ReceivedSignal::Binary(b))
                    + epsilon * llr_of(&crate::channel::ReceivedSignal::Binary(b.flipped()))
            };
            Ok(value(&mut f))
        }
        ChannelModel::Awgn { gain, noise_var } => {
            // The LLR depends on the noise only through its projection onto
            // the separation direction (b - a)h, so the expectation reduces
            // exactly to one dimension; adaptive quadrature then resolves
            // the high-SNR cliff that fixed rules smear.
            let diff = gain * (signaling.level_b() - signaling.level_a());
            let dn = fmath::sqrt(diff.norm_sqr());
            let sd = fmath::sqrt(noise_var * 0.5);
            let mut f = |b: Bit| {
                let mean = gain * transmit(b, signaling);
                if dn == 0.0 {
                    return llr_of(&crate::channel::ReceivedSignal::Complex(mean));
                }
                let e1 = diff / dn;
                crate::quad::normal_expectation_adaptive(
                    |v| {
                        llr_of(&crate::channel::ReceivedSignal::Complex(
                            mean + e1 * (sd * v),
                        ))
                    },
                    1e-11,
                )
            };
            Ok(value(&mut f))
        }
        ChannelModel::Rayleigh {
            gain_var,
            noise_var,
        } => {
            // Received signal is rotation-invariant per level: integrate the
            // LLR of |z| = sqrt(u sigma_x^2) against the unit exponential.
            let mut f = |b: Bit| {
                let var = transmit(b, signaling).norm_sqr() * gain_var + noise_var;
                exp_weighted_integral(
                    |u| {
                        llr_of(&crate::channel::ReceivedSignal::Complex(Complex64::new(
                            fmath::sqrt(u * var),
                            0.0,
                        )))
                    },
                    1e-11,
                )
            };
            Ok(value(&mut f))
        }
        ChannelModel::Rician {
            gain_mean,
            gain_var,
            noise_var,
        } => {
            let (va, vb) = crate::fusion::fading_level_variances(signaling, gain_var, noise_var);
            let sym = (va - vb).abs() <= 1e-12 * (va + vb);
            let mut f = |b: Bit| {
                let x = transmit(b, signaling);
                let mean = gain_mean * x;
                let var = x.norm_sqr() * gain_var + noise_var;
                let sd = fmath::sqrt(var * 0.5);
                if sym {
                    // Equal level variances: same 1D reduction as AWGN.
                    let diff = gain_mean * (signaling.level_b() - signaling.level_a());
                    let dn = fmath::sqrt(diff.norm_sqr());
                    if dn == 0.0 {
                        return llr_of(&crate::channel::ReceivedSignal::Complex(mean));
                    }
                    let e1 = diff / dn;
                    crate::quad::normal_expectation_adaptive(
                        |v| {
                            llr_of(&crate::channel::ReceivedSignal::Complex(
                                mean + e1 * (sd * v),
                            ))
                        },
                        1e-11,
                    )
                } else {
                    rule.normal_expectation_2d(|u, v| {
                        llr_of(&crate::channel::ReceivedSignal::Complex(Complex64::new(
                            mean.re + sd * u,
                            mean.im + sd * v,
                        )))
                    })
                }
            };
            Ok(value(&mut f))
        }
    }
}

/// Received information with both routes: the model value (closed form or
/// penalty reconstruction) and the direct Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlReceived {
    pub model: ByHypothesis,
    pub monte_carlo: ReceivedInfoEstimate,
}

/// Model value of the received information for any channel: exact closed
/// forms for the binary families, penalty reconstruction `Î + err·C` for
/// the continuous ones. `rng` drives the Rician Monte Carlo evaluator.
pub fn kl_received_model(
    channel: &ChannelModel,
    alpha: f64,
    beta: f64,
    signaling: &Signaling,
    rician_trials: u64,
    rng: &mut impl RngCore,
) -> Result<ByHypothesis, KlError> {
    let hat = kl_transmitted_hat(alpha, beta)?;
    let penalty = match *channel {
        ChannelModel::Ideal => return Ok(hat),
        ChannelModel::Bec { epsilon } => return kl_received_bec(alpha, beta, epsilon),
        ChannelModel::Bsc { epsilon } => return kl_received_bsc(alpha, beta, epsilon),
        ChannelModel::Awgn { gain, noise_var } => {
            let diff = signaling.level_a() - signaling.level_b();
            let s = fmath::sqrt(diff.norm_sqr() * gain.norm_sqr() / noise_var);
            penalty_awgn(alpha, beta, s)?
        }
        ChannelModel::Rayleigh {
            gain_var,
            noise_var,
        } => {
            let (va, vb) = crate::fusion::fading_level_variances(signaling, gain_var, noise_var);
            penalty_rayleigh(alpha, beta, va / vb)?
        }
        ChannelModel::Rician {
            gain_mean,
            gain_var,
            noise_var,
        } => penalty_rician(
            alpha,
            beta,
            signaling,
            gain_mean,
            gain_var,
            noise_var,
            rician_trials,
            rng,
        )?,
    };
    Ok(ByHypothesis::new(
        hat.h1 + beta * penalty.h1,
        hat.h0 + alpha * penalty.h0,
    ))
}

/// Received information by both routes, with an agreement gate: the model
/// value must fall within three Monte Carlo standard errors.
pub fn kl_received(
    channel: &ChannelModel,
    alpha: f64,
    beta: f64,
    signaling: &Signaling,
    oracle_trials: u64,
    rng: &mut impl RngCore,
) -> Result<KlReceived, KlError> {
    let model = kl_received_model(channel, alpha, beta, signaling, oracle_trials, rng)?;
    let mc = kl_received_mc(channel, alpha, beta, signaling, oracle_trials, rng)?;
    for (q, (m, se)) in [
        (model.h1, (mc.info.h1, mc.std_error.h1)),
        (model.h0, (mc.info.h0, mc.std_error.h0)),
    ] {
        if (q - m).abs() > 3.0 * se + 1e-9 {
            return Err(KlError::OracleDisagreement {
                quadrature: q,
                monte_carlo: m,
                std_error: se,
            });
        }
    }
    Ok(KlReceived {
        model,
        monte_carlo: mc,
    })
}

/// First-crossing statistics of one sampler under one hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstCrossingStats {
    pub mean_tau: Estimate,
    pub mean_lambda: Estimate,
    /// Probability that the first bit is `+1`.
    pub up_prob: Estimate,
    pub mean_overshoot_up: f64,
    pub mean_overshoot_down: f64,
}

/// Observed-side information of one sensor, estimated by Monte Carlo:
/// `I_i(t₁) = ±E_i[λ₁]`, the mean inter-sampling intervals, and the exact
/// per-observation information.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservedInfo {
    pub kl_first_message: ByHypothesis,
    pub kl_first_message_se: ByHypothesis,
    pub mean_intersample: ByHypothesis,
    pub mean_intersample_se: ByHypothesis,
    pub per_observation: ByHypothesis,
    pub stats_h1: FirstCrossingStats,
    pub stats_h0: FirstCrossingStats,
}

fn first_crossing_stats(
    sensor: &SensorConfig,
    hyp: Hypothesis,
    trials: u64,
    rng: &mut impl RngCore,
) -> FirstCrossingStats {
    let n = trials as f64;
    let (mut st, mut st2) = (0.0f64, 0.0f64);
    let (mut sl, mut sl2) = (0.0f64, 0.0f64);
    let mut ups = 0u64;
    let (mut os_up, mut os_dn) = (0.0f64, 0.0f64);
    for _ in 0..trials {
        let fc = sample_first_crossing(sensor, hyp, rng);
        st += fc.tau as f64;
        st2 += (fc.tau as f64) * (fc.tau as f64);
        sl += fc.lambda;
        sl2 += fc.lambda * fc.lambda;
        if fc.bit == Bit::Plus {
            ups += 1;
            os_up += fc.overshoot;
        } else {
            os_dn += fc.overshoot;
        }
    }
    let est = |s: f64, s2: f64| {
        let mean = s / n;
        Estimate {
            value: mean,
            std_error: fmath::sqrt(((s2 / n - mean * mean).max(0.0)) / n),
        }
    };
    let p = ups as f64 / n;
    FirstCrossingStats {
        mean_tau: est(st, st2),
        mean_lambda: est(sl, sl2),
        up_prob: Estimate {
            value: p,
            std_error: fmath::sqrt(p * (1.0 - p) / n),
        },
        mean_overshoot_up: if ups > 0 { os_up / ups as f64 } else { 0.0 },
        mean_overshoot_down: if ups < trials {
            os_dn / (trials - ups) as f64
        } else {
            0.0
        },
    }
}

/// Monte Carlo estimate of the observed-side information of one sensor.
pub fn kl_observed_local(
    sensor: &SensorConfig,
    trials: u64,
    rng: &mut impl RngCore,
) -> Result<ObservedInfo, KlError> {
    if trials == 0 {
        return Err(KlError::InvalidParameter("trials"));
    }
    sensor
        .model
        .validate()
        .map_err(|_| KlError::InvalidParameter("observation model"))?;
    let s1 = first_crossing_stats(sensor, Hypothesis::H1, trials, rng);
    let s0 = first_crossing_stats(sensor, Hypothesis::H0, trials, rng);
    Ok(ObservedInfo {
        kl_first_message: ByHypothesis::new(s1.mean_lambda.value, -s0.mean_lambda.value),
        kl_first_message_se: ByHypothesis::new(s1.mean_lambda.std_error, s0.mean_lambda.std_error),
        mean_intersample: ByHypothesis::new(s1.mean_tau.value, s0.mean_tau.value),
        mean_intersample_se: ByHypothesis::new(s1.mean_tau.std_error, s0.mean_tau.std_error),
        per_observation: sensor.model.per_observation_kl(),
        stats_h1: s1,
        stats_h0: s0,
    })
}

/// The full information ledger of one sensor-channel link.
#[derive(Debug, Clone, PartialEq)]
pub struct KlReport {
    pub sensor_id: u32,
    /// `I_i(t₁) = ±E_i[λ₁]`, Monte Carlo.
    pub observed: ByHypothesis,
    /// `Î_i(t₁)`, closed form.
    pub transmitted_hat: ByHypothesis,
    /// `Ĩ_i(t₁)`, model value (closed form / penalty reconstruction).
    pub received_tilde: ByHypothesis,
    /// `Ĩ_i(t₁)` measured through the channel, with standard errors.
    pub received_mc: ReceivedInfoEstimate,
    /// `I_i(1)`, exact.
    pub per_observation: ByHypothesis,
    /// `η̂ = Î(t₁)/I(t₁)`.
    pub ratio_hat: ByHypothesis,
    /// `η̃ = Ĩ(t₁)/I(t₁)`.
    pub ratio_tilde: ByHypothesis,
    /// Channel penalty `C_i` (zero for binary channels, where the loss is
    /// multiplicative instead).
    pub penalty: ByHypothesis,
    /// `E_i[τ₁]`, Monte Carlo.
    pub mean_intersample: ByHypothesis,
}

/// Assembles the information ledger for one link.
pub fn kl_report(
    sensor: &SensorConfig,
    channel: &ChannelModel,
    signaling: &Signaling,
    trials: u64,
    rng: &mut impl RngCore,
) -> Result<KlReport, KlError> {
    sensor
        .validate()
        .map_err(|_| KlError::InvalidParameter("sensor"))?;
    let (alpha, beta) = (sensor.alpha_local, sensor.beta_local);
    let observed = kl_observed_local(sensor, trials, rng)?;
    let hat = kl_transmitted_hat(alpha, beta)?;
    let tilde = kl_received_model(channel, alpha, beta, signaling, trials, rng)?;
    let mc = kl_received_mc(channel, alpha, beta, signaling, trials, rng)?;
    let penalty = match channel {
        ChannelModel::Ideal | ChannelModel::Bec { .. } | ChannelModel::Bsc { .. } => {
            ByHypothesis::new(0.0, 0.0)
        }
        _ => ByHypothesis::new((tilde.h1 - hat.h1) / beta, (tilde.h0 - hat.h0) / alpha),
    };
    let obs = observed.kl_first_message;
    Ok(KlReport {
        sensor_id: sensor.sensor_id,
        observed: obs,
        transmitted_hat: hat,
        received_tilde: tilde,
        received_mc: mc,
        per_observation: observed.per_observation,
        ratio_hat: ByHypothesis::new(hat.h1 / obs.h1, hat.h0 / obs.h0),
        ratio_tilde: ByHypothesis::new(tilde.h1 / obs.h1, tilde.h0 / obs.h0),
        penalty,
        mean_intersample: observed.mean_intersample,
    })
}

/// Effective per-slot received information `Ĩ_i(1) = Σ_k η̃_i^k I_i^k(1)`.
pub fn effective_received_info(reports: &[KlReport]) -> ByHypothesis {
    let mut h1 = 0.0;
    let mut h0 = 0.0;
    for r in reports {
        h1 += r.ratio_tilde.h1 * r.per_observation.h1;
        h0 += r.ratio_tilde.h0 * r.per_observation.h0;
    }
    ByHypothesis::new(h1, h0)
}

/// Effective per-slot transmitted information `Î_i(1) = Σ_k η̂_i^k I_i^k(1)`.
pub fn effective_transmitted_info(reports: &[KlReport]) -> ByHypothesis {
    let mut h1 = 0.0;
    let mut h0 = 0.0;
    for r in reports {
        h1 += r.ratio_hat.h1 * r.per_observation.h1;
        h0 += r.ratio_hat.h0 * r.per_observation.h0;
    }
    ByHypothesis::new(h1, h0)
}

/// First-order decision-delay prediction from the effective per-slot
/// information: slope `1/Ĩ_i(1)` and `|log target|/Ĩ_i(1)`; the constant
/// term is left unpredicted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayPrediction {
    pub asymptotic_slope: ByHypothesis,
    pub predicted_delay: ByHypothesis,
}

pub fn predict_delay(
    effective_info: ByHypothesis,
    target_alpha: f64,
    target_beta: f64,
) -> Result<DelayPrediction, KlError> {
    check_prob_open(target_alpha, "target_alpha")?;
    check_prob_open(target_beta, "target_beta")?;
    if !(effective_info.h1 > 0.0) || !(effective_info.h0 > 0.0) {
        return Err(KlError::InvalidParameter("effective_info"));
    }
    let slope = ByHypothesis::new(1.0 / effective_info.h1, 1.0 / effective_info.h0);
    Ok(DelayPrediction {
        asymptotic_slope: slope,
        predicted_delay: ByHypothesis::new(
            -fmath::ln(target_alpha) * slope.h1,
            -fmath::ln(target_beta) * slope.h0,
        ),
    })
}

/// One side of the decision-delay identity under one hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    pub hypothesis: Hypothesis,
    /// Mean decision delay (left side).
    pub mean_delay: Estimate,
    /// Right side assembled from stopped information and post-stopping
    /// corrections.
    pub rhs: f64,
    /// Per-trial residual `T - rhs_trial`; its mean should sit within a few
    /// standard errors of zero.
    pub residual: Estimate,
    /// Renewal cross-check: `E[τ](E[N]+1)` against `E[T] + E[Y]`, averaged
    /// over sensors, with a combined standard error.
    pub wald_residual: Estimate,
    pub trials_used: u64,
    pub truncated: u64,
}

/// Full report of the identity verification.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub h1: IdentityCheck,
    pub h0: IdentityCheck,
}

/// Verifies the non-asymptotic decision-delay identity on the trial
/// engine: mean delay equals
/// `[±E[L̃_T] + Σ_k(±E[λ̃_next^k] - E[Y_k]·Ĩ_i^k(1))] / Ĩ_i(1)`.
///
/// Calibration quantities (`E_i[τ]`, `I_i(t₁)`, `Ĩ_i(t₁)`) come from an
/// independent first-crossing pass; their uncertainty is folded into the
/// residual's standard error. Disagreement is reported, not raised.
pub fn verify_delay_identity(
    system: &System,
    trials: u64,
    calibration_trials: u64,
    max_time: u64,
    seed: u64,
) -> Result<IdentityReport, KlError> {
    if trials == 0 || calibration_trials == 0 {
        return Err(KlError::InvalidParameter("trials"));
    }
    if system.mode != FusionMode::ChannelAware {
        return Err(KlError::InvalidParameter(
            "identity requires channel-aware fusion",
        ));
    }
    system
        .validate()
        .map_err(|_| KlError::InvalidParameter("system"))?;
    let h1 = verify_one_side(
        system,
        Hypothesis::H1,
        trials,
        calibration_trials,
        max_time,
        seed,
    )?;
    let h0 = verify_one_side(
        system,
        Hypothesis::H0,
        trials,
        calibration_trials,
        max_time,
        seed,
    )?;
    Ok(IdentityReport { h1, h0 })
}

fn verify_one_side(
    system: &System,
    hyp: Hypothesis,
    trials: u64,
    calibration_trials: u64,
    max_time: u64,
    seed: u64,
) -> Result<IdentityCheck, KlError> {
    let k_count = system.links.len();
    let sign = hyp.kl_sign();
    // Calibration pass: per-sensor per-slot received information
    // Ĩ^k(1) = η̃^k · I^k(1), and E[τ^k] for the renewal cross-check.
    let mut info_slot = vec![0.0f64; k_count];
    let mut info_slot_relvar = vec![0.0f64; k_count];
    let mut tau_mean = vec![0.0f64; k_count];
    let mut tau_se = vec![0.0f64; k_count];
    for (k, link) in system.links.iter().enumerate() {
        let mut rng = substream(seed, &[u64::MAX, k as u64, hyp.index() as u64]);
        let st = first_crossing_stats(&link.sensor, hyp, calibration_trials, &mut rng);
        let obs_info = sign * st.mean_lambda.value;
        if obs_info <= 0.0 {
            return Err(KlError::InvalidParameter("observed information sign"));
        }
        let tilde = kl_received_model(
            &link.channel,
            link.sensor.alpha_local,
            link.sensor.beta_local,
            &link.signaling,
            calibration_trials,
            &mut rng,
        )?;
        let per_obs = link.sensor.model.per_observation_kl();
        info_slot[k] = tilde.get(hyp) / obs_info * per_obs.get(hyp);
        let rel = st.mean_lambda.std_error / obs_info;
        info_slot_relvar[k] = rel * rel;
        tau_mean[k] = st.mean_tau.value;
        tau_se[k] = st.mean_tau.std_error;
    }
    let info_total: f64 = info_slot.iter().sum();
    let info_total_se = fmath::sqrt(
        info_slot
            .iter()
            .zip(&info_slot_relvar)
            .map(|(v, rv)| v * v * rv)
            .sum::<f64>(),
    );

    // Main pass over extended trials.
    let (mut s_t, mut s_t2) = (0.0f64, 0.0f64);
    let (mut s_d, mut s_d2) = (0.0f64, 0.0f64);
    let mut s_msgs = vec![0.0f64; k_count];
    let mut s_next_t = vec![0.0f64; k_count];
    let mut used = 0u64;
    let mut truncated = 0u64;
    for trial in 0..trials {
        let ext = run_trial_extended(system, hyp, seed, trial, max_time)
            .map_err(|_| KlError::InvalidParameter("system"))?;
        if ext.base.decision == crate::fusion::Decision::Pending {
            truncated += 1;
            continue;
        }
        used += 1;
        let t_stop = ext.base.decision_time as f64;
        let mut rhs_trial = sign * ext.base.stopped_llr;
        for k in 0..k_count {
            let y_k = (ext.next_message_time[k] - ext.base.decision_time) as f64;
            rhs_trial += sign * ext.next_message_llr[k] - y_k * info_slot[k];
            s_msgs[k] += ext.messages_consumed[k] as f64;
            s_next_t[k] += ext.next_message_time[k] as f64;
        }
        rhs_trial /= info_total;
        let d = t_stop - rhs_trial;
        s_t += t_stop;
        s_t2 += t_stop * t_stop;
        s_d += d;
        s_d2 += d * d;
    }
    if used == 0 {
        return Err(KlError::InvalidParameter("all trials truncated"));
    }
    let n = used as f64;
    let mean_t = s_t / n;
    let se_t = fmath::sqrt(((s_t2 / n - mean_t * mean_t).max(0.0)) / n);
    let mean_d = s_d / n;
    let se_d_stat = fmath::sqrt(((s_d2 / n - mean_d * mean_d).max(0.0)) / n);
    // Fold the calibration uncertainty of Ĩ_i(1) into the residual error:
    // rhs scales inversely with it to first order.
    let rhs = mean_t - mean_d;
    let se_d = fmath::sqrt(
        se_d_stat * se_d_stat + {
            let extra = rhs.abs() * info_total_se / info_total;
            extra * extra
        },
    );

    // Renewal cross-check, averaged over sensors:
    // E[τ](E[N]+1) - E[t_next] should vanish.
    let mut wald_sum = 0.0;
    let mut wald_var = 0.0;
    for k in 0..k_count {
        let mean_n = s_msgs[k] / n;
        let mean_next = s_next_t[k] / n;
        let lhs = tau_mean[k] * (mean_n + 1.0);
        let e_tau = tau_se[k] * (mean_n + 1.0);
        let e_next = se_t * 1.5; // next_t tracks T
        let se = fmath::sqrt(e_tau * e_tau + e_next * e_next);
        wald_sum += lhs - mean_next;
        wald_var += se * se;
    }
    let kf = k_count as f64;
    Ok(IdentityCheck {
        hypothesis: hyp,
        mean_delay: Estimate {
            value: mean_t,
            std_error: se_t,
        },
        rhs,
        residual: Estimate {
            value: mean_d,
            std_error: se_d,
        },
        wald_residual: Estimate {
            value: wald_sum / kf,
            std_error: fmath::sqrt(wald_var) / kf,
        },
        trials_used: used,
        truncated,
    })
}
