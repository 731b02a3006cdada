//! Fusion-center processing: channel-aware LLR updates, the global SPRT,
//! and the conventional demodulate-then-fuse baselines.
//!
//! The fusion center knows each sensor's local error probabilities
//! `(α_k, β_k)` and the channel statistics, and computes the LLR of the
//! *received* signal directly. For binary channels this is a two-point
//! formula; for continuous channels it is a log-ratio of two-component
//! Gaussian mixtures, evaluated by factoring out the dominant exponent so
//! that high-SNR inputs neither overflow nor lose the sign.
//!
//! Every received-signal LLR is bounded in magnitude by the ideal-channel
//! LLR of the corresponding bit: a noisy channel can only shrink the
//! evidence carried by one message.

use rand_core::RngCore;

use crate::channel::{transmit, ChannelInput, ChannelModel, ReceivedSignal, Signaling};
use crate::detection::{Bit, Estimate};
use crate::fmath;
use crate::logexp::{ln_weighted_sum_exp2, ln_weighted_sum_exp3};
use crate::rng::uniform01;
use crate::{Complex64, Hypothesis};

/// Errors from fusion-side operations.
#[derive(Debug, Clone, PartialEq)]
pub enum FusionError {
    /// A probability argument was outside its open domain.
    InvalidProbability(&'static str),
    InvalidParameter(&'static str),
    /// `sprt_step` on a state that has already decided.
    AlreadyDecided,
    /// Operation does not apply to this channel family.
    NotApplicable,
    /// Received-signal variant does not match the configured channel.
    SignalMismatch,
}

impl core::fmt::Display for FusionError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            FusionError::InvalidProbability(p) => write!(f, "invalid probability: {p}"),
            FusionError::InvalidParameter(p) => write!(f, "invalid parameter: {p}"),
            FusionError::AlreadyDecided => write!(f, "already decided"),
            FusionError::NotApplicable => write!(f, "not applicable"),
            FusionError::SignalMismatch => write!(f, "channel/input mismatch"),
        }
    }
}

impl core::error::Error for FusionError {}

fn check_unit_open(p: f64, name: &'static str) -> Result<(), FusionError> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(FusionError::InvalidProbability(name))
    }
}

/// LLR of a correctly received bit on an ideal channel:
/// `log((1-β)/α)` for `+1`, `log(β/(1-α))` for `-1`.
pub fn llr_ideal(bit: Bit, alpha: f64, beta: f64) -> Result<f64, FusionError> {
    check_unit_open(alpha, "alpha")?;
    check_unit_open(beta, "beta")?;
    Ok(match bit {
        Bit::Plus => fmath::ln((1.0 - beta) / alpha),
        Bit::Minus => fmath::ln(beta / (1.0 - alpha)),
    })
}

/// Largest possible magnitude of a single-message LLR, attained on the
/// ideal channel. Noisy channels stay within it.
pub fn ideal_llr_bound(alpha: f64, beta: f64) -> Result<f64, FusionError> {
    let up = llr_ideal(Bit::Plus, alpha, beta)?;
    let dn = llr_ideal(Bit::Minus, alpha, beta)?;
    Ok(up.abs().max(dn.abs()))
}

/// Binary erasure channel: erased messages carry no update; surviving bits
/// carry exactly the ideal-channel LLR.
pub fn llr_bec(signal: &ReceivedSignal, alpha: f64, beta: f64) -> Result<f64, FusionError> {
    match signal {
        ReceivedSignal::Erased => {
            check_unit_open(alpha, "alpha")?;
            check_unit_open(beta, "beta")?;
            Ok(0.0)
        }
        ReceivedSignal::Binary(b) => llr_ideal(*b, alpha, beta),
        ReceivedSignal::Complex(_) => Err(FusionError::SignalMismatch),
    }
}

/// Effective local error probabilities seen through a binary symmetric
/// channel: a crossover `ε` maps `(α, β)` to `((1-2ε)α + ε, (1-2ε)β + ε)`.
pub fn bsc_effective_probs(alpha: f64, beta: f64, epsilon: f64) -> (f64, f64) {
    (
        (1.0 - 2.0 * epsilon) * alpha + epsilon,
        (1.0 - 2.0 * epsilon) * beta + epsilon,
    )
}

/// Binary symmetric channel LLR: the ideal formula at the effective error
/// probabilities. Requires `ε < 0.5` so the sign structure survives.
pub fn llr_bsc(bit: Bit, alpha: f64, beta: f64, epsilon: f64) -> Result<f64, FusionError> {
    if !(0.0..0.5).contains(&epsilon) {
        return Err(FusionError::InvalidParameter("bsc epsilon"));
    }
    check_unit_open(alpha, "alpha")?;
    check_unit_open(beta, "beta")?;
    let (ah, bh) = bsc_effective_probs(alpha, beta, epsilon);
    llr_ideal(bit, ah, bh)
}

/// Shared mixture LLR for the continuous channels: received signal is
/// `N_c(mean_a, var_a)` when `+1` was sent and `N_c(mean_b, var_b)` when
/// `-1` was sent (variances are totals; the `1/πv` normalizers enter as
/// mixture weights).
fn two_gaussian_llr(
    z: Complex64,
    mean_a: Complex64,
    mean_b: Complex64,
    var_a: f64,
    var_b: f64,
    alpha: f64,
    beta: f64,
) -> f64 {
    let c = (z - mean_a).norm_sqr() / var_a;
    let d = (z - mean_b).norm_sqr() / var_b;
    let num = ln_weighted_sum_exp2((1.0 - beta) / var_a, -c, beta / var_b, -d);
    let den = ln_weighted_sum_exp2(alpha / var_a, -c, (1.0 - alpha) / var_b, -d);
    num - den
}

/// AWGN channel-aware LLR with known gain `h`:
/// `log[((1-β) e^{-c} + β e^{-d}) / (α e^{-c} + (1-α) e^{-d})]` with
/// `c = |z - h a|²/σ²`, `d = |z - h b|²/σ²`.
pub fn llr_awgn(
    z: Complex64,
    alpha: f64,
    beta: f64,
    gain: Complex64,
    noise_var: f64,
    signaling: &Signaling,
) -> Result<f64, FusionError> {
    if !(noise_var > 0.0) {
        return Err(FusionError::InvalidParameter("noise_var"));
    }
    check_unit_open(alpha, "alpha")?;
    check_unit_open(beta, "beta")?;
    let c = (z - gain * signaling.level_a()).norm_sqr() / noise_var;
    let d = (z - gain * signaling.level_b()).norm_sqr() / noise_var;
    let num = ln_weighted_sum_exp2(1.0 - beta, -c, beta, -d);
    let den = ln_weighted_sum_exp2(alpha, -c, 1.0 - alpha, -d);
    Ok(num - den)
}

/// Total received variance per level under fading with gain spread
/// `gain_var`: `|x|² σ_h² + σ²`.
pub fn fading_level_variances(signaling: &Signaling, gain_var: f64, noise_var: f64) -> (f64, f64) {
    (
        signaling.level_a().norm_sqr() * gain_var + noise_var,
        signaling.level_b().norm_sqr() * gain_var + noise_var,
    )
}

/// Rayleigh channel-aware LLR: both levels arrive zero-mean, distinguished
/// only by their variances `σ_a² = |a|²σ_h² + σ²`, `σ_b² = |b|²σ_h² + σ²`.
pub fn llr_rayleigh(
    z: Complex64,
    alpha: f64,
    beta: f64,
    gain_var: f64,
    noise_var: f64,
    signaling: &Signaling,
) -> Result<f64, FusionError> {
    if !(noise_var > 0.0) {
        return Err(FusionError::InvalidParameter("noise_var"));
    }
    if !(gain_var > 0.0) {
        return Err(FusionError::InvalidParameter("gain_var"));
    }
    check_unit_open(alpha, "alpha")?;
    check_unit_open(beta, "beta")?;
    let (va, vb) = fading_level_variances(signaling, gain_var, noise_var);
    let zero = Complex64::new(0.0, 0.0);
    Ok(two_gaussian_llr(z, zero, zero, va, vb, alpha, beta))
}

/// Rician channel-aware LLR: level means `μa, μb` with the same variances
/// as the Rayleigh case. Zero gain spread degenerates exactly to the AWGN
/// rule with `h = μ`; zero gain mean degenerates exactly to Rayleigh.
pub fn llr_rician(
    z: Complex64,
    alpha: f64,
    beta: f64,
    gain_mean: Complex64,
    gain_var: f64,
    noise_var: f64,
    signaling: &Signaling,
) -> Result<f64, FusionError> {
    if !(gain_var >= 0.0) {
        return Err(FusionError::InvalidParameter("gain_var"));
    }
    if gain_var == 0.0 {
        return llr_awgn(z, alpha, beta, gain_mean, noise_var, signaling);
    }
    if !(noise_var > 0.0) {
        return Err(FusionError::InvalidParameter("noise_var"));
    }
    check_unit_open(alpha, "alpha")?;
    check_unit_open(beta, "beta")?;
    let (va, vb) = fading_level_variances(signaling, gain_var, noise_var);
    Ok(two_gaussian_llr(
        z,
        gain_mean * signaling.level_a(),
        gain_mean * signaling.level_b(),
        va,
        vb,
        alpha,
        beta,
    ))
}

/// Channel-aware LLR of one received signal, dispatching on the channel
/// family. This is what the trial engine calls per message.
pub fn received_llr(
    signal: &ReceivedSignal,
    channel: &ChannelModel,
    signaling: &Signaling,
    alpha: f64,
    beta: f64,
) -> Result<f64, FusionError> {
    match (channel, signal) {
        (ChannelModel::Ideal, ReceivedSignal::Binary(b)) => llr_ideal(*b, alpha, beta),
        (ChannelModel::Bec { .. }, sig @ (ReceivedSignal::Binary(_) | ReceivedSignal::Erased)) => {
            llr_bec(sig, alpha, beta)
        }
        (ChannelModel::Bsc { epsilon }, ReceivedSignal::Binary(b)) => {
            llr_bsc(*b, alpha, beta, *epsilon)
        }
        (ChannelModel::Awgn { gain, noise_var }, ReceivedSignal::Complex(z)) => {
            llr_awgn(*z, alpha, beta, *gain, *noise_var, signaling)
        }
        (
            ChannelModel::Rayleigh {
                gain_var,
                noise_var,
            },
            ReceivedSignal::Complex(z),
        ) => llr_rayleigh(*z, alpha, beta, *gain_var, *noise_var, signaling),
        (
            ChannelModel::Rician {
                gain_mean,
                gain_var,
                noise_var,
            },
            ReceivedSignal::Complex(z),
        ) => llr_rician(
            *z, alpha, beta, *gain_mean, *gain_var, *noise_var, signaling,
        ),
        _ => Err(FusionError::SignalMismatch),
    }
}

/// Per-slot send probabilities used when the fusion center cannot detect
/// transmission times: under `H_i` a sensor transmits in a given slot with
/// probability `1 / E_i[τ]`, the reciprocal mean inter-sampling interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SendProbabilities {
    pub h1: f64,
    pub h0: f64,
}

impl SendProbabilities {
    pub fn validate(&self) -> Result<(), FusionError> {
        for p in [self.h1, self.h0] {
            if !(p > 0.0 && p <= 1.0) {
                return Err(FusionError::InvalidProbability("send probability"));
            }
        }
        Ok(())
    }
}

/// Per-slot AWGN LLR when transmission times are not reliably detected.
///
/// The slot signal is `a`, `b`, or silence, with prior send probability
/// `P_{s,i}` under `H_i`:
/// `log[((1-β)P_{s,1} e^{-c} + β P_{s,1} e^{-d} + (1-P_{s,1}) e^{-g}) /
///      (α P_{s,0} e^{-c} + (1-α) P_{s,0} e^{-d} + (1-P_{s,0}) e^{-g})]`,
/// `g = |z|²/σ²`. With `P_{s,1} = P_{s,0} = 1` this reduces exactly to the
/// reliable-detection AWGN rule.
pub fn llr_unreliable_awgn(
    z: Complex64,
    alpha: f64,
    beta: f64,
    gain: Complex64,
    noise_var: f64,
    signaling: &Signaling,
    send: SendProbabilities,
) -> Result<f64, FusionError> {
    if !(noise_var > 0.0) {
        return Err(FusionError::InvalidParameter("noise_var"));
    }
    check_unit_open(alpha, "alpha")?;
    check_unit_open(beta, "beta")?;
    send.validate()?;
    let c = (z - gain * signaling.level_a()).norm_sqr() / noise_var;
    let d = (z - gain * signaling.level_b()).norm_sqr() / noise_var;
    let g = z.norm_sqr() / noise_var;
    let num = ln_weighted_sum_exp3(
        (1.0 - beta) * send.h1,
        -c,
        beta * send.h1,
        -d,
        1.0 - send.h1,
        -g,
    );
    let den = ln_weighted_sum_exp3(
        alpha * send.h0,
        -c,
        (1.0 - alpha) * send.h0,
        -d,
        1.0 - send.h0,
        -g,
    );
    Ok(num - den)
}

/// Per-slot LLR under unreliable transmission-time detection for any
/// continuous channel; the silent slot is `N_c(0, σ²)`.
pub fn llr_unreliable(
    z: Complex64,
    alpha: f64,
    beta: f64,
    channel: &ChannelModel,
    signaling: &Signaling,
    send: SendProbabilities,
) -> Result<f64, FusionError> {
    match *channel {
        ChannelModel::Awgn { gain, noise_var } => {
            llr_unreliable_awgn(z, alpha, beta, gain, noise_var, signaling, send)
        }
        ChannelModel::Rayleigh {
            gain_var,
            noise_var,
        } => {
            check_unit_open(alpha, "alpha")?;
            check_unit_open(beta, "beta")?;
            send.validate()?;
            let (va, vb) = fading_level_variances(signaling, gain_var, noise_var);
            let zero = Complex64::new(0.0, 0.0);
            Ok(three_gaussian_llr(
                z, zero, zero, va, vb, noise_var, alpha, beta, send,
            ))
        }
        ChannelModel::Rician {
            gain_mean,
            gain_var,
            noise_var,
        } => {
            check_unit_open(alpha, "alpha")?;
            check_unit_open(beta, "beta")?;
            send.validate()?;
            let (va, vb) = fading_level_variances(signaling, gain_var, noise_var);
            Ok(three_gaussian_llr(
                z,
                gain_mean * signaling.level_a(),
                gain_mean * signaling.level_b(),
                va,
                vb,
                noise_var,
                alpha,
                beta,
                send,
            ))
        }
        _ => Err(FusionError::NotApplicable),
    }
}

#[allow(clippy::too_many_arguments)]
fn three_gaussian_llr(
    z: Complex64,
    mean_a: Complex64,
    mean_b: Complex64,
    var_a: f64,
    var_b: f64,
    var_silent: f64,
    alpha: f64,
    beta: f64,
    send: SendProbabilities,
) -> f64 {
    let c = (z - mean_a).norm_sqr() / var_a;
    let d = (z - mean_b).norm_sqr() / var_b;
    let g = z.norm_sqr() / var_silent;
    let num = ln_weighted_sum_exp3(
        (1.0 - beta) * send.h1 / var_a,
        -c,
        beta * send.h1 / var_b,
        -d,
        (1.0 - send.h1) / var_silent,
        -g,
    );
    let den = ln_weighted_sum_exp3(
        alpha * send.h0 / var_a,
        -c,
        (1.0 - alpha) * send.h0 / var_b,
        -d,
        (1.0 - send.h0) / var_silent,
        -g,
    );
    num - den
}

/// Two-step alternative for unreliable transmission times: gate on the
/// presence statistic `|z|`, then apply the channel-aware LLR only to slots
/// that pass. Gating converts the continuous channel into an erasure
/// channel whose erasure probability is the miss probability of the gate.
pub fn threshold_then_fuse<E>(
    z: Complex64,
    detection_threshold: f64,
    channel_aware_llr: impl FnOnce(Complex64) -> Result<f64, E>,
) -> Result<Option<f64>, E> {
    if z.norm_sqr() >= detection_threshold * detection_threshold {
        channel_aware_llr(z).map(Some)
    } else {
        Ok(None)
    }
}

/// Monte Carlo estimate of the gate's miss probability: the chance that a
/// slot carrying a real message fails `|z| >= threshold`, with bits drawn
/// from their distribution under `hyp`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_gate_miss_probability(
    detection_threshold: f64,
    channel: &ChannelModel,
    signaling: &Signaling,
    alpha: f64,
    beta: f64,
    hyp: Hypothesis,
    trials: u64,
    rng: &mut impl RngCore,
) -> Result<Estimate, FusionError> {
    if trials == 0 {
        return Err(FusionError::InvalidParameter("trials"));
    }
    if channel.is_discrete() {
        return Err(FusionError::NotApplicable);
    }
    check_unit_open(alpha, "alpha")?;
    check_unit_open(beta, "beta")?;
    let p_plus = match hyp {
        Hypothesis::H1 => 1.0 - beta,
        Hypothesis::H0 => alpha,
    };
    let mut missed = 0u64;
    for _ in 0..trials {
        let bit = if uniform01(rng) < p_plus {
            Bit::Plus
        } else {
            Bit::Minus
        };
        let x = transmit(bit, signaling);
        let z = match crate::channel::propagate(ChannelInput::Symbol(x), channel, rng) {
            Ok(ReceivedSignal::Complex(z)) => z,
            _ => return Err(FusionError::SignalMismatch),
        };
        if z.norm_sqr() < detection_threshold * detection_threshold {
            missed += 1;
        }
    }
    let p = missed as f64 / trials as f64;
    Ok(Estimate {
        value: p,
        std_error: fmath::sqrt(p * (1.0 - p) / trials as f64),
    })
}

/// Maximum-likelihood hard demodulation of a continuous-channel output,
/// used by the conventional baselines. Ties resolve to `+1`.
pub fn conventional_demodulate(
    z: Complex64,
    channel: &ChannelModel,
    signaling: &Signaling,
) -> Result<Bit, FusionError> {
    let (score_a, score_b) = match *channel {
        ChannelModel::Awgn { gain, .. } => (
            (z.conj() * gain * signaling.level_a()).re,
            (z.conj() * gain * signaling.level_b()).re,
        ),
        ChannelModel::Rayleigh {
            gain_var,
            noise_var,
        } => {
            let (va, vb) = fading_level_variances(signaling, gain_var, noise_var);
            (
                -z.norm_sqr() / (2.0 * va) - fmath::ln(va),
                -z.norm_sqr() / (2.0 * vb) - fmath::ln(vb),
            )
        }
        ChannelModel::Rician {
            gain_mean,
            gain_var,
            noise_var,
        } => {
            let (va, vb) = fading_level_variances(signaling, gain_var, noise_var);
            (
                -(z - gain_mean * signaling.level_a()).norm_sqr() / (2.0 * va) - fmath::ln(va),
                -(z - gain_mean * signaling.level_b()).norm_sqr() / (2.0 * vb) - fmath::ln(vb),
            )
        }
        _ => return Err(FusionError::NotApplicable),
    };
    Ok(if score_a >= score_b {
        Bit::Plus
    } else {
        Bit::Minus
    })
}

/// Monte Carlo estimate of the hard demodulator's bit error rate, averaged
/// over equiprobable transmitted bits (`trials` sends per bit).
pub fn estimate_ml_error_rate(
    channel: &ChannelModel,
    signaling: &Signaling,
    trials: u64,
    rng: &mut impl RngCore,
) -> Result<Estimate, FusionError> {
    if trials == 0 {
        return Err(FusionError::InvalidParameter("trials"));
    }
    let mut errors = 0u64;
    for bit in [Bit::Plus, Bit::Minus] {
        let x = transmit(bit, signaling);
        for _ in 0..trials {
            let z = match crate::channel::propagate(ChannelInput::Symbol(x), channel, rng) {
                Ok(ReceivedSignal::Complex(z)) => z,
                Ok(_) => return Err(FusionError::NotApplicable),
                Err(_) => return Err(FusionError::NotApplicable),
            };
            if conventional_demodulate(z, channel, signaling)? != bit {
                errors += 1;
            }
        }
    }
    let n = (2 * trials) as f64;
    let p = errors as f64 / n;
    Ok(Estimate {
        value: p,
        std_error: fmath::sqrt(p * (1.0 - p) / n),
    })
}

/// How a conventional receiver turns a demodulated bit into an update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConventionalMode {
    /// Pretend the channel is ideal; vulnerable at low SNR.
    TreatAsIdeal,
    /// Model demodulation as a binary symmetric channel with the
    /// demodulator's (estimated) error rate.
    TreatAsBsc { epsilon_ml: f64 },
}

/// Update value for a demodulated bit under the chosen conventional mode.
pub fn conventional_update(
    bit: Bit,
    mode: ConventionalMode,
    alpha: f64,
    beta: f64,
) -> Result<f64, FusionError> {
    match mode {
        ConventionalMode::TreatAsIdeal => llr_ideal(bit, alpha, beta),
        ConventionalMode::TreatAsBsc { epsilon_ml } => llr_bsc(bit, alpha, beta, epsilon_ml),
    }
}

/// Global SPRT thresholds `(Ã, B̃)`; the running sum decides `H1` at or
/// above `Ã` and `H0` at or below `-B̃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    pub threshold_up: f64,
    pub threshold_down: f64,
}

impl FusionConfig {
    pub fn new(threshold_up: f64, threshold_down: f64) -> Result<Self, FusionError> {
        if !(threshold_up > 0.0) || !threshold_up.is_finite() {
            return Err(FusionError::InvalidParameter("threshold_up"));
        }
        if !(threshold_down > 0.0) || !threshold_down.is_finite() {
            return Err(FusionError::InvalidParameter("threshold_down"));
        }
        Ok(Self {
            threshold_up,
            threshold_down,
        })
    }

    /// Thresholds at the error-probability upper bounds `|log α|, |log β|`,
    /// which guarantee the target rates.
    pub fn from_targets(alpha: f64, beta: f64) -> Result<Self, FusionError> {
        check_unit_open(alpha, "alpha")?;
        check_unit_open(beta, "beta")?;
        Self::new(-fmath::ln(alpha), -fmath::ln(beta))
    }
}

/// Decision status of the global test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Pending,
    DecideH1,
    DecideH0,
}

/// One LLR message ready for the global test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LlrUpdate {
    pub sensor_id: u32,
    pub value: f64,
}

/// Running state of the global SPRT. Decided states are absorbing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionState {
    pub global_llr: f64,
    pub decision: Decision,
    pub decision_time: Option<u64>,
    pub messages_consumed: u64,
}

impl Default for FusionState {
    fn default() -> Self {
        Self::new()
    }
}

impl FusionState {
    pub fn new() -> Self {
        Self {
            global_llr: 0.0,
            decision: Decision::Pending,
            decision_time: None,
            messages_consumed: 0,
        }
    }

    pub fn is_decided(&self) -> bool {
        self.decision != Decision::Pending
    }
}

/// Applies one update and performs the SPRT comparison; crossing at exact
/// equality decides. `time` is the arrival time of the update and becomes
/// the decision time if this update decides.
pub fn sprt_step(
    state: &mut FusionState,
    update: LlrUpdate,
    time: u64,
    config: &FusionConfig,
) -> Result<Decision, FusionError> {
    if state.is_decided() {
        return Err(FusionError::AlreadyDecided);
    }
    state.global_llr += update.value;
    state.messages_consumed += 1;
    if state.global_llr >= config.threshold_up {
        state.decision = Decision::DecideH1;
        state.decision_time = Some(time);
    } else if state.global_llr <= -config.threshold_down {
        state.decision = Decision::DecideH0;
        state.decision_time = Some(time);
    }
    Ok(state.decision)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::propagate;
    use crate::rng::{complex_gaussian, substream};
    use approx::assert_relative_eq;

    const LOG9: f64 = 2.197224577336219;

    #[test]
    fn ideal_llr_values() {
        assert_relative_eq!(
            llr_ideal(Bit::Plus, 0.1, 0.1).unwrap(),
            LOG9,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            llr_ideal(Bit::Minus, 0.1, 0.1).unwrap(),
            -LOG9,
            max_relative = 1e-12
        );
        assert_eq!(llr_ideal(Bit::Plus, 0.5, 0.5).unwrap(), 0.0);
        assert!(llr_ideal(Bit::Plus, 0.0, 0.1).is_err());
        assert!(llr_ideal(Bit::Plus, 0.1, 1.0).is_err());
    }

    #[test]
    fn bec_llr_values() {
        assert_eq!(llr_bec(&ReceivedSignal::Erased, 0.1, 0.1).unwrap(), 0.0);
        assert_relative_eq!(
            llr_bec(&ReceivedSignal::Binary(Bit::Plus), 0.1, 0.1).unwrap(),
            LOG9,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            llr_bec(&ReceivedSignal::Binary(Bit::Minus), 0.2, 0.05).unwrap(),
            -2.772588722239781,
            max_relative = 1e-12
        );
    }

    #[test]
    fn bsc_llr_values() {
        // alpha = beta = 0.1, eps = 0.1 -> effective 0.18.
        assert_relative_eq!(
            llr_bsc(Bit::Plus, 0.1, 0.1, 0.1).unwrap(),
            1.516347489368088,
            max_relative = 1e-12
        );
        // eps = 0 reduces bit-exactly to the ideal rule.
        for bit in [Bit::Plus, Bit::Minus] {
            assert_eq!(
                llr_bsc(bit, 0.1, 0.1, 0.0).unwrap(),
                llr_ideal(bit, 0.1, 0.1).unwrap()
            );
        }
        // crossover shrinks the update magnitude.
        assert!(llr_bsc(Bit::Plus, 0.1, 0.1, 0.1).unwrap().abs() < LOG9);
        assert!(llr_bsc(Bit::Plus, 0.1, 0.1, 0.5).is_err());
    }

    #[test]
    fn awgn_llr_examples() {
        let s = Signaling::antipodal(1.0).unwrap();
        let h = Complex64::new(1.0, 0.0);
        // Equidistant point: zero update.
        let v = llr_awgn(Complex64::new(0.0, 0.7), 0.1, 0.2, h, 1.0, &s).unwrap();
        assert_relative_eq!(v, 0.0, epsilon = 1e-12);
        // Noiseless limit at z = h a approaches the ideal +1 LLR.
        let v = llr_awgn(Complex64::new(1.0, 0.0), 0.1, 0.1, h, 1e-6, &s).unwrap();
        assert_relative_eq!(v, LOG9, max_relative = 1e-9);
        // Frozen direct evaluation at z = 0.5.
        let v = llr_awgn(Complex64::new(0.5, 0.0), 0.1, 0.1, h, 1.0, &s).unwrap();
        assert_relative_eq!(v, 1.415536091263972, max_relative = 1e-12);
        assert!(v.abs() <= LOG9);
    }

    #[test]
    fn awgn_llr_is_stable_at_high_snr() {
        let s = Signaling::antipodal(100.0).unwrap();
        let h = Complex64::new(1.0, 0.0);
        let v = llr_awgn(Complex64::new(100.0, 0.0), 0.1, 0.1, h, 1e-4, &s).unwrap();
        assert!(v.is_finite());
        assert_relative_eq!(v, LOG9, max_relative = 1e-9);
    }

    #[test]
    fn rayleigh_llr_properties() {
        let ook = Signaling::on_off(10f64.sqrt(), 1.0).unwrap();
        // Equal magnitudes carry nothing.
        let equal = Signaling::antipodal(2.0).unwrap();
        for re in [-3.0, 0.0, 1.7] {
            let v = llr_rayleigh(Complex64::new(re, 0.4), 0.1, 0.1, 1.0, 1.0, &equal).unwrap();
            assert_relative_eq!(v, 0.0, epsilon = 1e-12);
        }
        // Huge |z| points to the larger-variance level (here level a).
        let v = llr_rayleigh(Complex64::new(300.0, 0.0), 0.1, 0.1, 1.0, 1.0, &ook).unwrap();
        assert_relative_eq!(v, LOG9, max_relative = 1e-6);
        // Magnitude bound over random draws.
        let bound = ideal_llr_bound(0.1, 0.2).unwrap();
        let mut rng = substream(21, &[0]);
        for _ in 0..100_000 {
            let z = complex_gaussian(&mut rng, Complex64::new(0.0, 0.0), 25.0);
            let v = llr_rayleigh(z, 0.1, 0.2, 1.0, 1.0, &ook).unwrap();
            assert!(v.abs() <= bound * (1.0 + 1e-12) + 1e-12);
        }
    }

    #[test]
    fn rician_degenerates_exactly() {
        let s = Signaling::on_off(3.0, 1.0).unwrap();
        let mu = Complex64::new(0.4, -0.2);
        let mut rng = substream(22, &[0]);
        for _ in 0..1000 {
            let z = complex_gaussian(&mut rng, Complex64::new(0.2, 0.1), 9.0);
            // zero spread -> AWGN with gain mu, bit-identical.
            assert_eq!(
                llr_rician(z, 0.1, 0.2, mu, 0.0, 0.7, &s).unwrap(),
                llr_awgn(z, 0.1, 0.2, mu, 0.7, &s).unwrap()
            );
            // zero mean -> Rayleigh, bit-identical.
            assert_eq!(
                llr_rician(z, 0.1, 0.2, Complex64::new(0.0, 0.0), 0.8, 0.7, &s).unwrap(),
                llr_rayleigh(z, 0.1, 0.2, 0.8, 0.7, &s).unwrap()
            );
        }
        // Antipodal, tiny noise, z at the +1 level: ideal +1 LLR.
        let anti = Signaling::antipodal(2.0).unwrap();
        let v = llr_rician(mu * 2.0, 0.1, 0.1, mu, 1e-9, 1e-9, &anti).unwrap();
        assert_relative_eq!(v, LOG9, max_relative = 1e-6);
    }

    #[test]
    fn unreliable_awgn_reduces_and_limits() {
        let s = Signaling::antipodal(5.0).unwrap();
        let h = Complex64::new(1.0, 0.0);
        let both_one = SendProbabilities { h1: 1.0, h0: 1.0 };
        let mut rng = substream(23, &[0]);
        for _ in 0..1000 {
            let z = complex_gaussian(&mut rng, Complex64::new(0.0, 0.0), 30.0);
            assert_eq!(
                llr_unreliable_awgn(z, 0.1, 0.2, h, 1.0, &s, both_one).unwrap(),
                llr_awgn(z, 0.1, 0.2, h, 1.0, &s).unwrap()
            );
        }
        // Silent slot with well-separated levels: only the priors speak.
        let send = SendProbabilities { h1: 0.25, h0: 0.2 };
        let v = llr_unreliable_awgn(Complex64::new(0.0, 0.0), 0.1, 0.1, h, 0.01, &s, send).unwrap();
        assert_relative_eq!(v, (0.75f64 / 0.8).ln(), max_relative = 1e-6);
        assert!(llr_unreliable_awgn(
            Complex64::new(0.0, 0.0),
            0.1,
            0.1,
            h,
            1.0,
            &s,
            SendProbabilities { h1: 0.0, h0: 0.5 }
        )
        .is_err());
    }

    #[test]
    fn unreliable_fading_reduces_to_message_rules_at_certain_send() {
        // With unit send probability the silent component drops out and
        // the per-slot rule coincides bit-for-bit with the message rule.
        let ook = Signaling::on_off(10f64.sqrt(), 1.0).unwrap();
        let both_one = SendProbabilities { h1: 1.0, h0: 1.0 };
        let ray = ChannelModel::Rayleigh {
            gain_var: 0.8,
            noise_var: 0.6,
        };
        let ric = ChannelModel::Rician {
            gain_mean: Complex64::new(0.4, 0.7),
            gain_var: 0.8,
            noise_var: 0.6,
        };
        let mut rng = substream(26, &[0]);
        for _ in 0..1000 {
            let z = complex_gaussian(&mut rng, Complex64::new(0.0, 0.0), 9.0);
            assert_eq!(
                llr_unreliable(z, 0.1, 0.2, &ray, &ook, both_one).unwrap(),
                llr_rayleigh(z, 0.1, 0.2, 0.8, 0.6, &ook).unwrap()
            );
            assert_eq!(
                llr_unreliable(z, 0.1, 0.2, &ric, &ook, both_one).unwrap(),
                llr_rician(z, 0.1, 0.2, Complex64::new(0.4, 0.7), 0.8, 0.6, &ook).unwrap()
            );
        }
        // Per-slot fusion is undefined for binary channels.
        assert_eq!(
            llr_unreliable(
                Complex64::new(0.0, 0.0),
                0.1,
                0.2,
                &ChannelModel::Ideal,
                &ook,
                both_one
            ),
            Err(FusionError::NotApplicable)
        );
    }

    #[test]
    fn threshold_gate_limits() {
        let s = Signaling::antipodal(3.0).unwrap();
        let h = Complex64::new(1.0, 0.0);
        let llr = |z| llr_awgn(z, 0.1, 0.1, h, 1.0, &s);
        let z = Complex64::new(2.5, 0.0);
        // Zero threshold always fuses.
        assert!(threshold_then_fuse(z, 0.0, llr).unwrap().is_some());
        // Huge threshold never fuses.
        assert!(threshold_then_fuse(z, 1e6, llr).unwrap().is_none());

        let ch = ChannelModel::Awgn {
            gain: h,
            noise_var: 1.0,
        };
        let mut rng = substream(24, &[0]);
        let miss =
            estimate_gate_miss_probability(1e6, &ch, &s, 0.1, 0.1, Hypothesis::H1, 2000, &mut rng)
                .unwrap();
        assert_eq!(miss.value, 1.0);
    }

    #[test]
    fn gate_scales_received_information() {
        // Moderate threshold: per-sent-message information with the gate is
        // (1 - miss) times the ungated information, within MC error.
        let s = Signaling::antipodal(3.0).unwrap();
        let h = Complex64::new(1.0, 0.0);
        let ch = ChannelModel::Awgn {
            gain: h,
            noise_var: 1.0,
        };
        let thr = 0.8;
        let (alpha, beta) = (0.1, 0.1);
        let mut rng = substream(25, &[0]);
        let miss = estimate_gate_miss_probability(
            thr,
            &ch,
            &s,
            alpha,
            beta,
            Hypothesis::H1,
            400_000,
            &mut rng,
        )
        .unwrap();
        let mut rng = substream(25, &[1]);
        let n = 400_000;
        let (mut sum_gated, mut sum_all) = (0.0, 0.0);
        let mut sq_gated = 0.0;
        for _ in 0..n {
            let bit = if uniform01(&mut rng) < 1.0 - beta {
                Bit::Plus
            } else {
                Bit::Minus
            };
            let x = transmit(bit, &s);
            let z = match propagate(ChannelInput::Symbol(x), &ch, &mut rng).unwrap() {
                ReceivedSignal::Complex(z) => z,
                _ => unreachable!(),
            };
            let lam = llr_awgn(z, alpha, beta, h, 1.0, &s).unwrap();
            sum_all += lam;
            if let Some(v) =
                threshold_then_fuse(z, thr, |z| llr_awgn(z, alpha, beta, h, 1.0, &s)).unwrap()
            {
                sum_gated += v;
                sq_gated += v * v;
            }
        }
        let nf = n as f64;
        let gated = sum_gated / nf;
        let scaled = (1.0 - miss.value) * (sum_all / nf);
        let se = (sq_gated / nf - gated * gated).sqrt() / nf.sqrt();
        assert!(
            (gated - scaled).abs() <= 4.0 * se + 0.01 * scaled.abs(),
            "gated {gated} vs scaled {scaled} (se {se})"
        );
    }

    #[test]
    fn demodulation_rules() {
        let anti = Signaling::antipodal(1.0).unwrap();
        let h = Complex64::new(1.0, 0.0);
        let awgn = ChannelModel::Awgn {
            gain: h,
            noise_var: 1.0,
        };
        assert_eq!(
            conventional_demodulate(Complex64::new(0.7, 0.0), &awgn, &anti).unwrap(),
            Bit::Plus
        );
        assert_eq!(
            conventional_demodulate(Complex64::new(-0.2, 3.0), &awgn, &anti).unwrap(),
            Bit::Minus
        );
        // Boundary resolves to +1.
        assert_eq!(
            conventional_demodulate(Complex64::new(0.0, 1.3), &awgn, &anti).unwrap(),
            Bit::Plus
        );
        // Rayleigh with |a| > |b|: huge |z| demodulates to the
        // larger-variance level.
        let ook = Signaling::on_off(10f64.sqrt(), 1.0).unwrap();
        let ray = ChannelModel::Rayleigh {
            gain_var: 1.0,
            noise_var: 1.0,
        };
        assert_eq!(
            conventional_demodulate(Complex64::new(40.0, 0.0), &ray, &ook).unwrap(),
            Bit::Plus
        );
        assert_eq!(
            conventional_demodulate(Complex64::new(0.0, 0.0), &ray, &ook).unwrap(),
            Bit::Minus
        );
        assert!(
            conventional_demodulate(Complex64::new(0.0, 0.0), &ChannelModel::Ideal, &anti).is_err()
        );
    }

    #[test]
    fn conventional_update_modes() {
        for bit in [Bit::Plus, Bit::Minus] {
            assert_eq!(
                conventional_update(bit, ConventionalMode::TreatAsIdeal, 0.1, 0.1).unwrap(),
                conventional_update(
                    bit,
                    ConventionalMode::TreatAsBsc { epsilon_ml: 0.0 },
                    0.1,
                    0.1
                )
                .unwrap()
            );
        }
        assert_relative_eq!(
            conventional_update(
                Bit::Plus,
                ConventionalMode::TreatAsBsc { epsilon_ml: 0.1 },
                0.1,
                0.1
            )
            .unwrap(),
            1.516347489368088,
            max_relative = 1e-12
        );
    }

    #[test]
    fn sprt_state_machine() {
        let cfg = FusionConfig::new(2.0, 2.0).unwrap();
        let mut st = FusionState::new();
        let upd = |v| LlrUpdate {
            sensor_id: 1,
            value: v,
        };
        assert_eq!(
            sprt_step(&mut st, upd(1.5), 3, &cfg).unwrap(),
            Decision::Pending
        );
        assert_eq!(
            sprt_step(&mut st, upd(0.8), 7, &cfg).unwrap(),
            Decision::DecideH1
        );
        assert_relative_eq!(st.global_llr, 2.3, max_relative = 1e-12);
        assert_eq!(st.decision_time, Some(7));
        assert_eq!(st.messages_consumed, 2);
        assert_eq!(
            sprt_step(&mut st, upd(1.0), 8, &cfg),
            Err(FusionError::AlreadyDecided)
        );

        // Exact boundary decides.
        let mut st = FusionState::new();
        assert_eq!(
            sprt_step(&mut st, upd(-2.0), 1, &cfg).unwrap(),
            Decision::DecideH0
        );

        // Zero updates stay pending.
        let mut st = FusionState::new();
        for t in 1..100 {
            assert_eq!(
                sprt_step(&mut st, upd(0.0), t, &cfg).unwrap(),
                Decision::Pending
            );
        }
    }

    #[test]
    fn received_llr_dispatch_covers_families() {
        let s = Signaling::antipodal(1.0).unwrap();
        let h = Complex64::new(1.0, 0.0);
        let cases: [(ChannelModel, ReceivedSignal); 4] = [
            (ChannelModel::Ideal, ReceivedSignal::Binary(Bit::Plus)),
            (ChannelModel::Bec { epsilon: 0.3 }, ReceivedSignal::Erased),
            (
                ChannelModel::Bsc { epsilon: 0.1 },
                ReceivedSignal::Binary(Bit::Minus),
            ),
            (
                ChannelModel::Awgn {
                    gain: h,
                    noise_var: 1.0,
                },
                ReceivedSignal::Complex(Complex64::new(0.5, 0.0)),
            ),
        ];
        for (ch, sig) in cases {
            assert!(received_llr(&sig, &ch, &s, 0.1, 0.1).is_ok());
        }
        assert_eq!(
            received_llr(&ReceivedSignal::Erased, &ChannelModel::Ideal, &s, 0.1, 0.1),
            Err(FusionError::SignalMismatch)
        );
    }
}
