//! Local sensor processing: observation model, LLR increments,
//! level-triggered sampling, and offline calibration.
//!
//! Each sensor observes a complex Gaussian signal whose mean depends on the
//! hypothesis, accumulates the per-observation LLR, and emits a one-bit
//! message whenever the accumulated LLR since the last emission reaches
//! `threshold_up` or `-threshold_down`. Between emissions the inter-sample
//! intervals and accumulated sums are i.i.d. across messages, which is what
//! the downstream information analysis relies on.

use rand_core::RngCore;

use crate::fmath;
use crate::rng::complex_gaussian;
use crate::{ByHypothesis, Complex64, Hypothesis};

/// Errors from sensor-side operations.
#[derive(Debug, Clone, PartialEq)]
pub enum DetectionError {
    /// Observation was NaN or infinite.
    InvalidObservation,
    /// A parameter was outside its allowed range.
    InvalidParameter(&'static str),
    /// An estimator was asked to run on zero trials.
    EmptyEstimate,
}

impl core::fmt::Display for DetectionError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            DetectionError::InvalidObservation => write!(f, "invalid observation"),
            DetectionError::InvalidParameter(p) => write!(f, "invalid parameter: {p}"),
            DetectionError::EmptyEstimate => write!(f, "empty estimate"),
        }
    }
}

impl core::error::Error for DetectionError {}

/// Complex Gaussian mean-shift observation model.
///
/// Under `H1` observations are `N_c(signal_mean_h1, noise_variance)`, under
/// `H0` they are `N_c(signal_mean_h0, noise_variance)`; `noise_variance` is
/// the total variance (each real component carries half). The default is
/// the unit-mean / zero-mean model with unit noise, whose LLR increment is
/// `2 Re{y} - 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationModel {
    pub signal_mean_h1: Complex64,
    pub signal_mean_h0: Complex64,
    pub noise_variance: f64,
}

impl Default for ObservationModel {
    fn default() -> Self {
        Self {
            signal_mean_h1: Complex64::new(1.0, 0.0),
            signal_mean_h0: Complex64::new(0.0, 0.0),
            noise_variance: 1.0,
        }
    }
}

impl ObservationModel {
    pub fn validate(&self) -> Result<(), DetectionError> {
        if !(self.noise_variance > 0.0) || !self.noise_variance.is_finite() {
            return Err(DetectionError::InvalidParameter("noise_variance"));
        }
        if !self.signal_mean_h1.is_finite() || !self.signal_mean_h0.is_finite() {
            return Err(DetectionError::InvalidParameter("signal mean"));
        }
        if self.signal_mean_h1 == self.signal_mean_h0 {
            return Err(DetectionError::InvalidParameter("identical signal means"));
        }
        Ok(())
    }

    /// Draws one observation under the given hypothesis.
    pub fn observe(&self, hyp: Hypothesis, rng: &mut impl RngCore) -> Complex64 {
        let mean = match hyp {
            Hypothesis::H1 => self.signal_mean_h1,
            Hypothesis::H0 => self.signal_mean_h0,
        };
        complex_gaussian(rng, mean, self.noise_variance)
    }

    /// Per-observation KL information `(E1[l], -E0[l])`; both equal
    /// `|m1 - m0|² / σ²` for the equal-variance Gaussian pair.
    pub fn per_observation_kl(&self) -> ByHypothesis {
        let d = (self.signal_mean_h1 - self.signal_mean_h0).norm_sqr() / self.noise_variance;
        ByHypothesis::new(d, d)
    }
}

/// LLR of a single observation under the mean-shift model, in closed form.
///
/// `l(y) = [2 Re{y* (m1 - m0)} + |m0|² - |m1|²] / σ²`; the quadratic terms
/// cancel analytically, so there is no catastrophic cancellation for far-out
/// observations.
pub fn llr_increment(
    observation: Complex64,
    model: &ObservationModel,
) -> Result<f64, DetectionError> {
    if !observation.is_finite() {
        return Err(DetectionError::InvalidObservation);
    }
    model.validate()?;
    let d = model.signal_mean_h1 - model.signal_mean_h0;
    let cross = 2.0 * (observation.conj() * d).re;
    let shift = model.signal_mean_h0.norm_sqr() - model.signal_mean_h1.norm_sqr();
    Ok((cross + shift) / model.noise_variance)
}

/// Static configuration of one sensor.
///
/// Thresholds may be asymmetric; `alpha_local`/`beta_local` are the local
/// error probabilities induced by the thresholds (probability that the
/// first emitted bit is `+1` under `H0`, resp. `-1` under `H1`), estimated
/// offline and shared with the fusion center.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorConfig {
    pub sensor_id: u32,
    pub model: ObservationModel,
    pub threshold_up: f64,
    pub threshold_down: f64,
    pub alpha_local: f64,
    pub beta_local: f64,
}

impl SensorConfig {
    /// Symmetric-threshold constructor, the common case.
    pub fn symmetric(
        sensor_id: u32,
        model: ObservationModel,
        delta: f64,
        alpha: f64,
        beta: f64,
    ) -> Self {
        Self {
            sensor_id,
            model,
            threshold_up: delta,
            threshold_down: delta,
            alpha_local: alpha,
            beta_local: beta,
        }
    }

    pub fn validate(&self) -> Result<(), DetectionError> {
        self.model.validate()?;
        if !(self.threshold_up > 0.0) || !self.threshold_up.is_finite() {
            return Err(DetectionError::InvalidParameter("threshold_up"));
        }
        if !(self.threshold_down > 0.0) || !self.threshold_down.is_finite() {
            return Err(DetectionError::InvalidParameter("threshold_down"));
        }
        if !(self.alpha_local > 0.0 && self.alpha_local < 1.0) {
            return Err(DetectionError::InvalidParameter("alpha_local"));
        }
        if !(self.beta_local > 0.0 && self.beta_local < 1.0) {
            return Err(DetectionError::InvalidParameter("beta_local"));
        }
        if self.alpha_local + self.beta_local >= 1.0 {
            return Err(DetectionError::InvalidParameter("alpha_local + beta_local"));
        }
        Ok(())
    }
}

/// Running state of a level-triggered sampler.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SamplerState {
    /// LLR accumulated since the last emission; stays inside
    /// `(-threshold_down, threshold_up)` between emissions.
    pub accumulated_llr: f64,
    pub last_sample_time: u64,
    pub messages_emitted: u64,
}

impl SamplerState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// One emission of a level-triggered sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleEvent {
    pub sensor_id: u32,
    pub time: u64,
    pub bit: Bit,
    /// Accumulated LLR at the crossing; `|accumulated_llr|` is at least the
    /// crossed threshold.
    pub accumulated_llr: f64,
    /// Excess over the crossed threshold, nonnegative.
    pub overshoot: f64,
}

/// The one-bit message alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bit {
    Plus,
    Minus,
}

impl Bit {
    pub fn sign(self) -> f64 {
        match self {
            Bit::Plus => 1.0,
            Bit::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Bit {
        match self {
            Bit::Plus => Bit::Minus,
            Bit::Minus => Bit::Plus,
        }
    }
}

/// Adds one LLR increment to the sampler; emits an event when the
/// accumulated sum leaves the open interval (crossing at exact equality
/// counts). The accumulator resets to zero after each emission.
pub fn step_sampler(
    state: &mut SamplerState,
    increment: f64,
    config: &SensorConfig,
    time: u64,
) -> Option<SampleEvent> {
    state.accumulated_llr += increment;
    let lam = state.accumulated_llr;
    let event = if lam >= config.threshold_up {
        Some((Bit::Plus, lam - config.threshold_up))
    } else if lam <= -config.threshold_down {
        Some((Bit::Minus, -lam - config.threshold_down))
    } else {
        None
    };
    event.map(|(bit, overshoot)| {
        state.accumulated_llr = 0.0;
        state.last_sample_time = time;
        state.messages_emitted += 1;
        SampleEvent {
            sensor_id: config.sensor_id,
            time,
            bit,
            accumulated_llr: lam,
            overshoot,
        }
    })
}

/// Outcome of one complete inter-sampling interval started from zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstCrossing {
    /// Number of observations consumed (`τ`).
    pub tau: u64,
    /// Accumulated LLR at the crossing (`λ`).
    pub lambda: f64,
    pub bit: Bit,
    pub overshoot: f64,
}

/// Runs one sampler from reset to its first emission under `hyp`.
pub fn sample_first_crossing(
    config: &SensorConfig,
    hyp: Hypothesis,
    rng: &mut impl RngCore,
) -> FirstCrossing {
    let mut acc = 0.0_f64;
    let mut t = 0u64;
    let d = config.model.signal_mean_h1 - config.model.signal_mean_h0;
    let shift = config.model.signal_mean_h0.norm_sqr() - config.model.signal_mean_h1.norm_sqr();
    loop {
        t += 1;
        let y = config.model.observe(hyp, rng);
        acc += (2.0 * (y.conj() * d).re + shift) / config.model.noise_variance;
        if acc >= config.threshold_up {
            return FirstCrossing {
                tau: t,
                lambda: acc,
                bit: Bit::Plus,
                overshoot: acc - config.threshold_up,
            };
        }
        if acc <= -config.threshold_down {
            return FirstCrossing {
                tau: t,
                lambda: acc,
                bit: Bit::Minus,
                overshoot: -acc - config.threshold_down,
            };
        }
    }
}

/// A Monte Carlo estimate with its binomial or sample standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// Estimated local error probabilities `(α̂, β̂)` with standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalErrorEstimate {
    pub alpha: Estimate,
    pub beta: Estimate,
}

/// Monte Carlo estimate of the local error probabilities induced by the
/// sampler thresholds: `α̂` is the fraction of first emissions with bit `+1`
/// under `H0`, `β̂` the fraction with bit `-1` under `H1`.
pub fn estimate_local_error_probs(
    config: &SensorConfig,
    trials: u64,
    rng: &mut impl RngCore,
) -> Result<LocalErrorEstimate, DetectionError> {
    if trials == 0 {
        return Err(DetectionError::EmptyEstimate);
    }
    config.model.validate()?;
    let mut alpha_hits = 0u64;
    let mut beta_hits = 0u64;
    for _ in 0..trials {
        if sample_first_crossing(config, Hypothesis::H0, rng).bit == Bit::Plus {
            alpha_hits += 1;
        }
        if sample_first_crossing(config, Hypothesis::H1, rng).bit == Bit::Minus {
            beta_hits += 1;
        }
    }
    let n = trials as f64;
    let binom = |hits: u64| {
        let p = hits as f64 / n;
        Estimate {
            value: p,
            std_error: fmath::sqrt(p * (1.0 - p) / n),
        }
    };
    Ok(LocalErrorEstimate {
        alpha: binom(alpha_hits),
        beta: binom(beta_hits),
    })
}

/// Solves `Δ tanh(Δ/2) = target_interval * global_kl / num_sensors` for the
/// symmetric local threshold `Δ` by bisection; the left side is strictly
/// increasing, so the root is unique. `global_kl` defaults to the `H1`
/// information in callers; expose the hypothesis choice there.
pub fn calibrate_delta(
    target_interval: f64,
    global_kl: f64,
    num_sensors: u32,
) -> Result<f64, DetectionError> {
    if !(target_interval > 0.0) || !target_interval.is_finite() {
        return Err(DetectionError::InvalidParameter("target_interval"));
    }
    if !(global_kl > 0.0) || !global_kl.is_finite() {
        return Err(DetectionError::InvalidParameter("global_kl"));
    }
    if num_sensors == 0 {
        return Err(DetectionError::InvalidParameter("num_sensors"));
    }
    let rhs = target_interval * global_kl / num_sensors as f64;
    let f = |d: f64| d * fmath::tanh(0.5 * d) - rhs;
    let mut lo = 0.0_f64;
    let mut hi = rhs + 2.0;
    debug_assert!(f(hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if f(hi).abs() <= 1e-10 || hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use approx::assert_relative_eq;

    fn default_sensor(delta: f64) -> SensorConfig {
        SensorConfig::symmetric(1, ObservationModel::default(), delta, 0.1, 0.1)
    }

    #[test]
    fn llr_increment_default_model() {
        let m = ObservationModel::default();
        assert_relative_eq!(
            llr_increment(Complex64::new(1.0, 0.0), &m).unwrap(),
            1.0,
            max_relative = 1e-15
        );
        // Midpoint between the means: equal likelihoods.
        assert_relative_eq!(
            llr_increment(Complex64::new(0.5, 3.0), &m).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            llr_increment(Complex64::new(-0.3, 1.0), &m).unwrap(),
            -1.6,
            max_relative = 1e-15
        );
    }

    #[test]
    fn llr_increment_rejects_nonfinite() {
        let m = ObservationModel::default();
        assert_eq!(
            llr_increment(Complex64::new(f64::NAN, 0.0), &m),
            Err(DetectionError::InvalidObservation)
        );
        assert_eq!(
            llr_increment(Complex64::new(f64::INFINITY, 0.0), &m),
            Err(DetectionError::InvalidObservation)
        );
    }

    #[test]
    fn llr_increment_matches_density_quotient() {
        // Cross-check the closed form against log f1(y) - log f0(y).
        let m = ObservationModel {
            signal_mean_h1: Complex64::new(0.7, -1.2),
            signal_mean_h0: Complex64::new(-0.4, 0.3),
            noise_variance: 2.5,
        };
        let mut rng = substream(3, &[9]);
        for _ in 0..100 {
            let y = complex_gaussian(&mut rng, Complex64::new(0.0, 0.0), 4.0);
            let direct = ((y - m.signal_mean_h0).norm_sqr() - (y - m.signal_mean_h1).norm_sqr())
                / m.noise_variance;
            assert_relative_eq!(
                llr_increment(y, &m).unwrap(),
                direct,
                max_relative = 1e-10,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn sampler_hand_traces() {
        let cfg = default_sensor(1.0);
        let mut st = SamplerState::new();
        assert!(step_sampler(&mut st, 0.4, &cfg, 1).is_none());
        assert!(step_sampler(&mut st, 0.4, &cfg, 2).is_none());
        let ev = step_sampler(&mut st, 0.4, &cfg, 3).expect("crossing");
        assert_eq!(ev.bit, Bit::Plus);
        assert_eq!(ev.time, 3);
        assert_relative_eq!(ev.accumulated_llr, 1.2, max_relative = 1e-12);
        assert_relative_eq!(ev.overshoot, 0.2, max_relative = 1e-12);
        assert_eq!(st.accumulated_llr, 0.0);
        assert_eq!(st.messages_emitted, 1);

        let mut st = SamplerState::new();
        assert!(step_sampler(&mut st, -0.6, &cfg, 1).is_none());
        let ev = step_sampler(&mut st, -0.6, &cfg, 2).expect("crossing");
        assert_eq!(ev.bit, Bit::Minus);
        assert_relative_eq!(ev.accumulated_llr, -1.2, max_relative = 1e-12);
        assert_relative_eq!(ev.overshoot, 0.2, max_relative = 1e-12);

        let mut st = SamplerState::new();
        for t in 1..100 {
            assert!(step_sampler(&mut st, 0.0, &cfg, t).is_none());
        }
    }

    #[test]
    fn sampler_crossing_at_exact_threshold_counts() {
        let cfg = default_sensor(1.0);
        let mut st = SamplerState::new();
        let ev = step_sampler(&mut st, 1.0, &cfg, 1).expect("equality is a crossing");
        assert_eq!(ev.overshoot, 0.0);
        assert_eq!(ev.bit, Bit::Plus);
    }

    #[test]
    fn asymmetric_thresholds_respected() {
        let mut cfg = default_sensor(1.0);
        cfg.threshold_up = 2.0;
        cfg.threshold_down = 0.5;
        let mut st = SamplerState::new();
        assert!(step_sampler(&mut st, 1.5, &cfg, 1).is_none());
        let ev = step_sampler(&mut st, -2.1, &cfg, 2).expect("down-crossing");
        assert_eq!(ev.bit, Bit::Minus);
        assert_relative_eq!(ev.overshoot, 0.1, max_relative = 1e-9);
    }

    #[test]
    fn error_prob_estimation_basics() {
        let cfg = default_sensor(1.0);
        let mut rng = substream(11, &[1]);
        assert_eq!(
            estimate_local_error_probs(&cfg, 0, &mut rng),
            Err(DetectionError::EmptyEstimate)
        );
        let est = estimate_local_error_probs(&cfg, 20_000, &mut rng).unwrap();
        // Symmetric model: alpha ~= beta within 3 combined standard errors.
        let tol = 3.0 * (est.alpha.std_error + est.beta.std_error);
        assert!((est.alpha.value - est.beta.value).abs() <= tol);
        assert!(est.alpha.value > 0.0 && est.alpha.value < 0.5);
    }

    #[test]
    fn error_prob_decreases_with_threshold_and_respects_change_of_measure() {
        let mut rng = substream(12, &[2]);
        let small = estimate_local_error_probs(&default_sensor(1.0), 30_000, &mut rng).unwrap();
        let mut rng = substream(12, &[2]); // common random numbers
        let large = estimate_local_error_probs(&default_sensor(6.0), 30_000, &mut rng).unwrap();
        assert!(large.alpha.value < small.alpha.value);
        // alpha <= e^{-Delta}(1 - beta) + slack
        let bound = |delta: f64, e: &LocalErrorEstimate| {
            (-delta).exp() * (1.0 - e.beta.value) + 3.0 * (e.alpha.std_error + e.beta.std_error)
        };
        assert!(small.alpha.value <= bound(1.0, &small));
        assert!(large.alpha.value <= bound(6.0, &large));
    }

    #[test]
    fn calibrate_delta_examples() {
        // target 4 observations/message, global KL 2, two sensors.
        let d = calibrate_delta(4.0, 2.0, 2).unwrap();
        assert!((d * (d / 2.0).tanh() - 4.0).abs() <= 1e-10);
        assert_relative_eq!(d, 4.130676277949409, max_relative = 1e-9);

        // rhs = 2 tanh(1) has the exact root 2.
        let t = 2.0 * 1f64.tanh();
        let d = calibrate_delta(t, 2.0, 2).unwrap();
        assert_relative_eq!(d, 2.0, max_relative = 1e-9);

        // tiny rhs: root behaves like sqrt(2 rhs).
        let d = calibrate_delta(1e-9, 2.0, 2).unwrap();
        assert!(d < 1e-4);
    }

    #[test]
    fn calibrate_delta_residual_across_magnitudes() {
        for &rhs in &[1e-6, 1e-3, 0.5, 1.0, 10.0, 100.0, 1e3] {
            let d = calibrate_delta(rhs, 1.0, 1).unwrap();
            assert!(
                (d * (d / 2.0).tanh() - rhs).abs() <= 1e-10,
                "residual too large at rhs={rhs}"
            );
        }
    }

    #[test]
    fn calibrate_delta_rejects_bad_arguments() {
        assert!(calibrate_delta(0.0, 1.0, 1).is_err());
        assert!(calibrate_delta(1.0, -1.0, 1).is_err());
        assert!(calibrate_delta(1.0, 1.0, 0).is_err());
    }

    #[test]
    fn sensor_config_validation() {
        let mut cfg = default_sensor(1.0);
        assert!(cfg.validate().is_ok());
        cfg.alpha_local = 0.7;
        cfg.beta_local = 0.6;
        assert!(cfg.validate().is_err());
        let mut cfg = default_sensor(0.0);
        cfg.threshold_up = 0.0;
        assert!(cfg.validate().is_err());
    }
}
