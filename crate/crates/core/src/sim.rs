//! Deterministic single-trial engine for the full sensors-channels-fusion
//! system.
//!
//! A trial advances discrete time `t = 1, 2, …`: every sensor draws one
//! observation, feeds its level-triggered sampler, and each emission is
//! transmitted, pushed through that sensor's channel, and fused according
//! to the configured mode. Simultaneous emissions are applied in ascending
//! sensor order with an SPRT check after each update. The trial ends at the
//! first threshold crossing, or is truncated at `max_time`.
//!
//! Determinism: all randomness comes from substreams keyed by
//! `(seed, trial, sensor, role)`, so a trial's outcome depends only on the
//! configuration, seed and trial index — never on scheduling or on how many
//! other trials run concurrently.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use crate::channel::{propagate, transmit, ChannelInput, ChannelModel, ReceivedSignal, Signaling};
use crate::detection::{step_sampler, SamplerState, SensorConfig};
use crate::fusion::{
    conventional_demodulate, llr_bsc, llr_ideal, llr_unreliable, received_llr, sprt_step,
    threshold_then_fuse, ConventionalMode, Decision, FusionConfig, FusionState, LlrUpdate,
    SendProbabilities,
};
use crate::rng::substream;
use crate::{Complex64, Hypothesis};

/// Errors from system assembly and trial setup.
#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    InvalidConfig(&'static str),
}

impl core::fmt::Display for SimError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SimError::InvalidConfig(m) => write!(f, "invalid configuration: {m}"),
        }
    }
}

impl core::error::Error for SimError {}

/// One sensor together with its link to the fusion center.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorLink {
    pub sensor: SensorConfig,
    pub channel: ChannelModel,
    pub signaling: Signaling,
}

/// How the fusion center turns received signals into updates.
#[derive(Debug, Clone, PartialEq)]
pub enum FusionMode {
    /// LLR of the raw received signal using channel statistics.
    ChannelAware,
    /// Hard-demodulate, then update as if the channel were ideal.
    ConventionalIdeal,
    /// Hard-demodulate, then update through a binary-symmetric model of
    /// the demodulator with the given per-sensor error rates.
    ConventionalBsc { epsilon_ml: Vec<f64> },
    /// No transmission-time detection: fuse a per-slot LLR of every slot's
    /// channel output, with per-sensor per-slot send probabilities.
    UnreliableTiming { send: Vec<SendProbabilities> },
    /// Gate each slot on the presence statistic `|z|`, then fuse the
    /// channel-aware LLR of slots that pass.
    ThresholdThenFuse { detection_threshold: f64 },
}

/// Full system: sensor links, global thresholds, fusion mode.
#[derive(Debug, Clone, PartialEq)]
pub struct System {
    pub links: Vec<SensorLink>,
    pub fusion: FusionConfig,
    pub mode: FusionMode,
}

impl System {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.links.is_empty() {
            return Err(SimError::InvalidConfig("no sensors"));
        }
        for link in &self.links {
            link.sensor
                .validate()
                .map_err(|_| SimError::InvalidConfig("sensor"))?;
            link.channel
                .validate()
                .map_err(|_| SimError::InvalidConfig("channel"))?;
        }
        match &self.mode {
            FusionMode::ChannelAware | FusionMode::ConventionalIdeal => {}
            FusionMode::ConventionalBsc { epsilon_ml } => {
                if epsilon_ml.len() != self.links.len() {
                    return Err(SimError::InvalidConfig("epsilon_ml length"));
                }
                for (link, eps) in self.links.iter().zip(epsilon_ml) {
                    if !link.channel.is_discrete() && !(0.0..0.5).contains(eps) {
                        return Err(SimError::InvalidConfig("epsilon_ml range"));
                    }
                }
            }
            FusionMode::UnreliableTiming { send } => {
                if send.len() != self.links.len() {
                    return Err(SimError::InvalidConfig("send probabilities length"));
                }
                for (link, s) in self.links.iter().zip(send) {
                    if link.channel.is_discrete() {
                        return Err(SimError::InvalidConfig(
                            "unreliable timing needs continuous channels",
                        ));
                    }
                    s.validate()
                        .map_err(|_| SimError::InvalidConfig("send probabilities"))?;
                }
            }
            FusionMode::ThresholdThenFuse {
                detection_threshold,
            } => {
                if !(*detection_threshold >= 0.0) {
                    return Err(SimError::InvalidConfig("detection_threshold"));
                }
                if self.links.iter().any(|l| l.channel.is_discrete()) {
                    return Err(SimError::InvalidConfig(
                        "threshold gating needs continuous channels",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Outcome of one trial. `decision == Pending` means the trial was
/// truncated at `max_time` without crossing a threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub decision: Decision,
    /// Slot of the deciding update, or `max_time` when truncated.
    pub decision_time: u64,
    pub stopped_llr: f64,
    /// Messages emitted by each sensor up to the decision slot.
    pub messages: Vec<u64>,
}

/// Extended outcome used by the decision-delay identity: each sensor is
/// simulated past the stopping time until its next emission, and that
/// message's received LLR is recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedTrialOutcome {
    pub base: TrialOutcome,
    /// Emission time of each sensor's first message not consumed by the
    /// stopped test (`t^k` with `t^k >= decision_time`).
    pub next_message_time: Vec<u64>,
    /// Received LLR of that message.
    pub next_message_llr: Vec<f64>,
    /// Inter-sampling interval of each sensor's first complete
    /// post-reset cycle, for renewal bookkeeping.
    pub messages_consumed: Vec<u64>,
}

// Precomputed per-observation LLR coefficients, hoisted out of the slot loop.
#[derive(Clone, Copy)]
struct ObsLlr {
    diff: Complex64,
    shift: f64,
    inv_var: f64,
}

impl ObsLlr {
    fn new(s: &SensorConfig) -> Self {
        Self {
            diff: s.model.signal_mean_h1 - s.model.signal_mean_h0,
            shift: s.model.signal_mean_h0.norm_sqr() - s.model.signal_mean_h1.norm_sqr(),
            inv_var: 1.0 / s.model.noise_variance,
        }
    }

    #[inline]
    fn eval(&self, y: Complex64) -> f64 {
        (2.0 * (y.conj() * self.diff).re + self.shift) * self.inv_var
    }
}

struct Engine<'a> {
    system: &'a System,
    hyp: Hypothesis,
    obs_rngs: Vec<ChaCha8Rng>,
    ch_rngs: Vec<ChaCha8Rng>,
    samplers: Vec<SamplerState>,
    obs_llr: Vec<ObsLlr>,
    state: FusionState,
}

impl<'a> Engine<'a> {
    fn new(system: &'a System, hyp: Hypothesis, seed: u64, trial: u64) -> Self {
        let k = system.links.len();
        Engine {
            system,
            hyp,
            obs_rngs: (0..k)
                .map(|i| substream(seed, &[trial, i as u64, 0]))
                .collect(),
            ch_rngs: (0..k)
                .map(|i| substream(seed, &[trial, i as u64, 1]))
                .collect(),
            samplers: vec![SamplerState::new(); k],
            obs_llr: system
                .links
                .iter()
                .map(|l| ObsLlr::new(&l.sensor))
                .collect(),
            state: FusionState::new(),
        }
    }

    /// Message-triggered update value for the reliable-detection modes.
    fn message_update(&mut self, k: usize, bit: crate::detection::Bit) -> f64 {
        let link = &self.system.links[k];
        let (alpha, beta) = (link.sensor.alpha_local, link.sensor.beta_local);
        let input = if link.channel.is_discrete() {
            ChannelInput::Bit(bit)
        } else {
            ChannelInput::Symbol(transmit(bit, &link.signaling))
        };
        let received =
            propagate(input, &link.channel, &mut self.ch_rngs[k]).expect("validated system");
        match &self.system.mode {
            FusionMode::ChannelAware => {
                received_llr(&received, &link.channel, &link.signaling, alpha, beta)
                    .expect("validated system")
            }
            FusionMode::ConventionalIdeal => match received {
                ReceivedSignal::Erased => 0.0,
                ReceivedSignal::Binary(b) => llr_ideal(b, alpha, beta).expect("validated system"),
                ReceivedSignal::Complex(z) => {
                    let b = conventional_demodulate(z, &link.channel, &link.signaling)
                        .expect("validated system");
                    llr_ideal(b, alpha, beta).expect("validated system")
                }
            },
            FusionMode::ConventionalBsc { epsilon_ml } => match received {
                ReceivedSignal::Erased => 0.0,
                // Binary channels are handled with their true statistics:
                // the demodulator is the identity there.
                ReceivedSignal::Binary(b) => match link.channel {
                    ChannelModel::Bsc { epsilon } => {
                        llr_bsc(b, alpha, beta, epsilon).expect("validated system")
                    }
                    _ => llr_ideal(b, alpha, beta).expect("validated system"),
                },
                ReceivedSignal::Complex(z) => {
                    let b = conventional_demodulate(z, &link.channel, &link.signaling)
                        .expect("validated system");
                    crate::fusion::conventional_update(
                        b,
                        ConventionalMode::TreatAsBsc {
                            epsilon_ml: epsilon_ml[k],
                        },
                        alpha,
                        beta,
                    )
                    .expect("validated system")
                }
            },
            _ => unreachable!("per-slot modes do not use message updates"),
        }
    }

    /// Per-slot update value for the unreliable-detection modes; `emitted`
    /// is the bit emitted in this slot, if any.
    fn slot_update(&mut self, k: usize, emitted: Option<crate::detection::Bit>) -> Option<f64> {
        let link = &self.system.links[k];
        let (alpha, beta) = (link.sensor.alpha_local, link.sensor.beta_local);
        let x = match emitted {
            Some(bit) => transmit(bit, &link.signaling),
            None => Complex64::new(0.0, 0.0),
        };
        let z = match propagate(ChannelInput::Symbol(x), &link.channel, &mut self.ch_rngs[k])
            .expect("validated system")
        {
            ReceivedSignal::Complex(z) => z,
            _ => unreachable!("continuous channel"),
        };
        match &self.system.mode {
            FusionMode::UnreliableTiming { send } => Some(
                llr_unreliable(z, alpha, beta, &link.channel, &link.signaling, send[k])
                    .expect("validated system"),
            ),
            FusionMode::ThresholdThenFuse {
                detection_threshold,
            } => threshold_then_fuse(z, *detection_threshold, |z| {
                received_llr(
                    &ReceivedSignal::Complex(z),
                    &link.channel,
                    &link.signaling,
                    alpha,
                    beta,
                )
            })
            .expect("validated system"),
            _ => unreachable!("message modes do not use slot updates"),
        }
    }

    fn per_slot_mode(&self) -> bool {
        matches!(
            self.system.mode,
            FusionMode::UnreliableTiming { .. } | FusionMode::ThresholdThenFuse { .. }
        )
    }

    /// Advances one slot; returns the deciding sensor index if the test
    /// concluded within this slot.
    fn step_slot(&mut self, t: u64) -> Option<usize> {
        let per_slot = self.per_slot_mode();
        for k in 0..self.system.links.len() {
            let y = self.system.links[k]
                .sensor
                .model
                .observe(self.hyp, &mut self.obs_rngs[k]);
            let inc = self.obs_llr[k].eval(y);
            let event = step_sampler(&mut self.samplers[k], inc, &self.system.links[k].sensor, t);
            let update = if per_slot {
                self.slot_update(k, event.map(|e| e.bit))
            } else {
                event.map(|e| self.message_update(k, e.bit))
            };
            if let Some(value) = update {
                let decision = sprt_step(
                    &mut self.state,
                    LlrUpdate {
                        sensor_id: self.system.links[k].sensor.sensor_id,
                        value,
                    },
                    t,
                    &self.system.fusion,
                )
                .expect("pending state");
                if decision != Decision::Pending {
                    return Some(k);
                }
            }
        }
        None
    }

    fn outcome(&self, decision_time: u64) -> TrialOutcome {
        TrialOutcome {
            decision: self.state.decision,
            decision_time,
            stopped_llr: self.state.global_llr,
            messages: self.samplers.iter().map(|s| s.messages_emitted).collect(),
        }
    }
}

/// Runs one trial to decision or truncation.
pub fn run_trial(
    system: &System,
    hyp: Hypothesis,
    seed: u64,
    trial: u64,
    max_time: u64,
) -> Result<TrialOutcome, SimError> {
    if max_time == 0 {
        return Err(SimError::InvalidConfig("max_time"));
    }
    system.validate()?;
    let mut engine = Engine::new(system, hyp, seed, trial);
    for t in 1..=max_time {
        if engine.step_slot(t).is_some() {
            return Ok(engine.outcome(t));
        }
    }
    Ok(engine.outcome(max_time))
}

/// Runs one trial and, after the decision, keeps each sensor running until
/// its first unconsumed emission, recording that message's received LLR.
///
/// A sensor whose emission in the deciding slot arrived after the decision
/// (higher sensor index) has that emission as its "next" message with a
/// zero residual interval.
pub fn run_trial_extended(
    system: &System,
    hyp: Hypothesis,
    seed: u64,
    trial: u64,
    max_time: u64,
) -> Result<ExtendedTrialOutcome, SimError> {
    if max_time == 0 {
        return Err(SimError::InvalidConfig("max_time"));
    }
    system.validate()?;
    if matches!(
        system.mode,
        FusionMode::UnreliableTiming { .. } | FusionMode::ThresholdThenFuse { .. }
    ) {
        return Err(SimError::InvalidConfig(
            "extended trials require message-triggered fusion",
        ));
    }
    let k_count = system.links.len();
    let mut engine = Engine::new(system, hyp, seed, trial);
    let mut decided_at: Option<(u64, usize)> = None;
    for t in 1..=max_time {
        if let Some(j) = engine.step_slot(t) {
            decided_at = Some((t, j));
            break;
        }
    }
    let Some((t_stop, j_stop)) = decided_at else {
        // Truncated: no post-stop extension.
        let base = engine.outcome(max_time);
        return Ok(ExtendedTrialOutcome {
            messages_consumed: base.messages.clone(),
            base,
            next_message_time: vec![max_time; k_count],
            next_message_llr: vec![0.0; k_count],
        });
    };

    // Messages consumed by the stopped test: everything processed before
    // the deciding update, plus the deciding one.
    let mut consumed: Vec<u64> = engine.samplers.iter().map(|s| s.messages_emitted).collect();
    let base = TrialOutcome {
        decision: engine.state.decision,
        decision_time: t_stop,
        stopped_llr: engine.state.global_llr,
        messages: consumed.clone(),
    };
    // Sensors after the deciding one have not been stepped in slot t_stop.
    let mut next_time = vec![0u64; k_count];
    let mut next_llr = vec![0.0f64; k_count];
    for k in 0..k_count {
        let pending_in_stop_slot = k > j_stop;
        let mut t = if pending_in_stop_slot {
            t_stop
        } else {
            t_stop + 1
        };
        loop {
            let y = engine.system.links[k]
                .sensor
                .model
                .observe(engine.hyp, &mut engine.obs_rngs[k]);
            let inc = engine.obs_llr[k].eval(y);
            if let Some(ev) = step_sampler(
                &mut engine.samplers[k],
                inc,
                &engine.system.links[k].sensor,
                t,
            ) {
                next_time[k] = t;
                next_llr[k] = engine.message_update(k, ev.bit);
                break;
            }
            t += 1;
            if t > t_stop + 100 * max_time + 1_000_000 {
                unreachable!("sampler failed to cross");
            }
        }
        consumed[k] = engine.samplers[k].messages_emitted - 1;
    }
    Ok(ExtendedTrialOutcome {
        base,
        next_message_time: next_time,
        next_message_llr: next_llr,
        messages_consumed: consumed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::ObservationModel;

    fn ideal_system(thresholds: f64) -> System {
        let sensor = SensorConfig::symmetric(1, ObservationModel::default(), 1.0, 0.13, 0.13);
        System {
            links: vec![
                SensorLink {
                    sensor: sensor.clone(),
                    channel: ChannelModel::Ideal,
                    signaling: Signaling::antipodal(1.0).unwrap(),
                },
                SensorLink {
                    sensor: SensorConfig {
                        sensor_id: 2,
                        ..sensor
                    },
                    channel: ChannelModel::Ideal,
                    signaling: Signaling::antipodal(1.0).unwrap(),
                },
            ],
            fusion: FusionConfig::new(thresholds, thresholds).unwrap(),
            mode: FusionMode::ChannelAware,
        }
    }

    #[test]
    fn trials_are_reproducible() {
        let sys = ideal_system(4.0);
        let a = run_trial(&sys, Hypothesis::H1, 7, 3, 100_000).unwrap();
        let b = run_trial(&sys, Hypothesis::H1, 7, 3, 100_000).unwrap();
        assert_eq!(a, b);
        let c = run_trial(&sys, Hypothesis::H1, 7, 4, 100_000).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn tiny_thresholds_decide_on_first_message() {
        let sys = ideal_system(0.01);
        let out = run_trial(&sys, Hypothesis::H1, 1, 0, 100_000).unwrap();
        assert_ne!(out.decision, Decision::Pending);
        assert_eq!(out.messages.iter().sum::<u64>(), 1);
    }

    #[test]
    fn full_erasure_truncates() {
        let mut sys = ideal_system(4.0);
        for link in &mut sys.links {
            link.channel = ChannelModel::Bec { epsilon: 1.0 };
        }
        let out = run_trial(&sys, Hypothesis::H1, 1, 0, 500).unwrap();
        assert_eq!(out.decision, Decision::Pending);
        assert_eq!(out.decision_time, 500);
        assert_eq!(out.stopped_llr, 0.0);
    }

    #[test]
    fn decisions_track_hypothesis_when_thresholds_are_wide() {
        let sys = ideal_system(6.0);
        let mut h1_ok = 0;
        let mut h0_ok = 0;
        for trial in 0..200 {
            if run_trial(&sys, Hypothesis::H1, 99, trial, 100_000)
                .unwrap()
                .decision
                == Decision::DecideH1
            {
                h1_ok += 1;
            }
            if run_trial(&sys, Hypothesis::H0, 99, trial, 100_000)
                .unwrap()
                .decision
                == Decision::DecideH0
            {
                h0_ok += 1;
            }
        }
        assert!(h1_ok >= 195, "h1 correct: {h1_ok}/200");
        assert!(h0_ok >= 195, "h0 correct: {h0_ok}/200");
    }

    #[test]
    fn extended_trial_consistency() {
        let sys = ideal_system(3.0);
        for trial in 0..50 {
            let ext = run_trial_extended(&sys, Hypothesis::H1, 5, trial, 100_000).unwrap();
            assert_ne!(ext.base.decision, Decision::Pending);
            for k in 0..sys.links.len() {
                assert!(ext.next_message_time[k] >= ext.base.decision_time);
                assert!(ext.next_message_llr[k].is_finite());
                assert_eq!(ext.messages_consumed[k], ext.base.messages[k]);
            }
        }
    }

    #[test]
    fn conventional_bsc_on_a_bsc_channel_is_channel_aware() {
        // On a binary symmetric channel the demodulator is the identity and
        // the crossover is known, so the two modes coincide trial for trial.
        let mut sys = ideal_system(4.0);
        for link in &mut sys.links {
            link.channel = ChannelModel::Bsc { epsilon: 0.12 };
        }
        let mut conv = sys.clone();
        conv.mode = FusionMode::ConventionalBsc {
            epsilon_ml: vec![0.0, 0.0],
        };
        for trial in 0..200 {
            let a = run_trial(&sys, Hypothesis::H1, 17, trial, 100_000).unwrap();
            let b = run_trial(&conv, Hypothesis::H1, 17, trial, 100_000).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn conventional_ideal_ignores_crossover_and_overshoots_errors() {
        // Treating a noisy binary channel as ideal loses the error-rate
        // guarantee; the aware rule keeps it.
        let mut aware = ideal_system((100f64).ln());
        for link in &mut aware.links {
            link.channel = ChannelModel::Bsc { epsilon: 0.2 };
        }
        let mut naive = aware.clone();
        naive.mode = FusionMode::ConventionalIdeal;
        let n = 4000;
        let (mut err_aware, mut err_naive) = (0, 0);
        for trial in 0..n {
            if run_trial(&aware, Hypothesis::H1, 23, trial, 100_000)
                .unwrap()
                .decision
                == Decision::DecideH0
            {
                err_aware += 1;
            }
            if run_trial(&naive, Hypothesis::H1, 23, trial, 100_000)
                .unwrap()
                .decision
                == Decision::DecideH0
            {
                err_naive += 1;
            }
        }
        let bound = 0.01 * n as f64 + 3.0 * (0.01f64 * n as f64).sqrt();
        assert!((err_aware as f64) <= bound, "aware errors {err_aware}");
        assert!((err_naive as f64) > bound, "naive errors {err_naive}");
    }

    #[test]
    fn gated_fusion_matches_reliable_at_high_power() {
        // With strong levels and a gate sitting far above the noise floor
        // but far below the signal, the presence test makes no mistakes and
        // the gated scheme reproduces the message-triggered one.
        let sensor = SensorConfig::symmetric(1, ObservationModel::default(), 1.0, 0.13, 0.13);
        let mk = |mode| System {
            links: (1..=2)
                .map(|id| SensorLink {
                    sensor: SensorConfig {
                        sensor_id: id,
                        ..sensor.clone()
                    },
                    channel: ChannelModel::Awgn {
                        gain: Complex64::new(1.0, 0.0),
                        noise_var: 1.0,
                    },
                    signaling: Signaling::antipodal(20.0).unwrap(),
                })
                .collect(),
            fusion: FusionConfig::new(4.6, 4.6).unwrap(),
            mode,
        };
        let reliable = mk(FusionMode::ChannelAware);
        let gated = mk(FusionMode::ThresholdThenFuse {
            detection_threshold: 10.0,
        });
        let n = 2000;
        let (mut d_rel, mut d_gate) = (0.0f64, 0.0f64);
        for trial in 0..n {
            let a = run_trial(&reliable, Hypothesis::H1, 3, trial, 100_000).unwrap();
            let b = run_trial(&gated, Hypothesis::H1, 3, trial, 100_000).unwrap();
            assert_ne!(a.decision, Decision::Pending);
            assert_ne!(b.decision, Decision::Pending);
            d_rel += a.decision_time as f64;
            d_gate += b.decision_time as f64;
        }
        let (d_rel, d_gate) = (d_rel / n as f64, d_gate / n as f64);
        assert!(
            (d_rel - d_gate).abs() / d_rel < 0.05,
            "reliable {d_rel} vs gated {d_gate}"
        );
    }

    #[test]
    fn mode_validation_is_enforced() {
        let mut sys = ideal_system(4.0);
        sys.mode = FusionMode::UnreliableTiming {
            send: vec![SendProbabilities { h1: 0.2, h0: 0.2 }; 2],
        };
        // Discrete channels cannot run per-slot fusion.
        assert!(sys.validate().is_err());
        sys.mode = FusionMode::ConventionalBsc {
            epsilon_ml: vec![0.1],
        };
        assert!(sys.validate().is_err(), "length mismatch");
    }
}
