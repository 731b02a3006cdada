//! Property tests for the sampler, the fusion rules and the SPRT state
//! machine.

use proptest::prelude::*;
use seqdet_core::channel::Signaling;
use seqdet_core::detection::{step_sampler, Bit, ObservationModel, SamplerState, SensorConfig};
use seqdet_core::fusion::{
    ideal_llr_bound, llr_awgn, llr_bec, llr_bsc, llr_ideal, llr_rayleigh, llr_rician, sprt_step,
    Decision, FusionConfig, FusionState, LlrUpdate,
};
use seqdet_core::Complex64;

fn sensor(up: f64, down: f64) -> SensorConfig {
    SensorConfig {
        sensor_id: 1,
        model: ObservationModel::default(),
        threshold_up: up,
        threshold_down: down,
        alpha_local: 0.1,
        beta_local: 0.1,
    }
}

proptest! {
    // Every emission satisfies: sign matches the bit, magnitude reaches the
    // crossed threshold, overshoot is the nonnegative excess, and the
    // accumulator resets.
    #[test]
    fn sampler_exit_property(
        up in 0.05f64..5.0,
        down in 0.05f64..5.0,
        increments in prop::collection::vec(-2.0f64..2.0, 1..200),
    ) {
        let cfg = sensor(up, down);
        let mut st = SamplerState::new();
        for (i, inc) in increments.iter().enumerate() {
            let before = st.accumulated_llr;
            prop_assert!(before > -down && before < up);
            if let Some(ev) = step_sampler(&mut st, *inc, &cfg, (i + 1) as u64) {
                match ev.bit {
                    Bit::Plus => {
                        prop_assert!(ev.accumulated_llr >= up);
                        prop_assert!((ev.overshoot - (ev.accumulated_llr - up)).abs() < 1e-12);
                    }
                    Bit::Minus => {
                        prop_assert!(ev.accumulated_llr <= -down);
                        prop_assert!((ev.overshoot - (-ev.accumulated_llr - down)).abs() < 1e-12);
                    }
                }
                prop_assert!(ev.overshoot >= 0.0);
                prop_assert_eq!(st.accumulated_llr, 0.0);
                prop_assert_eq!(ev.time, (i + 1) as u64);
            }
        }
    }

    // Messages-emitted never decreases and counts exactly the events.
    #[test]
    fn sampler_message_count(increments in prop::collection::vec(-3.0f64..3.0, 1..150)) {
        let cfg = sensor(1.0, 1.0);
        let mut st = SamplerState::new();
        let mut events = 0u64;
        for (i, inc) in increments.iter().enumerate() {
            let prev = st.messages_emitted;
            if step_sampler(&mut st, *inc, &cfg, (i + 1) as u64).is_some() {
                events += 1;
            }
            prop_assert!(st.messages_emitted >= prev);
        }
        prop_assert_eq!(st.messages_emitted, events);
    }

    // While pending the statistic stays inside (-B, A); the decision matches
    // the exit side; decided states are absorbing.
    #[test]
    fn sprt_machine(
        a in 0.1f64..10.0,
        b in 0.1f64..10.0,
        updates in prop::collection::vec(-4.0f64..4.0, 1..100),
    ) {
        let cfg = FusionConfig::new(a, b).unwrap();
        let mut st = FusionState::new();
        for (i, u) in updates.iter().enumerate() {
            let update = LlrUpdate { sensor_id: 0, value: *u };
            if st.is_decided() {
                let refused = sprt_step(&mut st, update, i as u64, &cfg).is_err();
                prop_assert!(refused);
                break;
            }
            prop_assert!(st.global_llr > -b && st.global_llr < a);
            let d = sprt_step(&mut st, update, i as u64, &cfg).unwrap();
            match d {
                Decision::DecideH1 => prop_assert!(st.global_llr >= a),
                Decision::DecideH0 => prop_assert!(st.global_llr <= -b),
                Decision::Pending => prop_assert!(st.global_llr > -b && st.global_llr < a),
            }
        }
    }

    // A received signal never carries more evidence than the ideal-channel
    // bit, for every channel family.
    #[test]
    fn data_processing_bound(
        alpha in 0.01f64..0.49,
        beta in 0.01f64..0.49,
        zre in -40.0f64..40.0,
        zim in -40.0f64..40.0,
        eps in 0.0f64..0.49,
        gain_var in 0.1f64..4.0,
        noise_var in 0.05f64..4.0,
    ) {
        let bound = ideal_llr_bound(alpha, beta).unwrap() * (1.0 + 1e-12) + 1e-12;
        let z = Complex64::new(zre, zim);
        let anti = Signaling::antipodal(3.0).unwrap();
        let ook = Signaling::on_off(10f64.sqrt(), 1.0).unwrap();
        let h = Complex64::new(0.8, -0.6);
        let mu = Complex64::new(0.5, 0.5);

        for bit in [Bit::Plus, Bit::Minus] {
            prop_assert!(llr_ideal(bit, alpha, beta).unwrap().abs() <= bound);
            prop_assert!(llr_bsc(bit, alpha, beta, eps.min(0.4999)).unwrap().abs() <= bound);
        }
        prop_assert!(llr_bec(&seqdet_core::channel::ReceivedSignal::Erased, alpha, beta)
            .unwrap().abs() <= bound);
        prop_assert!(llr_awgn(z, alpha, beta, h, noise_var, &anti).unwrap().abs() <= bound);
        for s in [&anti, &ook] {
            prop_assert!(llr_rayleigh(z, alpha, beta, gain_var, noise_var, s).unwrap().abs() <= bound);
            prop_assert!(llr_rician(z, alpha, beta, mu, gain_var, noise_var, s).unwrap().abs() <= bound);
        }
    }

    // The binary-symmetric rule shrinks evidence monotonically in the
    // crossover probability.
    #[test]
    fn bsc_degrades_with_crossover(
        alpha in 0.01f64..0.45,
        beta in 0.01f64..0.45,
        eps in 0.001f64..0.45,
    ) {
        let clean = llr_ideal(Bit::Plus, alpha, beta).unwrap().abs();
        let noisy = llr_bsc(Bit::Plus, alpha, beta, eps).unwrap().abs();
        prop_assert!(noisy <= clean + 1e-12);
    }
}

// The exact degeneracy lattice: reductions between channel families produce
// bit-identical LLR outputs on shared inputs.
#[test]
fn degeneracy_lattice_bit_exact() {
    use seqdet_core::channel::ReceivedSignal;
    use seqdet_core::rng::{complex_gaussian, substream, uniform01};

    let mut rng = substream(0xfeed, &[0]);
    let signalings = [
        Signaling::antipodal(2.0).unwrap(),
        Signaling::on_off(10f64.sqrt(), 1.0).unwrap(),
    ];
    let mu = Complex64::new(0.6, -0.3);
    let (sh2, s2) = (0.7, 0.9);
    for i in 0..10_000 {
        let alpha = 0.01 + 0.47 * uniform01(&mut rng);
        let beta = 0.01 + 0.47 * uniform01(&mut rng);
        let z = complex_gaussian(&mut rng, Complex64::new(0.0, 0.0), 16.0);
        let bit = if uniform01(&mut rng) < 0.5 {
            Bit::Plus
        } else {
            Bit::Minus
        };
        let s = &signalings[i % 2];

        // BEC(0) = BSC(0) = Ideal on received bits.
        let ideal = llr_ideal(bit, alpha, beta).unwrap();
        assert_eq!(llr_bsc(bit, alpha, beta, 0.0).unwrap(), ideal);
        assert_eq!(
            llr_bec(&ReceivedSignal::Binary(bit), alpha, beta).unwrap(),
            ideal
        );

        // Rician(mu, 0, s2) = AWGN(mu, s2).
        assert_eq!(
            llr_rician(z, alpha, beta, mu, 0.0, s2, s).unwrap(),
            llr_awgn(z, alpha, beta, mu, s2, s).unwrap()
        );

        // Rician(0, sh2, s2) = Rayleigh(sh2, s2).
        assert_eq!(
            llr_rician(z, alpha, beta, Complex64::new(0.0, 0.0), sh2, s2, s).unwrap(),
            llr_rayleigh(z, alpha, beta, sh2, s2, s).unwrap()
        );
    }
}
