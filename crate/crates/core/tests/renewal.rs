//! Renewal structure of the level-triggered sampler: with i.i.d. LLR
//! increments, consecutive inter-sampling intervals and accumulated sums
//! are i.i.d. across message indices, and the local stopping time obeys
//! Wald's identity.

use seqdet_core::detection::{
    estimate_local_error_probs, sample_first_crossing, ObservationModel, SensorConfig,
};
use seqdet_core::rng::substream;
use seqdet_core::Hypothesis;

/// Two-sample Kolmogorov-Smirnov statistic.
fn ks_statistic(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    d
}

#[test]
fn consecutive_intervals_are_identically_distributed() {
    let sensor = SensorConfig::symmetric(1, ObservationModel::default(), 2.0, 0.1, 0.1);
    let n = 20_000usize;
    let mut rng = substream(101, &[0]);
    let mut tau1 = Vec::with_capacity(n);
    let mut tau2 = Vec::with_capacity(n);
    let mut lam1 = Vec::with_capacity(n);
    let mut lam2 = Vec::with_capacity(n);
    for _ in 0..n {
        // Two consecutive cycles of one renewal process: the sampler resets
        // after each emission, so the second cycle starts fresh.
        let first = sample_first_crossing(&sensor, Hypothesis::H1, &mut rng);
        let second = sample_first_crossing(&sensor, Hypothesis::H1, &mut rng);
        tau1.push(first.tau as f64);
        tau2.push(second.tau as f64);
        lam1.push(first.lambda);
        lam2.push(second.lambda);
    }
    // Kolmogorov-Smirnov at the 1% level: c(0.01) = 1.628.
    let crit = 1.628 * ((n + n) as f64 / (n * n) as f64).sqrt();
    let d_tau = ks_statistic(&mut tau1, &mut tau2);
    let d_lam = ks_statistic(&mut lam1, &mut lam2);
    assert!(d_tau <= crit, "tau KS {d_tau} > {crit}");
    assert!(d_lam <= crit, "lambda KS {d_lam} > {crit}");
}

#[test]
fn wald_identity_for_local_delay() {
    // E[tau] = E[lambda]/E[l]; per-trial residual tau - lambda/E[l] has
    // mean zero.
    let sensor = SensorConfig::symmetric(1, ObservationModel::default(), 3.0, 0.05, 0.05);
    let per_obs = sensor.model.per_observation_kl();
    for (hyp, e_l) in [(Hypothesis::H1, per_obs.h1), (Hypothesis::H0, -per_obs.h0)] {
        let mut rng = substream(102, &[hyp.index() as u64]);
        let n = 50_000usize;
        let (mut sum, mut sq) = (0.0f64, 0.0f64);
        for _ in 0..n {
            let fc = sample_first_crossing(&sensor, hyp, &mut rng);
            let r = fc.tau as f64 - fc.lambda / e_l;
            sum += r;
            sq += r * r;
        }
        let mean = sum / n as f64;
        let se = ((sq / n as f64 - mean * mean).max(0.0) / n as f64).sqrt();
        assert!(mean.abs() <= 3.0 * se, "{hyp:?}: residual {mean} (se {se})");
    }
}

#[test]
fn wald_bound_on_local_error_probabilities() {
    // Change of measure gives alpha <= e^{-Delta_up} (1 - beta).
    for delta in [1.0, 2.5, 4.0] {
        let sensor = SensorConfig::symmetric(1, ObservationModel::default(), delta, 0.1, 0.1);
        let mut rng = substream(103, &[delta as u64]);
        let est = estimate_local_error_probs(&sensor, 40_000, &mut rng).unwrap();
        let slack = 3.0 * (est.alpha.std_error + est.beta.std_error);
        assert!(
            est.alpha.value <= (-delta).exp() * (1.0 - est.beta.value) + slack,
            "delta={delta}: alpha {} bound {}",
            est.alpha.value,
            (-delta).exp() * (1.0 - est.beta.value)
        );
        assert!(
            est.beta.value <= (-delta).exp() * (1.0 - est.alpha.value) + slack,
            "delta={delta}"
        );
    }
}

#[test]
fn asymmetric_thresholds_skew_error_probabilities() {
    let mut sensor = SensorConfig::symmetric(1, ObservationModel::default(), 1.0, 0.1, 0.1);
    sensor.threshold_up = 3.0;
    sensor.threshold_down = 1.0;
    let mut rng = substream(104, &[0]);
    let est = estimate_local_error_probs(&sensor, 30_000, &mut rng).unwrap();
    // Raising only the up-threshold suppresses false alarms relative to
    // misses.
    assert!(
        est.alpha.value + 3.0 * est.alpha.std_error < est.beta.value,
        "alpha {} beta {}",
        est.alpha.value,
        est.beta.value
    );
}
