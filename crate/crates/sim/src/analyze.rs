//! KL information grids and per-link information reports: the quantitative
//! landscapes behind the channel comparisons and signaling choices.

use seqdet_core::channel::Signaling;
use seqdet_core::kl::{
    effective_received_info, kl_received_bec, kl_received_bsc, kl_report, penalty_awgn,
    penalty_rayleigh, penalty_rician, penalty_rician_mc, predict_delay,
};
use seqdet_core::quad::GaussHermite;
use seqdet_core::rng::substream;
use seqdet_core::Complex64;

use crate::config::{ConfigError, ResolvedExperiment};
use crate::csvfmt::{f_f64, f_u64, CsvTable};

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Log-spaced grid symmetric around the geometric midpoint.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Received information of the two binary channels over a
/// `(local error, channel error)` grid: columns
/// `alpha,epsilon,itilde_bec,itilde_bsc`.
pub fn grid_binary_channels(n: usize) -> Result<CsvTable, ConfigError> {
    let mut t = CsvTable::new(&["alpha", "epsilon", "itilde_bec", "itilde_bsc"]);
    for &ab in &linspace(0.01, 0.49, n) {
        for &eps in &linspace(0.01, 0.49, n) {
            let bec =
                kl_received_bec(ab, ab, eps).map_err(|e| ConfigError::Validation(e.to_string()))?;
            let bsc =
                kl_received_bsc(ab, ab, eps).map_err(|e| ConfigError::Validation(e.to_string()))?;
            t.row(&[f_f64(ab), f_f64(eps), f_f64(bec.h1), f_f64(bsc.h1)]);
        }
    }
    Ok(t)
}

/// Rayleigh penalty terms over a log grid of the variance ratio `ρ`,
/// spanning the reachable ratios for the given power window: columns
/// `rho,c1,c0`.
pub fn grid_rayleigh_penalty(
    alpha: f64,
    beta: f64,
    gain_var: f64,
    noise_var: f64,
    peak2: f64,
    floor2: f64,
    n: usize,
) -> Result<CsvTable, ConfigError> {
    let hi = (peak2 * gain_var + noise_var) / (floor2 * gain_var + noise_var);
    let grid = log_grid(1.0 / hi, hi, n);
    let mut t = CsvTable::new(&["rho", "c1", "c0"]);
    for &rho in &grid {
        let c = penalty_rayleigh(alpha, beta, rho)
            .map_err(|e| ConfigError::Validation(e.to_string()))?;
        t.row(&[f_f64(rho), f_f64(c.h1), f_f64(c.h0)]);
    }
    Ok(t)
}

/// Rician penalty over the `(|a|, |b|)` level grid at fixed gain
/// statistics, Monte Carlo evaluator with per-point substreams: columns
/// `a_mag,b_mag,c1,c0,c1_se,c0_se`. Grid points run in parallel; the
/// substream keying makes the output independent of scheduling.
#[allow(clippy::too_many_arguments)]
pub fn grid_rician_levels(
    alpha: f64,
    beta: f64,
    gain_mean: Complex64,
    gain_var: f64,
    noise_var: f64,
    peak: f64,
    floor: f64,
    n: usize,
    trials: u64,
    seed: u64,
) -> Result<CsvTable, ConfigError> {
    use rayon::prelude::*;
    let grid = linspace(floor, peak, n);
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let rows: Vec<Result<Vec<String>, ConfigError>> = cells
        .par_iter()
        .map(|&(i, j)| {
            let (am, bm) = (grid[i], grid[j]);
            let signaling = Signaling::new(
                Complex64::new(am, 0.0),
                Complex64::new(bm, 0.0),
                peak,
                floor,
            )
            .map_err(|e| ConfigError::Validation(e.to_string()))?;
            let (c, se) = if (am - bm).abs() <= 1e-9 * (1.0 + peak) {
                // Equal magnitudes reduce to the AWGN form (exact).
                let va = am * am * gain_var + noise_var;
                let s = ((signaling.level_a() - signaling.level_b()).norm_sqr()
                    * gain_mean.norm_sqr()
                    / va)
                    .sqrt();
                let c = penalty_awgn(alpha, beta, s)
                    .map_err(|e| ConfigError::Validation(e.to_string()))?;
                (c, seqdet_core::ByHypothesis::new(0.0, 0.0))
            } else {
                let mut rng = substream(seed, &[i as u64, j as u64]);
                let est = penalty_rician_mc(
                    alpha, beta, &signaling, gain_mean, gain_var, noise_var, trials, &mut rng,
                )
                .map_err(|e| ConfigError::Validation(e.to_string()))?;
                (est.value, est.std_error)
            };
            Ok(vec![
                f_f64(am),
                f_f64(bm),
                f_f64(c.h1),
                f_f64(c.h0),
                f_f64(se.h1),
                f_f64(se.h0),
            ])
        })
        .collect();
    let mut t = CsvTable::new(&["a_mag", "b_mag", "c1", "c0", "c1_se", "c0_se"]);
    for row in rows {
        t.row(&row?);
    }
    Ok(t)
}

/// Penalty of antipodal signaling under Rician gains, over the
/// `(|μ|², σ_h²)` plane: columns `mu2,gain_var,c1`. The separation grows
/// with the gain mean and shrinks with its spread.
pub fn grid_rician_antipodal(
    alpha: f64,
    beta: f64,
    peak: f64,
    noise_var: f64,
    mu2_grid: &[f64],
    gain_var_grid: &[f64],
) -> Result<CsvTable, ConfigError> {
    let mut t = CsvTable::new(&["mu2", "gain_var", "c1"]);
    for &mu2 in mu2_grid {
        for &gv in gain_var_grid {
            let va = peak * peak * gv + noise_var;
            let s = 2.0 * peak * mu2.sqrt() / va.sqrt();
            let c =
                penalty_awgn(alpha, beta, s).map_err(|e| ConfigError::Validation(e.to_string()))?;
            t.row(&[f_f64(mu2), f_f64(gv), f_f64(c.h1)]);
        }
    }
    Ok(t)
}

/// AWGN penalty versus separation for a family of local error rates:
/// columns `alpha,beta,s,c1,c0` (64-node rule, the reference evaluation).
pub fn grid_awgn_penalty(pairs: &[(f64, f64)], s_grid: &[f64]) -> Result<CsvTable, ConfigError> {
    let rule = GaussHermite::new(64);
    let mut t = CsvTable::new(&["alpha", "beta", "s", "c1", "c0"]);
    for &(a, b) in pairs {
        for &s in s_grid {
            let c = seqdet_core::kl::penalty_awgn_gh(a, b, s, &rule)
                .map_err(|e| ConfigError::Validation(e.to_string()))?;
            t.row(&[f_f64(a), f_f64(b), f_f64(s), f_f64(c.h1), f_f64(c.h0)]);
        }
    }
    Ok(t)
}

/// Checked Rician penalty for a single signaling pair (used by figure
/// bundles that need the gate, not the raw evaluator).
#[allow(clippy::too_many_arguments)]
pub fn rician_penalty_checked(
    alpha: f64,
    beta: f64,
    signaling: &Signaling,
    gain_mean: Complex64,
    gain_var: f64,
    noise_var: f64,
    trials: u64,
    seed: u64,
) -> Result<(f64, f64), ConfigError> {
    let mut rng = substream(seed, &[0]);
    let c = penalty_rician(
        alpha, beta, signaling, gain_mean, gain_var, noise_var, trials, &mut rng,
    )
    .map_err(|e| ConfigError::Validation(e.to_string()))?;
    Ok((c.h1, c.h0))
}

/// Convenience: serialize a plain numbered list of values.
pub fn list_csv(name: &str, values: &[f64]) -> CsvTable {
    let mut t = CsvTable::new(&["index", name]);
    for (i, v) in values.iter().enumerate() {
        t.row(&[f_u64(i as u64), f_f64(*v)]);
    }
    t
}

/// Per-sensor information ledger and the resulting first-order delay
/// prediction for a resolved experiment: one row per sensor with the
/// observed / transmitted / received information, information ratios,
/// penalty terms and mean inter-sampling intervals, plus a one-row delay
/// prediction from the effective per-slot received information.
pub fn information_report(
    exp: &ResolvedExperiment,
    trials: u64,
) -> Result<(CsvTable, CsvTable), ConfigError> {
    let mut report_table = CsvTable::new(&[
        "sensor",
        "observed_i1",
        "observed_i0",
        "transmitted_i1",
        "transmitted_i0",
        "received_i1",
        "received_i0",
        "received_mc_i1",
        "received_mc_se1",
        "received_mc_i0",
        "received_mc_se0",
        "per_obs_i1",
        "per_obs_i0",
        "ratio_hat_h1",
        "ratio_hat_h0",
        "ratio_tilde_h1",
        "ratio_tilde_h0",
        "penalty_c1",
        "penalty_c0",
        "mean_intersample_h1",
        "mean_intersample_h0",
    ]);
    let mut reports = Vec::new();
    for (k, link) in exp.system.links.iter().enumerate() {
        let mut rng = substream(exp.seed, &[u64::MAX - 8, k as u64]);
        let r = kl_report(
            &link.sensor,
            &link.channel,
            &link.signaling,
            trials,
            &mut rng,
        )
        .map_err(|e| ConfigError::Validation(e.to_string()))?;
        report_table.row(&[
            f_u64(r.sensor_id as u64),
            f_f64(r.observed.h1),
            f_f64(r.observed.h0),
            f_f64(r.transmitted_hat.h1),
            f_f64(r.transmitted_hat.h0),
            f_f64(r.received_tilde.h1),
            f_f64(r.received_tilde.h0),
            f_f64(r.received_mc.info.h1),
            f_f64(r.received_mc.std_error.h1),
            f_f64(r.received_mc.info.h0),
            f_f64(r.received_mc.std_error.h0),
            f_f64(r.per_observation.h1),
            f_f64(r.per_observation.h0),
            f_f64(r.ratio_hat.h1),
            f_f64(r.ratio_hat.h0),
            f_f64(r.ratio_tilde.h1),
            f_f64(r.ratio_tilde.h0),
            f_f64(r.penalty.h1),
            f_f64(r.penalty.h0),
            f_f64(r.mean_intersample.h1),
            f_f64(r.mean_intersample.h0),
        ]);
        reports.push(r);
    }
    let info = effective_received_info(&reports);
    // Targets implied by the configured thresholds: error <= e^{-threshold}.
    let target_alpha = (-exp.system.fusion.threshold_up).exp();
    let target_beta = (-exp.system.fusion.threshold_down).exp();
    let pred = predict_delay(info, target_alpha, target_beta)
        .map_err(|e| ConfigError::Validation(e.to_string()))?;
    let mut pred_table = CsvTable::new(&[
        "effective_info_h1",
        "effective_info_h0",
        "slope_h1",
        "slope_h0",
        "target_alpha",
        "target_beta",
        "predicted_delay_h1",
        "predicted_delay_h0",
    ]);
    pred_table.row(&[
        f_f64(info.h1),
        f_f64(info.h0),
        f_f64(pred.asymptotic_slope.h1),
        f_f64(pred.asymptotic_slope.h0),
        f_f64(target_alpha),
        f_f64(target_beta),
        f_f64(pred.predicted_delay.h1),
        f_f64(pred.predicted_delay.h0),
    ]);
    Ok((report_table, pred_table))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_grid_has_expected_shape_and_ordering() {
        let t = grid_binary_channels(10).unwrap();
        let lines: Vec<&str> = t.as_str().lines().collect();
        assert_eq!(lines.len(), 1 + 100);
        for line in &lines[1..] {
            let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
            assert!(f[2] >= f[3], "bec {} < bsc {}", f[2], f[3]);
        }
    }

    #[test]
    fn antipodal_grid_monotone_in_gain_statistics() {
        // The penalty improves with the gain-mean power and worsens with
        // the gain spread.
        let grid: Vec<f64> = (0..8).map(|i| 0.05 + 0.25 * i as f64).collect();
        let t = grid_rician_antipodal(0.1, 0.1, 10.0, 1.0, &grid, &grid).unwrap();
        let vals: Vec<(f64, f64, f64)> = t
            .as_str()
            .lines()
            .skip(1)
            .map(|l| {
                let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
                (f[0], f[1], f[2])
            })
            .collect();
        let n = grid.len();
        for i in 0..n {
            for j in 0..n {
                // increasing in mu2 along each gain_var column
                if i + 1 < n {
                    assert!(vals[(i + 1) * n + j].2 >= vals[i * n + j].2 - 1e-10);
                }
                // decreasing in gain_var along each mu2 row
                if j + 1 < n {
                    assert!(vals[i * n + j + 1].2 <= vals[i * n + j].2 + 1e-10);
                }
            }
        }
    }

    #[test]
    fn information_report_matches_manual_assembly() {
        use crate::config::ExperimentConfig;
        let cfg = r#"
trials = 100
fusion_mode = "channel-aware"

[fusion]
target_alpha = 0.01
target_beta = 0.01

[[sensors]]
id = 1
threshold_up = 1.0
threshold_down = 1.0
alpha_local = 0.1318
beta_local = 0.1318

[[channels]]
type = "bec"
epsilon = 0.2
"#;
        let exp = ExperimentConfig::from_toml_str(cfg)
            .unwrap()
            .resolve(Some(4))
            .unwrap();
        let (report, pred) = information_report(&exp, 50_000).unwrap();
        assert_eq!(report.as_str().lines().count(), 2);
        let row: Vec<f64> = report
            .as_str()
            .lines()
            .nth(1)
            .unwrap()
            .split(',')
            .map(|x| x.parse().unwrap())
            .collect();
        // received = 0.8 * transmitted under bec(0.2), exactly.
        assert!((row[5] - 0.8 * row[3]).abs() < 1e-12);
        let prow: Vec<f64> = pred
            .as_str()
            .lines()
            .nth(1)
            .unwrap()
            .split(',')
            .map(|x| x.parse().unwrap())
            .collect();
        // predicted delay = |log 0.01| * slope
        assert!((prow[6] - (100f64).ln() * prow[2]).abs() < 1e-9);
    }

    #[test]
    fn rayleigh_grid_is_symmetric_log_spaced() {
        let t = grid_rayleigh_penalty(0.1, 0.1, 1.0, 1.0, 10.0, 1.0, 11).unwrap();
        let lines: Vec<&str> = t.as_str().lines().collect();
        let rho: Vec<f64> = lines[1..]
            .iter()
            .map(|l| l.split(',').next().unwrap().parse().unwrap())
            .collect();
        assert!((rho[5] - 1.0).abs() < 1e-12, "center {}", rho[5]);
        assert!((rho[0] * rho[10] - 1.0).abs() < 1e-9);
    }
}
