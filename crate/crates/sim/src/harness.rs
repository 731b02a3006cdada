//! Parallel Monte Carlo execution, operating-characteristic sweeps, and
//! global threshold calibration.
//!
//! Trials are independent units keyed by `(seed, trial_index)`; the engine
//! collects them in index order and aggregates with pairwise summation, so
//! every aggregate is identical no matter how many workers ran or in what
//! order they finished.

use rayon::prelude::*;

use seqdet_core::detection::Estimate;
use seqdet_core::fusion::{ideal_llr_bound, Decision};
use seqdet_core::sim::{run_trial, TrialOutcome};
use seqdet_core::Hypothesis;

use crate::config::{ConfigError, ResolvedExperiment};
use crate::csvfmt::{f_f64, f_u64, CsvTable};

/// One trial in the per-trial log.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: u64,
    pub hypothesis: Hypothesis,
    pub decision: Decision,
    pub delay: u64,
    pub llr_at_stop: f64,
    pub messages: Vec<u64>,
}

/// Aggregate of one Monte Carlo run under one hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub config_digest: String,
    pub hypothesis: Hypothesis,
    pub mode_label: String,
    pub channel_label: String,
    /// False-alarm rate under `H0`, miss rate under `H1`; truncated trials
    /// count in the denominator but are not errors.
    pub achieved_error: Estimate,
    /// Mean delay over decided trials only.
    pub mean_delay: Estimate,
    pub truncation_rate: f64,
    pub trials: u64,
    pub seed: u64,
}

/// Pairwise summation; order-insensitive to floating-point association
/// drift at these sizes.
fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

fn mean_with_se(xs: &[f64]) -> Estimate {
    if xs.is_empty() {
        return Estimate {
            value: f64::NAN,
            std_error: f64::NAN,
        };
    }
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    Estimate {
        value: mean,
        std_error: (pairwise_sum(&sq) / n / n).sqrt(),
    }
}

/// Runs all trials of the experiment under `hyp` on the current rayon pool
/// and aggregates. Also returns the per-trial log in trial order.
pub fn run_monte_carlo(
    exp: &ResolvedExperiment,
    hyp: Hypothesis,
) -> Result<(RunSummary, Vec<TrialRecord>), ConfigError> {
    let outcomes: Vec<TrialOutcome> = (0..exp.trials)
        .into_par_iter()
        .map(|trial| {
            run_trial(&exp.system, hyp, exp.seed, trial, exp.max_time)
                .expect("resolved experiment is valid")
        })
        .collect();
    let records: Vec<TrialRecord> = outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| TrialRecord {
            trial: i as u64,
            hypothesis: hyp,
            decision: o.decision,
            delay: o.decision_time,
            llr_at_stop: o.stopped_llr,
            messages: o.messages.clone(),
        })
        .collect();

    let mut delays = Vec::with_capacity(outcomes.len());
    let mut errors = 0u64;
    let mut truncated = 0u64;
    for o in &outcomes {
        match o.decision {
            Decision::Pending => truncated += 1,
            d => {
                delays.push(o.decision_time as f64);
                let wrong = match hyp {
                    Hypothesis::H0 => d == Decision::DecideH1,
                    Hypothesis::H1 => d == Decision::DecideH0,
                };
                if wrong {
                    errors += 1;
                }
            }
        }
    }
    let n = exp.trials as f64;
    let p = errors as f64 / n;
    Ok((
        RunSummary {
            config_digest: exp.digest.clone(),
            hypothesis: hyp,
            mode_label: exp.mode_label.clone(),
            channel_label: exp.channel_label.clone(),
            achieved_error: Estimate {
                value: p,
                std_error: (p * (1.0 - p) / n).sqrt(),
            },
            mean_delay: mean_with_se(&delays),
            truncation_rate: truncated as f64 / n,
            trials: exp.trials,
            seed: exp.seed,
        },
        records,
    ))
}

/// Header of the per-trial CSV schema.
pub fn trial_csv_header(num_sensors: usize) -> Vec<String> {
    let mut h = vec![
        "trial".to_string(),
        "hypothesis".to_string(),
        "decision".to_string(),
        "delay".to_string(),
        "llr_at_stop".to_string(),
    ];
    for k in 1..=num_sensors {
        h.push(format!("messages_s{k}"));
    }
    h
}

fn hyp_label(h: Hypothesis) -> &'static str {
    match h {
        Hypothesis::H0 => "H0",
        Hypothesis::H1 => "H1",
    }
}

fn decision_label(d: Decision) -> &'static str {
    match d {
        Decision::DecideH0 => "H0",
        Decision::DecideH1 => "H1",
        Decision::Pending => "Truncated",
    }
}

/// Appends trial records to a per-trial CSV table.
pub fn append_trial_rows(table: &mut CsvTable, records: &[TrialRecord]) {
    for r in records {
        let mut row = vec![
            f_u64(r.trial),
            hyp_label(r.hypothesis).to_string(),
            decision_label(r.decision).to_string(),
            f_u64(r.delay),
            f_f64(r.llr_at_stop),
        ];
        row.extend(r.messages.iter().map(|m| f_u64(*m)));
        table.row(&row);
    }
}

/// Header of the summary CSV schema.
pub fn summary_csv_header() -> Vec<String> {
    [
        "config_digest",
        "hypothesis",
        "mode",
        "channel",
        "achieved_error",
        "error_se",
        "mean_delay",
        "delay_se",
        "truncation_rate",
        "trials",
        "seed",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

/// Appends one summary row.
pub fn append_summary_row(table: &mut CsvTable, s: &RunSummary) {
    table.row(&[
        s.config_digest.clone(),
        hyp_label(s.hypothesis).to_string(),
        s.mode_label.clone(),
        s.channel_label.clone(),
        f_f64(s.achieved_error.value),
        f_f64(s.achieved_error.std_error),
        f_f64(s.mean_delay.value),
        f_f64(s.mean_delay.std_error),
        f_f64(s.truncation_rate),
        f_u64(s.trials),
        f_u64(s.seed),
    ]);
}

/// One operating-characteristic point: the summaries of one threshold pair
/// under the configured hypotheses.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub threshold_up: f64,
    pub threshold_down: f64,
    pub summaries: Vec<RunSummary>,
}

/// Sweeps the operating characteristic over threshold pairs: one Monte
/// Carlo run per grid point per hypothesis.
pub fn sweep_operating_characteristic(
    exp: &ResolvedExperiment,
    thresholds: &[(f64, f64)],
) -> Result<Vec<SweepPoint>, ConfigError> {
    if thresholds.is_empty() {
        return Err(ConfigError::Validation("empty threshold grid".into()));
    }
    let mut points = Vec::with_capacity(thresholds.len());
    for &(up, down) in thresholds {
        let at = exp.with_thresholds(up, down)?;
        let mut summaries = Vec::new();
        for &hyp in &exp.hypotheses {
            summaries.push(run_monte_carlo(&at, hyp)?.0);
        }
        points.push(SweepPoint {
            threshold_up: up,
            threshold_down: down,
            summaries,
        });
    }
    Ok(points)
}

/// Result of a threshold calibration.
#[derive(Debug, Clone)]
pub struct CalibratedThresholds {
    pub threshold_up: f64,
    pub threshold_down: f64,
    /// Achieved rates at the returned thresholds (validation run).
    pub achieved_alpha: Estimate,
    pub achieved_beta: Estimate,
    /// Search interval lower edges `|log target| - Θ`.
    pub interval_low: (f64, f64),
}

/// Searches thresholds meeting `(target_alpha, target_beta)` with near
/// equality, by bisection inside `[|log target| - Θ, |log target|]` where
/// `Θ` bounds the largest single-message LLR. The upper bounds are always
/// a valid fallback; they are returned whenever the search cannot do
/// better at the given trial budget.
pub fn calibrate_thresholds(
    exp: &ResolvedExperiment,
    target_alpha: f64,
    target_beta: f64,
    search_trials: u64,
) -> Result<CalibratedThresholds, ConfigError> {
    if !(target_alpha > 0.0 && target_alpha < 1.0 && target_beta > 0.0 && target_beta < 1.0) {
        return Err(ConfigError::Validation("targets must be in (0,1)".into()));
    }
    let up_cap = -target_alpha.ln();
    let down_cap = -target_beta.ln();
    // Largest possible received-LLR magnitude across sensors bounds the
    // stopping overshoot.
    let theta = exp
        .system
        .links
        .iter()
        .map(|l| ideal_llr_bound(l.sensor.alpha_local, l.sensor.beta_local).expect("valid sensor"))
        .fold(0.0f64, f64::max);
    let lo_up = (up_cap - theta).max(0.05 * up_cap);
    let lo_down = (down_cap - theta).max(0.05 * down_cap);

    let eval = |up: f64, down: f64, tag: u64| -> Result<(Estimate, Estimate, f64), ConfigError> {
        let mut at = exp.with_thresholds(up, down)?;
        at.trials = search_trials;
        at.seed = exp.search_seed(tag);
        let (s0, _) = run_monte_carlo(&at, Hypothesis::H0)?;
        let (s1, _) = run_monte_carlo(&at, Hypothesis::H1)?;
        Ok((
            s0.achieved_error,
            s1.achieved_error,
            s0.truncation_rate.max(s1.truncation_rate),
        ))
    };

    // Reject configurations that cannot decide at all.
    let (fa_cap, miss_cap, trunc) = eval(up_cap, down_cap, 0)?;
    if trunc > 0.05 {
        return Err(ConfigError::Validation(
            "truncation dominates: targets unreachable at max_time".into(),
        ));
    }

    let (mut lo_a, mut hi_a) = (lo_up, up_cap);
    let (mut lo_b, mut hi_b) = (lo_down, down_cap);
    for iter in 1..=9u64 {
        let mid_a = 0.5 * (lo_a + hi_a);
        let mid_b = 0.5 * (lo_b + hi_b);
        let (fa, miss, _) = eval(mid_a, mid_b, iter)?;
        if fa.value > target_alpha {
            lo_a = mid_a;
        } else {
            hi_a = mid_a;
        }
        if miss.value > target_beta {
            lo_b = mid_b;
        } else {
            hi_b = mid_b;
        }
    }
    // Conservative side of the final brackets, validated; fall back to the
    // caps when the validation run exceeds the target beyond noise.
    let (mut up, mut down) = (hi_a, hi_b);
    let (fa, miss, _) = eval(up, down, 10)?;
    let (mut fa, mut miss) = (fa, miss);
    if fa.value > target_alpha + 3.0 * fa.std_error
        || miss.value > target_beta + 3.0 * miss.std_error
    {
        up = up_cap;
        down = down_cap;
        fa = fa_cap;
        miss = miss_cap;
    }
    Ok(CalibratedThresholds {
        threshold_up: up,
        threshold_down: down,
        achieved_alpha: fa,
        achieved_beta: miss,
        interval_low: (lo_up, lo_down),
    })
}

/// Runs a closure on a scoped rayon pool with the given worker count
/// (`0` keeps the default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        f()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool")
            .install(f)
    }
}
