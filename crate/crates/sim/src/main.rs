//! `seqdet`: simulate, sweep, analyze, calibrate, verify, reproduce.
//!
//! Exit codes: 0 success, 2 configuration/validation error, 3 I/O error.
//! Every subcommand is a pure function of `(config, seed)`; `--workers`
//! changes wall time, never bytes.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use seqdet_sim::config::{ConfigError, ExperimentConfig, ResolvedExperiment};
use seqdet_sim::csvfmt::{f_f64, CsvTable};
use seqdet_sim::harness::{
    append_summary_row, append_trial_rows, calibrate_thresholds, run_monte_carlo,
    summary_csv_header, sweep_operating_characteristic, trial_csv_header, with_workers,
};
use seqdet_sim::{analyze, reproduce, verify};

#[derive(Parser)]
#[command(
    name = "seqdet",
    about = "Channel-aware decentralized sequential detection: simulation and analysis",
    version,
    after_help = "Exit codes: 0 success, 2 configuration/validation error, 3 I/O error.\n\
        Overrides: --override key=value with dotted paths into the config \
        (e.g. sensors.0.threshold_up=2.0), applied before validation.\n\
        Seed resolution: --seed, then the config file, then SEQDET_SEED, then 0.\n\
        Outputs are a pure function of (config, seed); --workers never changes bytes."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Output directory for CSV artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed; falls back to SEQDET_SEED, then the config file, then 0.
    #[arg(long, env = "SEQDET_SEED")]
    seed: Option<u64>,
    /// Worker threads (0 = all cores). Results are identical for any value.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Field overrides, `key=value` with dotted paths (repeatable),
    /// e.g. `--override trials=1000 --override sensors.0.threshold_up=2`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Shorthand for `--override trials=N`.
    #[arg(long)]
    trials: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured Monte Carlo experiment; writes per-trial and
    /// summary CSVs.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Sweep the operating characteristic over global thresholds.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated symmetric thresholds, e.g. `3.0,4.6,6.9`.
        #[arg(long, value_delimiter = ',')]
        thresholds: Vec<f64>,
        /// Comma-separated target error probabilities; each maps to the
        /// threshold `|log target|`. Alternative to --thresholds.
        #[arg(long, value_delimiter = ',')]
        alphas: Vec<f64>,
    },
    /// Emit the KL information grids, and per-sensor information reports
    /// when a config is given.
    Analyze {
        #[command(flatten)]
        common: CommonArgs,
        /// Which grid: fig2, fig4, fig5, fig6, all, or none.
        #[arg(long, default_value = "all")]
        grid: String,
        /// Denser grids and higher trial counts.
        #[arg(long)]
        full: bool,
        /// Experiment config; adds kl_report.csv and delay_prediction.csv
        /// for its sensor-channel links.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Field overrides for --config (repeatable).
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Search global thresholds meeting target error probabilities.
    Calibrate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        target_alpha: f64,
        #[arg(long)]
        target_beta: f64,
        /// Monte Carlo trials per search evaluation.
        #[arg(long, default_value_t = 20_000)]
        search_trials: u64,
    },
    /// Run the invariant verification suites.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Run only the named check family
        /// (lemma2, dp-chain, reconstruction, quad-oracle, identity).
        #[arg(long)]
        check: Option<String>,
    },
    /// Regenerate a reference figure's data as CSV
    /// (fig2, fig4, fig5, fig6, fig7, fig8, fig9).
    Reproduce {
        figure: String,
        #[command(flatten)]
        common: CommonArgs,
        /// Denser grids and higher trial counts.
        #[arg(long)]
        full: bool,
    },
}

#[derive(Debug)]
enum AppError {
    Config(String),
    Io(std::io::Error),
    CheckFailed,
}

impl From<ConfigError> for AppError {
    fn from(e: ConfigError) -> Self {
        AppError::Config(e.to_string())
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Io(e)
    }
}

fn load_experiment(args: &ConfigArgs, seed: Option<u64>) -> Result<ResolvedExperiment, AppError> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut overrides: Vec<(String, String)> = Vec::new();
    for o in &args.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| AppError::Config(format!("override '{o}' is not KEY=VALUE")))?;
        overrides.push((k.to_string(), v.to_string()));
    }
    if let Some(t) = args.trials {
        overrides.push(("trials".to_string(), t.to_string()));
    }
    let cfg = ExperimentConfig::from_toml_with_overrides(&text, &overrides)?;
    Ok(cfg.resolve(seed)?)
}

fn write_artifacts(dir: &Path, artifacts: &[(String, CsvTable)]) -> Result<(), AppError> {
    for (name, table) in artifacts {
        table.write_to(dir, name)?;
        println!("wrote {}", dir.join(name).display());
    }
    Ok(())
}

fn cmd_simulate(common: &CommonArgs, config: &ConfigArgs) -> Result<(), AppError> {
    let exp = load_experiment(config, common.seed)?;
    let headers = trial_csv_header(exp.system.links.len());
    let header_refs: Vec<&str> = headers.iter().map(|s| s.as_str()).collect();
    let mut trials_csv = CsvTable::new(&header_refs);
    let sum_headers = summary_csv_header();
    let sum_refs: Vec<&str> = sum_headers.iter().map(|s| s.as_str()).collect();
    let mut summary_csv = CsvTable::new(&sum_refs);
    for &hyp in &exp.hypotheses {
        let (summary, records) = run_monte_carlo(&exp, hyp)?;
        append_trial_rows(&mut trials_csv, &records);
        append_summary_row(&mut summary_csv, &summary);
        println!(
            "{:?}: error={:.3e} (se {:.1e}) delay={:.4} (se {:.2e}) truncated={:.2e}",
            hyp,
            summary.achieved_error.value,
            summary.achieved_error.std_error,
            summary.mean_delay.value,
            summary.mean_delay.std_error,
            summary.truncation_rate
        );
    }
    write_artifacts(
        &common.out,
        &[
            ("trials.csv".to_string(), trials_csv),
            ("summary.csv".to_string(), summary_csv),
        ],
    )
}

fn summary_row_fields(s: &seqdet_sim::RunSummary) -> Vec<String> {
    let headers = summary_csv_header();
    let refs: Vec<&str> = headers.iter().map(|s| s.as_str()).collect();
    let mut one = CsvTable::new(&refs);
    append_summary_row(&mut one, s);
    one.as_str()
        .lines()
        .nth(1)
        .expect("one row")
        .split(',')
        .map(|s| s.to_string())
        .collect()
}

fn cmd_sweep(
    common: &CommonArgs,
    config: &ConfigArgs,
    thresholds: &[f64],
    alphas: &[f64],
) -> Result<(), AppError> {
    let mut grid: Vec<(f64, f64)> = thresholds.iter().map(|&a| (a, a)).collect();
    grid.extend(alphas.iter().map(|&a| {
        let t = -a.ln();
        (t, t)
    }));
    if grid.is_empty() {
        return Err(AppError::Config(
            "sweep needs --thresholds or --alphas".into(),
        ));
    }
    let exp = load_experiment(config, common.seed)?;
    let points = sweep_operating_characteristic(&exp, &grid)?;
    let mut headers = vec!["threshold_up".to_string(), "threshold_down".to_string()];
    headers.extend(summary_csv_header());
    let refs: Vec<&str> = headers.iter().map(|s| s.as_str()).collect();
    let mut table = CsvTable::new(&refs);
    for p in &points {
        for s in &p.summaries {
            let mut row = vec![f_f64(p.threshold_up), f_f64(p.threshold_down)];
            row.extend(summary_row_fields(s));
            table.row(&row);
        }
    }
    write_artifacts(&common.out, &[("sweep.csv".to_string(), table)])
}

fn cmd_analyze(
    common: &CommonArgs,
    grid: &str,
    full: bool,
    config: Option<&PathBuf>,
    overrides: &[String],
) -> Result<(), AppError> {
    let seed = common.seed.unwrap_or(0);
    let known = ["fig2", "fig4", "fig5", "fig6"];
    if grid != "all" && grid != "none" && !known.contains(&grid) {
        return Err(AppError::Config(format!(
            "unknown grid '{grid}'; available: fig2, fig4, fig5, fig6, all, none"
        )));
    }
    let mut artifacts = Vec::new();
    if let Some(path) = config {
        let args = ConfigArgs {
            config: path.clone(),
            overrides: overrides.to_vec(),
            trials: None,
        };
        let exp = load_experiment(&args, common.seed)?;
        let trials = if full { 1_000_000 } else { 200_000 };
        let (report, prediction) = analyze::information_report(&exp, trials)?;
        artifacts.push(("kl_report.csv".to_string(), report));
        artifacts.push(("delay_prediction.csv".to_string(), prediction));
    }
    for g in known {
        if grid == "all" || grid == g {
            artifacts.extend(reproduce::reproduce(g, full, seed)?);
        }
    }
    write_artifacts(&common.out, &artifacts)
}

fn cmd_calibrate(
    common: &CommonArgs,
    config: &ConfigArgs,
    target_alpha: f64,
    target_beta: f64,
    search_trials: u64,
) -> Result<(), AppError> {
    let exp = load_experiment(config, common.seed)?;
    let cal = calibrate_thresholds(&exp, target_alpha, target_beta, search_trials)?;
    println!(
        "threshold_up={:.6} threshold_down={:.6} (caps {:.6}/{:.6})",
        cal.threshold_up,
        cal.threshold_down,
        -target_alpha.ln(),
        -target_beta.ln()
    );
    println!(
        "achieved: alpha={:.3e} (se {:.1e})  beta={:.3e} (se {:.1e})",
        cal.achieved_alpha.value,
        cal.achieved_alpha.std_error,
        cal.achieved_beta.value,
        cal.achieved_beta.std_error
    );
    let mut t = CsvTable::new(&[
        "threshold_up",
        "threshold_down",
        "achieved_alpha",
        "alpha_se",
        "achieved_beta",
        "beta_se",
        "interval_low_up",
        "interval_low_down",
    ]);
    t.row(&[
        f_f64(cal.threshold_up),
        f_f64(cal.threshold_down),
        f_f64(cal.achieved_alpha.value),
        f_f64(cal.achieved_alpha.std_error),
        f_f64(cal.achieved_beta.value),
        f_f64(cal.achieved_beta.std_error),
        f_f64(cal.interval_low.0),
        f_f64(cal.interval_low.1),
    ]);
    write_artifacts(&common.out, &[("calibration.csv".to_string(), t)])
}

fn cmd_verify(common: &CommonArgs, check: Option<&str>) -> Result<(), AppError> {
    let seed = common.seed.unwrap_or(0);
    let results = verify::run_suite(check, seed).map_err(AppError::Config)?;
    let mut all_pass = true;
    for r in &results {
        println!("[{}] {}", if r.passed { "pass" } else { "FAIL" }, r.name);
        for m in &r.measurements {
            println!(
                "  {} {}: value={:.6e} bound={:.6e}",
                if m.passed { "pass" } else { "FAIL" },
                m.metric,
                m.value,
                m.bound
            );
        }
        all_pass &= r.passed;
    }
    write_artifacts(
        &common.out,
        &[("checks.csv".to_string(), verify::suite_csv(&results))],
    )?;
    if all_pass {
        Ok(())
    } else {
        Err(AppError::CheckFailed)
    }
}

fn cmd_reproduce(common: &CommonArgs, figure: &str, full: bool) -> Result<(), AppError> {
    let seed = common.seed.unwrap_or(0);
    let artifacts = reproduce::reproduce(figure, full, seed)?;
    write_artifacts(&common.out, &artifacts)
}

fn run() -> Result<(), AppError> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate { common, config } => {
            with_workers(common.workers, || cmd_simulate(common, config))
        }
        Command::Sweep {
            common,
            config,
            thresholds,
            alphas,
        } => with_workers(common.workers, || {
            cmd_sweep(common, config, thresholds, alphas)
        }),
        Command::Analyze {
            common,
            grid,
            full,
            config,
            overrides,
        } => with_workers(common.workers, || {
            cmd_analyze(common, grid, *full, config.as_ref(), overrides)
        }),
        Command::Calibrate {
            common,
            config,
            target_alpha,
            target_beta,
            search_trials,
        } => with_workers(common.workers, || {
            cmd_calibrate(common, config, *target_alpha, *target_beta, *search_trials)
        }),
        Command::Verify { common, check } => {
            with_workers(common.workers, || cmd_verify(common, check.as_deref()))
        }
        Command::Reproduce {
            figure,
            common,
            full,
        } => with_workers(common.workers, || cmd_reproduce(common, figure, *full)),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(AppError::Io(e)) => {
            eprintln!("i/o error: {e}");
            ExitCode::from(3)
        }
        Err(AppError::CheckFailed) => {
            eprintln!("verification failed");
            ExitCode::from(1)
        }
    }
}
