//! Experiment configuration: strict TOML schema, `key=value` overrides,
//! offline calibration, and conversion to the core trial system.
//!
//! Unknown keys are rejected everywhere. Quantities the fusion center is
//! assumed to know but that have no closed form — local error
//! probabilities, hard-demodulator error rates, mean inter-sampling
//! intervals — are calibrated by Monte Carlo on dedicated substreams when
//! not given explicitly, so a config file plus a seed fully determines
//! every downstream number.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use seqdet_core::channel::{ChannelModel, Signaling};
use seqdet_core::detection::{estimate_local_error_probs, ObservationModel, SensorConfig};
use seqdet_core::fusion::{estimate_ml_error_rate, FusionConfig, SendProbabilities};
use seqdet_core::kl::kl_observed_local;
use seqdet_core::rng::{splitmix64, substream};
use seqdet_core::sim::{FusionMode, SensorLink, System};
use seqdet_core::{Complex64, Hypothesis};

/// Reserved substream keys for calibration passes; trial indices are far
/// below this range in any feasible run.
const CAL_LOCAL_ERR: u64 = u64::MAX - 1;
const CAL_ML_ERR: u64 = u64::MAX - 2;
const CAL_SEND: u64 = u64::MAX - 3;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Validation(String),
    #[error("calibration failed: {0}")]
    Calibration(String),
}

fn complex(v: [f64; 2]) -> Complex64 {
    Complex64::new(v[0], v[1])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationModelToml {
    pub signal_mean_h1: [f64; 2],
    pub signal_mean_h0: [f64; 2],
    pub noise_variance: f64,
}

impl Default for ObservationModelToml {
    fn default() -> Self {
        Self {
            signal_mean_h1: [1.0, 0.0],
            signal_mean_h0: [0.0, 0.0],
            noise_variance: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorToml {
    pub id: u32,
    pub threshold_up: f64,
    pub threshold_down: f64,
    /// Local false-alarm probability; calibrated by Monte Carlo if absent.
    #[serde(default)]
    pub alpha_local: Option<f64>,
    /// Local miss probability; calibrated by Monte Carlo if absent.
    #[serde(default)]
    pub beta_local: Option<f64>,
    #[serde(default)]
    pub model: ObservationModelToml,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ChannelToml {
    Ideal,
    Bec {
        epsilon: f64,
    },
    Bsc {
        epsilon: f64,
    },
    Awgn {
        gain: [f64; 2],
        noise_var: f64,
    },
    Rayleigh {
        gain_var: f64,
        noise_var: f64,
    },
    Rician {
        gain_mean: [f64; 2],
        gain_var: f64,
        noise_var: f64,
    },
}

impl ChannelToml {
    fn to_core(&self) -> ChannelModel {
        match *self {
            ChannelToml::Ideal => ChannelModel::Ideal,
            ChannelToml::Bec { epsilon } => ChannelModel::Bec { epsilon },
            ChannelToml::Bsc { epsilon } => ChannelModel::Bsc { epsilon },
            ChannelToml::Awgn { gain, noise_var } => ChannelModel::Awgn {
                gain: complex(gain),
                noise_var,
            },
            ChannelToml::Rayleigh {
                gain_var,
                noise_var,
            } => ChannelModel::Rayleigh {
                gain_var,
                noise_var,
            },
            ChannelToml::Rician {
                gain_mean,
                gain_var,
                noise_var,
            } => ChannelModel::Rician {
                gain_mean: complex(gain_mean),
                gain_var,
                noise_var,
            },
        }
    }

    /// Compact label for summary rows (no commas).
    pub fn label(&self) -> String {
        match self {
            ChannelToml::Ideal => "ideal".into(),
            ChannelToml::Bec { epsilon } => format!("bec({epsilon})"),
            ChannelToml::Bsc { epsilon } => format!("bsc({epsilon})"),
            ChannelToml::Awgn { gain, noise_var } => {
                format!("awgn(h={}+{}i;nv={noise_var})", gain[0], gain[1])
            }
            ChannelToml::Rayleigh {
                gain_var,
                noise_var,
            } => {
                format!("rayleigh(gv={gain_var};nv={noise_var})")
            }
            ChannelToml::Rician {
                gain_mean,
                gain_var,
                noise_var,
            } => format!(
                "rician(mu={}+{}i;gv={gain_var};nv={noise_var})",
                gain_mean[0], gain_mean[1]
            ),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalingToml {
    pub level_a: [f64; 2],
    pub level_b: [f64; 2],
    pub peak_amplitude: f64,
    #[serde(default)]
    pub floor_amplitude: f64,
}

impl SignalingToml {
    /// Antipodal levels at peak amplitude.
    pub fn antipodal(peak: f64) -> Self {
        Self {
            level_a: [peak, 0.0],
            level_b: [-peak, 0.0],
            peak_amplitude: peak,
            floor_amplitude: 0.0,
        }
    }

    /// On-off-keying-like levels.
    pub fn on_off(peak: f64, floor: f64) -> Self {
        Self {
            level_a: [peak, 0.0],
            level_b: [floor, 0.0],
            peak_amplitude: peak,
            floor_amplitude: floor,
        }
    }

    fn to_core(&self) -> Result<Signaling, ConfigError> {
        Signaling::new(
            complex(self.level_a),
            complex(self.level_b),
            self.peak_amplitude,
            self.floor_amplitude,
        )
        .map_err(|e| ConfigError::Validation(format!("signaling: {e}")))
    }
}

/// Which global thresholds to use: explicit, or the `|log target|` upper
/// bounds derived from target error probabilities.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionToml {
    #[serde(default)]
    pub threshold_up: Option<f64>,
    #[serde(default)]
    pub threshold_down: Option<f64>,
    #[serde(default)]
    pub target_alpha: Option<f64>,
    #[serde(default)]
    pub target_beta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FusionModeToml {
    ChannelAware,
    ConventionalIdeal,
    ConventionalBsc,
    UnreliableTiming,
    ThresholdThenFuse,
}

impl FusionModeToml {
    pub fn label(&self) -> &'static str {
        match self {
            FusionModeToml::ChannelAware => "channel-aware",
            FusionModeToml::ConventionalIdeal => "conventional-ideal",
            FusionModeToml::ConventionalBsc => "conventional-bsc",
            FusionModeToml::UnreliableTiming => "unreliable-timing",
            FusionModeToml::ThresholdThenFuse => "threshold-then-fuse",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum HypothesisToml {
    H0,
    H1,
    #[serde(rename = "both")]
    #[default]
    Both,
}

fn default_max_time() -> u64 {
    1_000_000
}

fn default_calibration_trials() -> u64 {
    400_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationToml {
    #[serde(default = "default_calibration_trials")]
    pub trials: u64,
}

impl Default for CalibrationToml {
    fn default() -> Self {
        Self {
            trials: default_calibration_trials(),
        }
    }
}

/// The full experiment schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    pub trials: u64,
    #[serde(default = "default_max_time")]
    pub max_time: u64,
    #[serde(default)]
    pub hypothesis: HypothesisToml,
    pub fusion_mode: FusionModeToml,
    /// Presence-gate threshold on `|z|`; required by the
    /// `threshold-then-fuse` mode.
    #[serde(default)]
    pub detection_threshold: Option<f64>,
    #[serde(default)]
    pub calibration: CalibrationToml,
    pub fusion: FusionToml,
    pub sensors: Vec<SensorToml>,
    pub channels: Vec<ChannelToml>,
    #[serde(default)]
    pub signaling: Vec<SignalingToml>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let tree: toml::Value =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        // Tagged enum tables bypass serde's unknown-field rejection; compare
        // the raw tree against the canonical shape to close that hole.
        let canon = serde_json::to_value(&cfg).expect("config serializes");
        reject_unknown_keys(&tree, &canon, "")?;
        Ok(cfg)
    }

    /// Parses with `key=value` overrides applied to the raw TOML tree.
    /// Override values are parsed as TOML literals, falling back to
    /// strings; unknown keys surface as parse errors naming the key.
    pub fn from_toml_with_overrides(
        text: &str,
        overrides: &[(String, String)],
    ) -> Result<Self, ConfigError> {
        let mut tree: toml::Value =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for (key, value) in overrides {
            apply_override(&mut tree, key, value)?;
        }
        let text = toml::to_string(&tree).map_err(|e| ConfigError::Parse(e.to_string()))?;
        Self::from_toml_str(&text)
    }

    /// Stable identifier of the experiment: SHA-256 over the canonical JSON
    /// serialization, truncated to 16 hex digits.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let hash = Sha256::digest(json.as_bytes());
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.trials == 0 {
            return Err(ConfigError::Validation("trials must be at least 1".into()));
        }
        if self.max_time == 0 {
            return Err(ConfigError::Validation(
                "max_time must be at least 1".into(),
            ));
        }
        let k = self.sensors.len();
        if k == 0 {
            return Err(ConfigError::Validation(
                "at least one sensor required".into(),
            ));
        }
        if self.channels.len() != k {
            return Err(ConfigError::Validation(format!(
                "channels ({}) and sensors ({k}) must have equal lengths",
                self.channels.len()
            )));
        }
        let all_discrete = self.channels.iter().all(|c| c.to_core().is_discrete());
        if self.signaling.len() != k && !(self.signaling.is_empty() && all_discrete) {
            return Err(ConfigError::Validation(format!(
                "signaling ({}) and sensors ({k}) must have equal lengths \
                 (the list may only be omitted when all channels are binary)",
                self.signaling.len()
            )));
        }
        match (
            self.fusion.threshold_up.is_some() && self.fusion.threshold_down.is_some(),
            self.fusion.target_alpha.is_some() && self.fusion.target_beta.is_some(),
        ) {
            (false, false) => {
                return Err(ConfigError::Validation(
                    "fusion needs either thresholds or target error probabilities".into(),
                ))
            }
            (true, true) => {
                return Err(ConfigError::Validation(
                    "fusion thresholds and targets are mutually exclusive".into(),
                ))
            }
            _ => {}
        }
        if self.fusion_mode == FusionModeToml::ThresholdThenFuse
            && self.detection_threshold.is_none()
        {
            return Err(ConfigError::Validation(
                "threshold-then-fuse requires detection_threshold".into(),
            ));
        }
        Ok(())
    }

    /// Validates, calibrates, and assembles the runnable experiment.
    /// `seed_override` (from `--seed` or the environment) takes precedence
    /// over the config's own seed.
    pub fn resolve(&self, seed_override: Option<u64>) -> Result<ResolvedExperiment, ConfigError> {
        self.validate()?;
        let seed = seed_override.or(self.seed).unwrap_or(0);
        let cal_trials = self.calibration.trials.max(1);

        let mut links = Vec::with_capacity(self.sensors.len());
        for (k, s) in self.sensors.iter().enumerate() {
            let model = ObservationModel {
                signal_mean_h1: complex(s.model.signal_mean_h1),
                signal_mean_h0: complex(s.model.signal_mean_h0),
                noise_variance: s.model.noise_variance,
            };
            model
                .validate()
                .map_err(|e| ConfigError::Validation(format!("sensor {}: {e}", s.id)))?;
            let (alpha, beta) = match (s.alpha_local, s.beta_local) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    let probe = SensorConfig {
                        sensor_id: s.id,
                        model,
                        threshold_up: s.threshold_up,
                        threshold_down: s.threshold_down,
                        // placeholders; not used by the estimator
                        alpha_local: 0.1,
                        beta_local: 0.1,
                    };
                    let mut rng = substream(seed, &[CAL_LOCAL_ERR, k as u64]);
                    let est = estimate_local_error_probs(&probe, cal_trials, &mut rng)
                        .map_err(|e| ConfigError::Calibration(e.to_string()))?;
                    // Zero-count estimates would break the LLR logs; floor
                    // at half a count.
                    let floor = 0.5 / cal_trials as f64;
                    (
                        s.alpha_local.unwrap_or(est.alpha.value.max(floor)),
                        s.beta_local.unwrap_or(est.beta.value.max(floor)),
                    )
                }
            };
            let sensor = SensorConfig {
                sensor_id: s.id,
                model,
                threshold_up: s.threshold_up,
                threshold_down: s.threshold_down,
                alpha_local: alpha,
                beta_local: beta,
            };
            sensor
                .validate()
                .map_err(|e| ConfigError::Validation(format!("sensor {}: {e}", s.id)))?;
            let signaling = if self.signaling.is_empty() {
                Signaling::antipodal(1.0).expect("unit antipodal")
            } else {
                self.signaling[k].to_core()?
            };
            links.push(SensorLink {
                sensor,
                channel: self.channels[k].to_core(),
                signaling,
            });
        }

        let fusion = match (
            self.fusion.threshold_up,
            self.fusion.threshold_down,
            self.fusion.target_alpha,
            self.fusion.target_beta,
        ) {
            (Some(up), Some(down), None, None) => FusionConfig::new(up, down)
                .map_err(|e| ConfigError::Validation(format!("fusion: {e}")))?,
            (None, None, Some(a), Some(b)) => FusionConfig::from_targets(a, b)
                .map_err(|e| ConfigError::Validation(format!("fusion: {e}")))?,
            _ => unreachable!("validated"),
        };

        let mode = self.resolve_mode(&links, seed, cal_trials)?;
        let system = System {
            links,
            fusion,
            mode,
        };
        system
            .validate()
            .map_err(|e| ConfigError::Validation(e.to_string()))?;
        let hypotheses = match self.hypothesis {
            HypothesisToml::H0 => vec![Hypothesis::H0],
            HypothesisToml::H1 => vec![Hypothesis::H1],
            HypothesisToml::Both => vec![Hypothesis::H1, Hypothesis::H0],
        };
        let channel_label = {
            let first = self.channels[0].label();
            if self.channels.iter().all(|c| c.label() == first) {
                first
            } else {
                "mixed".into()
            }
        };
        Ok(ResolvedExperiment {
            digest: self.digest(),
            system,
            trials: self.trials,
            max_time: self.max_time,
            seed,
            hypotheses,
            mode_label: self.fusion_mode.label().into(),
            channel_label,
        })
    }

    fn resolve_mode(
        &self,
        links: &[SensorLink],
        seed: u64,
        cal_trials: u64,
    ) -> Result<FusionMode, ConfigError> {
        Ok(match self.fusion_mode {
            FusionModeToml::ChannelAware => FusionMode::ChannelAware,
            FusionModeToml::ConventionalIdeal => FusionMode::ConventionalIdeal,
            FusionModeToml::ConventionalBsc => {
                let mut eps = Vec::with_capacity(links.len());
                for (k, link) in links.iter().enumerate() {
                    if link.channel.is_discrete() {
                        eps.push(0.0);
                        continue;
                    }
                    let mut rng = substream(seed, &[CAL_ML_ERR, k as u64]);
                    let est = estimate_ml_error_rate(
                        &link.channel,
                        &link.signaling,
                        cal_trials,
                        &mut rng,
                    )
                    .map_err(|e| ConfigError::Calibration(e.to_string()))?;
                    if est.value >= 0.5 {
                        return Err(ConfigError::Calibration(format!(
                            "sensor {} demodulator error rate {} is not below 0.5",
                            link.sensor.sensor_id, est.value
                        )));
                    }
                    eps.push(est.value);
                }
                FusionMode::ConventionalBsc { epsilon_ml: eps }
            }
            FusionModeToml::UnreliableTiming => {
                let mut send = Vec::with_capacity(links.len());
                for (k, link) in links.iter().enumerate() {
                    let mut rng = substream(seed, &[CAL_SEND, k as u64]);
                    let obs = kl_observed_local(&link.sensor, cal_trials, &mut rng)
                        .map_err(|e| ConfigError::Calibration(e.to_string()))?;
                    send.push(SendProbabilities {
                        h1: 1.0 / obs.mean_intersample.h1,
                        h0: 1.0 / obs.mean_intersample.h0,
                    });
                }
                FusionMode::UnreliableTiming { send }
            }
            FusionModeToml::ThresholdThenFuse => FusionMode::ThresholdThenFuse {
                detection_threshold: self.detection_threshold.expect("validated"),
            },
        })
    }
}

/// A validated, calibrated experiment ready to run.
#[derive(Debug, Clone)]
pub struct ResolvedExperiment {
    pub digest: String,
    pub system: System,
    pub trials: u64,
    pub max_time: u64,
    pub seed: u64,
    pub hypotheses: Vec<Hypothesis>,
    pub mode_label: String,
    pub channel_label: String,
}

impl ResolvedExperiment {
    /// Same experiment at different global thresholds (for sweeps); the
    /// digest is kept so curve points group under one experiment.
    pub fn with_thresholds(&self, up: f64, down: f64) -> Result<Self, ConfigError> {
        let mut out = self.clone();
        out.system.fusion = FusionConfig::new(up, down)
            .map_err(|e| ConfigError::Validation(format!("thresholds: {e}")))?;
        Ok(out)
    }

    /// Derived seed for internal search passes, outside the trial stream
    /// space of the main run.
    pub fn search_seed(&self, tag: u64) -> u64 {
        splitmix64(self.seed ^ splitmix64(0x7ea_c0de ^ tag.rotate_left(17)))
    }
}

fn reject_unknown_keys(
    input: &toml::Value,
    canon: &serde_json::Value,
    path: &str,
) -> Result<(), ConfigError> {
    match (input, canon) {
        (toml::Value::Table(table), serde_json::Value::Object(obj)) => {
            for (key, val) in table {
                let child = if path.is_empty() {
                    key.clone()
                } else {
                    format!("{path}.{key}")
                };
                match obj.get(key) {
                    None => {
                        return Err(ConfigError::Parse(format!("unknown config key '{child}'")))
                    }
                    Some(c) => reject_unknown_keys(val, c, &child)?,
                }
            }
            Ok(())
        }
        (toml::Value::Array(arr), serde_json::Value::Array(carr)) => {
            for (i, (v, c)) in arr.iter().zip(carr).enumerate() {
                reject_unknown_keys(v, c, &format!("{path}.{i}"))?;
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

fn apply_override(tree: &mut toml::Value, key: &str, value: &str) -> Result<(), ConfigError> {
    let parsed: toml::Value = match format!("v = {value}").parse::<toml::Table>() {
        Ok(t) => t["v"].clone(),
        Err(_) => toml::Value::String(value.to_string()),
    };
    let mut node = tree;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        if let Ok(idx) = part.parse::<usize>() {
            let arr = node.as_array_mut().ok_or_else(|| {
                ConfigError::Parse(format!(
                    "override key '{key}': '{part}' indexes a non-array"
                ))
            })?;
            if idx >= arr.len() {
                return Err(ConfigError::Parse(format!(
                    "override key '{key}': index {idx} out of bounds"
                )));
            }
            if last {
                arr[idx] = parsed;
                return Ok(());
            }
            node = &mut arr[idx];
        } else {
            let table = node.as_table_mut().ok_or_else(|| {
                ConfigError::Parse(format!(
                    "override key '{key}': '{part}' indexes a non-table"
                ))
            })?;
            if last {
                table.insert(part.to_string(), parsed);
                return Ok(());
            }
            node = table
                .entry(part.to_string())
                .or_insert(toml::Value::Table(toml::Table::new()));
        }
    }
    Ok(())
}
