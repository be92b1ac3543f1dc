//! Recipe configuration: YAML file, typed defaults, and dotted
//! command-line overrides.
//!
//! Overrides are spliced into the YAML tree before deserialization, so
//! unknown keys at either level fail with serde's list of valid fields.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use sepkit_core::filterbank::{Filterbank, FilterbankKind, Window};
use sepkit_core::masking::OracleMaskKind;
use serde::{Deserialize, Serialize};

/// Environment variable that supplies the default storage directory.
pub const STORAGE_ENV_VAR: &str = "SEPKIT_STORAGE";

/// Default config path probed when `--conf` is not given.
pub const DEFAULT_CONF_PATH: &str = "local/conf.yml";

pub const VALID_METHODS: [&str; 4] =
    ["oracle:ibm", "oracle:irm", "misi", "griffin_lim_oracle"];
pub const VALID_METRICS: [&str; 5] = ["si_sdr", "si_sdr_i", "sdr", "sir", "sar"];
pub const VALID_PROFILES: [&str; 2] = ["multisine", "two_tone"];

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RecipeConfig {
    pub seed: u64,
    pub storage_dir: PathBuf,
    pub exp_dir: PathBuf,
    pub data_dir: PathBuf,
    pub logs_dir: PathBuf,
    pub data: DataConfig,
    pub noise: NoiseConfig,
    pub filterbank: FilterbankConfig,
    pub separation: SeparationConfig,
    pub evaluation: EvaluationConfig,
}

impl Default for RecipeConfig {
    fn default() -> Self {
        Self {
            seed: 1234,
            storage_dir: std::env::var_os(STORAGE_ENV_VAR)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("storage")),
            exp_dir: PathBuf::from("exp"),
            data_dir: PathBuf::from("data"),
            logs_dir: PathBuf::from("logs"),
            data: DataConfig::default(),
            noise: NoiseConfig::default(),
            filterbank: FilterbankConfig::default(),
            separation: SeparationConfig::default(),
            evaluation: EvaluationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub sample_rate_hz: u32,
    pub n_utterances: usize,
    pub utterance_seconds: f64,
    pub n_sources: usize,
    pub snr_range_db: [f64; 2],
    pub source_profile: String,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 8000,
            n_utterances: 200,
            utterance_seconds: 2.0,
            n_sources: 2,
            snr_range_db: [-5.0, 5.0],
            source_profile: "multisine".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub enabled: bool,
    pub snr_range_db: [f64; 2],
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { enabled: false, snr_range_db: [10.0, 20.0] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FilterbankConfig {
    pub kind: String,
    /// Transform length for the stft kind.
    pub n_fft: usize,
    pub hop: usize,
    pub window: String,
    /// Row count for the free, analytic_free, and sinc kinds.
    pub n_filters: usize,
    pub kernel_size: usize,
    pub stride: usize,
    pub min_low_hz: f64,
    pub min_band_hz: f64,
}

impl Default for FilterbankConfig {
    fn default() -> Self {
        Self {
            kind: "stft".into(),
            n_fft: 512,
            hop: 256,
            window: "sqrt_hann".into(),
            n_filters: 512,
            kernel_size: 16,
            stride: 8,
            min_low_hz: 50.0,
            min_band_hz: 50.0,
        }
    }
}

impl FilterbankConfig {
    pub fn build(&self, sample_rate_hz: u32, seed: u64) -> Result<Filterbank> {
        let kind = FilterbankKind::from_name(&self.kind)?;
        let fb = match kind {
            FilterbankKind::Stft => {
                Filterbank::stft(self.n_fft, self.hop, Window::from_name(&self.window)?)?
            }
            FilterbankKind::Free => {
                Filterbank::free(self.n_filters, self.kernel_size, self.stride, seed)?
            }
            FilterbankKind::AnalyticFree => {
                Filterbank::analytic_free(self.n_filters, self.kernel_size, self.stride, seed)?
            }
            FilterbankKind::Sinc => Filterbank::sinc(
                self.n_filters,
                self.kernel_size,
                self.stride,
                sample_rate_hz,
                self.min_low_hz,
                self.min_band_hz,
            )?,
        };
        Ok(fb)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SeparationConfig {
    pub method: String,
    /// Iteration budget for the misi and griffin_lim_oracle methods.
    pub n_iters: usize,
}

impl Default for SeparationConfig {
    fn default() -> Self {
        Self { method: "oracle:irm".into(), n_iters: 32 }
    }
}

impl SeparationConfig {
    pub fn mask_kind(&self) -> Option<OracleMaskKind> {
        match self.method.as_str() {
            "oracle:ibm" => Some(OracleMaskKind::Ibm),
            "oracle:irm" => Some(OracleMaskKind::Irm),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    pub metrics: Vec<String>,
    pub filter_len: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { metrics: vec!["si_sdr".into(), "si_sdr_i".into()], filter_len: 512 }
    }
}

impl RecipeConfig {
    /// Loads the config file (or defaults when `path` is None and the
    /// conventional path is absent) and applies dotted overrides.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .with_context(|| format!("cannot read config file {}", p.display()))?,
            None => {
                let conventional = Path::new(DEFAULT_CONF_PATH);
                if conventional.exists() {
                    std::fs::read_to_string(conventional)
                        .with_context(|| format!("cannot read {DEFAULT_CONF_PATH}"))?
                } else {
                    String::new()
                }
            }
        };
        let mut tree: serde_yaml::Value = if text.trim().is_empty() {
            serde_yaml::Value::Mapping(serde_yaml::Mapping::new())
        } else {
            serde_yaml::from_str(&text).context("config file is not valid YAML")?
        };
        if !tree.is_mapping() {
            bail!("config root must be a mapping of sections and keys");
        }
        for (key, raw) in overrides {
            apply_override(&mut tree, key, raw)?;
        }
        let cfg: RecipeConfig = serde_yaml::from_value(tree)
            .map_err(|e| anyhow!("invalid configuration: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        if d.n_sources < 2 {
            bail!("data.n_sources must be at least 2, got {}", d.n_sources);
        }
        if d.snr_range_db[0] > d.snr_range_db[1] {
            bail!(
                "data.snr_range_db low {} exceeds high {}",
                d.snr_range_db[0],
                d.snr_range_db[1]
            );
        }
        if self.noise.snr_range_db[0] > self.noise.snr_range_db[1] {
            bail!("noise.snr_range_db low exceeds high");
        }
        if d.utterance_seconds <= 0.0 || d.sample_rate_hz == 0 {
            bail!("utterance length and sample rate must be positive");
        }
        if d.n_utterances == 0 {
            bail!("data.n_utterances must be positive");
        }
        if !VALID_PROFILES.contains(&d.source_profile.as_str()) {
            bail!(
                "unknown source profile '{}', expected one of {}",
                d.source_profile,
                VALID_PROFILES.join(", ")
            );
        }
        if !VALID_METHODS.contains(&self.separation.method.as_str()) {
            bail!(
                "unknown separation method '{}', expected one of {}",
                self.separation.method,
                VALID_METHODS.join(", ")
            );
        }
        if self.separation.n_iters == 0 {
            bail!("separation.n_iters must be positive");
        }
        for m in &self.evaluation.metrics {
            if !VALID_METRICS.contains(&m.as_str()) {
                bail!(
                    "unknown metric '{m}', expected a subset of {}",
                    VALID_METRICS.join(", ")
                );
            }
        }
        if self.evaluation.filter_len == 0 {
            bail!("evaluation.filter_len must be positive");
        }
        // Surface bad filterbank parameters before any stage runs.
        self.filterbank.build(d.sample_rate_hz, self.seed)?;
        Ok(())
    }

    pub fn n_samples_per_utterance(&self) -> usize {
        (self.data.utterance_seconds * self.data.sample_rate_hz as f64).round() as usize
    }

    /// Split sizes in (train, dev, test) order: 10% each for dev and
    /// test, remainder to train.
    pub fn split_sizes(&self) -> [(String, usize); 3] {
        let n = self.data.n_utterances;
        let tenth = n / 10;
        [
            ("train".into(), n - 2 * tenth),
            ("dev".into(), tenth),
            ("test".into(), tenth),
        ]
    }

    pub fn resolved_yaml(&self) -> Result<String> {
        serde_yaml::to_string(self).context("cannot serialize resolved config")
    }
}

/// Splices `--section.key value` (or `--key value`) into the YAML tree.
/// Values are parsed as YAML scalars/lists; unparseable text stays a
/// plain string.
fn apply_override(tree: &mut serde_yaml::Value, dotted: &str, raw: &str) -> Result<()> {
    let map = tree.as_mapping_mut().expect("root checked to be a mapping");
    let value = parse_override_value(raw);
    match dotted.split_once('.') {
        None => {
            map.insert(serde_yaml::Value::String(dotted.into()), value);
        }
        Some((section, key)) => {
            if key.contains('.') {
                bail!("override key '{dotted}' nests too deep; use section.key");
            }
            let entry = map
                .entry(serde_yaml::Value::String(section.into()))
                .or_insert_with(|| serde_yaml::Value::Mapping(serde_yaml::Mapping::new()));
            let section_map = entry
                .as_mapping_mut()
                .ok_or_else(|| anyhow!("config key '{section}' is not a section"))?;
            section_map.insert(serde_yaml::Value::String(key.into()), value);
        }
    }
    Ok(())
}

fn parse_override_value(raw: &str) -> serde_yaml::Value {
    match serde_yaml::from_str::<serde_yaml::Value>(raw) {
        Ok(v) if !v.is_null() => v,
        _ => serde_yaml::Value::String(raw.to_string()),
    }
}
