//! Run configuration: defaults, validation and hashing.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use polarscope_core::spectral::{Aggregation, Alignment, ColumnScaling};
use polarscope_core::stats::Regressors;

use crate::error::{Error, Result};
use crate::ingest::{parse_timestamp, EventFormat};

/// Effective settings of one run. Every field has a default, so a config
/// file only lists what it changes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub events: Option<PathBuf>,
    pub toxicity: Option<PathBuf>,
    pub terms: Option<PathBuf>,
    /// `csv` or `jsonl`; guessed from the extension when absent.
    pub format: Option<String>,
    pub out_dir: PathBuf,

    pub malformed_tolerance: f64,
    /// RFC 3339 or unix seconds; inclusive.
    pub sample_start: Option<String>,
    /// RFC 3339 or unix seconds; exclusive.
    pub sample_end: Option<String>,
    pub min_matches: u64,

    pub window_days: u32,
    pub k_window: usize,
    pub k_sample: usize,
    pub svd_tol: f64,
    pub svd_max_iterations: usize,
    pub alignment: AlignmentMode,
    pub scaling: ScalingMode,
    pub aggregation: AggregationMode,
    pub seed: u64,

    pub tau: f64,
    /// `max(50, 0.5% of users)` when absent.
    pub min_cluster_size: Option<usize>,
    pub min_samples: usize,

    pub min_retweets: u32,
    pub smoothing_sigma: f64,

    pub detrend_window: usize,
    pub day_of_week: bool,
    pub max_lag: usize,
    #[serde(serialize_with = "clip_out", deserialize_with = "clip_in")]
    pub clip: Option<usize>,
    pub alpha: f64,
    pub log_odds_smoothing: f64,
    pub top_n: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            events: None,
            toxicity: None,
            terms: None,
            format: None,
            out_dir: PathBuf::from("polarscope-run"),
            malformed_tolerance: 0.01,
            sample_start: None,
            sample_end: None,
            min_matches: 7,
            window_days: 7,
            k_window: 30,
            k_sample: 4,
            svd_tol: 1e-8,
            svd_max_iterations: 1000,
            alignment: AlignmentMode::Procrustes,
            scaling: ScalingMode::Pooled,
            aggregation: AggregationMode::Sum,
            seed: 0x5eed,
            tau: 10.0,
            min_cluster_size: None,
            min_samples: 10,
            min_retweets: 10,
            smoothing_sigma: 3.0,
            detrend_window: 30,
            day_of_week: false,
            max_lag: 155,
            clip: Some(500),
            alpha: 0.05,
            log_odds_smoothing: 0.5,
            top_n: 20,
        }
    }
}

/// Named bundles of sample-specific settings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// 7 matching posts, lags up to 155, first 500 observations.
    Covid,
    /// 28 matching posts, lags up to 85, no clipping.
    Ukraine,
}

impl RunConfig {
    pub fn apply_preset(&mut self, preset: Preset) {
        match preset {
            Preset::Covid => {
                self.min_matches = 7;
                self.max_lag = 155;
                self.clip = Some(500);
            }
            Preset::Ukraine => {
                self.min_matches = 28;
                self.max_lag = 85;
                self.clip = None;
            }
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn event_format(&self) -> EventFormat {
        match self.format.as_deref() {
            Some(f) => f.parse().unwrap_or(EventFormat::Csv),
            None => self.events.as_deref().map_or(EventFormat::Csv, EventFormat::from_path),
        }
    }

    pub fn regressors(&self) -> Regressors {
        if self.day_of_week {
            Regressors::LinearDayOfWeek
        } else {
            Regressors::Linear
        }
    }

    pub fn interval(&self) -> (Option<i64>, Option<i64>) {
        let parse = |s: &Option<String>| s.as_deref().and_then(parse_timestamp);
        (parse(&self.sample_start), parse(&self.sample_end))
    }

    /// SHA-256 over the canonical JSON serialisation.
    pub fn hash(&self) -> String {
        hash_json(self)
    }
}

pub fn hash_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serialisable");
    hex::encode(Sha256::digest(&bytes))
}

fn clip_out<S: Serializer>(clip: &Option<usize>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match clip {
        Some(n) => s.serialize_u64(*n as u64),
        None => s.serialize_str("none"),
    }
}

fn clip_in<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<usize>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        N(i64),
        S(String),
        B(bool),
    }
    match Raw::deserialize(d)? {
        Raw::N(n) if n >= 0 => Ok(Some(n as usize)),
        Raw::N(n) => Err(serde::de::Error::custom(format!("clip must be non-negative, got {n}"))),
        Raw::S(s) if s == "none" => Ok(None),
        Raw::B(false) => Ok(None),
        _ => Err(serde::de::Error::custom("clip must be a count or \"none\"")),
    }
}

/// Parses `--clip` values: a count or `none`.
pub fn parse_clip(s: &str) -> std::result::Result<Option<usize>, String> {
    if s == "none" {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| format!("expected a count or `none`, got `{s}`"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AlignmentMode {
    None,
    Procrustes,
}

impl From<AlignmentMode> for Alignment {
    fn from(m: AlignmentMode) -> Self {
        match m {
            AlignmentMode::None => Alignment::None,
            AlignmentMode::Procrustes => Alignment::Procrustes,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ScalingMode {
    Zscore,
    Pooled,
}

impl From<ScalingMode> for ColumnScaling {
    fn from(m: ScalingMode) -> Self {
        match m {
            ScalingMode::Zscore => ColumnScaling::ZScore,
            ScalingMode::Pooled => ColumnScaling::Pooled,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AggregationMode {
    Sum,
    Mean,
}

impl From<AggregationMode> for Aggregation {
    fn from(m: AggregationMode) -> Self {
        match m {
            AggregationMode::Sum => Aggregation::Sum,
            AggregationMode::Mean => Aggregation::Mean,
        }
    }
}

/// Checks every constraint and reports all violations together. Input
/// paths are only required when `need_inputs` is set.
pub fn validate_config(config: &RunConfig, need_inputs: bool) -> std::result::Result<RunConfig, Vec<String>> {
    let mut v = Vec::new();
    let c = config;
    if need_inputs && c.events.is_none() {
        v.push("events: an event file is required".to_string());
    }
    if let Some(f) = &c.format {
        if let Err(e) = f.parse::<EventFormat>() {
            v.push(format!("format: {e}"));
        }
    }
    if !(0.0..=1.0).contains(&c.malformed_tolerance) {
        v.push(format!("malformed_tolerance: must lie in [0, 1], got {}", c.malformed_tolerance));
    }
    let (start, end) = c.interval();
    if c.sample_start.is_some() && start.is_none() {
        v.push("sample_start: not a timestamp".to_string());
    }
    if c.sample_end.is_some() && end.is_none() {
        v.push("sample_end: not a timestamp".to_string());
    }
    if let (Some(s), Some(e)) = (start, end) {
        if s >= e {
            v.push("sample_start: must precede sample_end".to_string());
        }
    }
    let positive = |v: &mut Vec<String>, name: &str, ok: bool, shown: String| {
        if !ok {
            v.push(format!("{name}: must be positive, got {shown}"));
        }
    };
    positive(&mut v, "min_matches", c.min_matches > 0, c.min_matches.to_string());
    positive(&mut v, "window_days", c.window_days > 0, c.window_days.to_string());
    positive(&mut v, "k_window", c.k_window > 0, c.k_window.to_string());
    positive(&mut v, "k_sample", c.k_sample > 0, c.k_sample.to_string());
    positive(&mut v, "svd_max_iterations", c.svd_max_iterations > 0, c.svd_max_iterations.to_string());
    positive(&mut v, "min_samples", c.min_samples > 0, c.min_samples.to_string());
    positive(&mut v, "min_retweets", c.min_retweets > 0, c.min_retweets.to_string());
    positive(&mut v, "smoothing_sigma", c.smoothing_sigma > 0.0, c.smoothing_sigma.to_string());
    positive(&mut v, "max_lag", c.max_lag > 0, c.max_lag.to_string());
    positive(&mut v, "log_odds_smoothing", c.log_odds_smoothing > 0.0, c.log_odds_smoothing.to_string());
    positive(&mut v, "top_n", c.top_n > 0, c.top_n.to_string());
    if c.k_sample > c.k_window {
        v.push(format!("k_sample: {} exceeds k_window {}", c.k_sample, c.k_window));
    }
    if !(c.svd_tol > 0.0 && c.svd_tol < 1.0) {
        v.push(format!("svd_tol: must lie in (0, 1), got {}", c.svd_tol));
    }
    if !(c.tau >= 0.0 && c.tau.is_finite()) {
        v.push(format!("tau: must be a non-negative number, got {}", c.tau));
    }
    if let Some(m) = c.min_cluster_size {
        if m < 2 {
            v.push(format!("min_cluster_size: must be at least 2, got {m}"));
        }
    }
    let need = if c.day_of_week { 9 } else { 3 };
    if c.detrend_window < need {
        v.push(format!("detrend_window: needs at least {need} observations for its regressors, got {}", c.detrend_window));
    }
    if c.clip == Some(0) {
        v.push("clip: must be positive or \"none\"".to_string());
    }
    if !(c.alpha > 0.0 && c.alpha < 1.0) {
        v.push(format!("alpha: must lie in (0, 1), got {}", c.alpha));
    }
    if v.is_empty() {
        let mut normalized = c.clone();
        normalized.format = Some(
            match c.event_format() {
                EventFormat::Csv => "csv",
                EventFormat::Jsonl => "jsonl",
            }
            .to_string(),
        );
        Ok(normalized)
    } else {
        Err(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = validate_config(&RunConfig::default(), false).unwrap();
        assert_eq!(c.format.as_deref(), Some("csv"));
    }

    #[test]
    fn all_violations_listed() {
        let c = RunConfig {
            k_sample: 40,
            tau: -1.0,
            alpha: 2.0,
            window_days: 0,
            ..RunConfig::default()
        };
        let errs = validate_config(&c, true).unwrap_err();
        assert_eq!(errs.len(), 5, "{errs:?}");
        assert!(errs.iter().any(|e| e.starts_with("k_sample")));
        assert!(errs.iter().any(|e| e.starts_with("tau")));
        assert!(errs.iter().any(|e| e.starts_with("events")));
    }

    #[test]
    fn toml_round_trip_and_clip_forms() {
        let c = RunConfig::from_toml("k_sample = 3\nclip = \"none\"\n").unwrap();
        assert_eq!(c.k_sample, 3);
        assert_eq!(c.clip, None);
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(RunConfig::from_toml("clip = 250").unwrap().clip, Some(250));
        assert!(RunConfig::from_toml("no_such_key = 1").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.tau = 11.0;
        assert_ne!(a.hash(), b.hash());
    }
}
