//! The JSON run report, written for every run whether it succeeds or not.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::ingest::ParseStats;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub software: String,
    pub version: String,
    pub command: String,
    /// `ok` or `failed`.
    pub status: String,
    pub error: Option<ReportError>,
    pub config_hash: String,
    pub config: RunConfig,
    pub stages: Vec<StageReport>,
    pub counts: Counts,
    pub parse: Option<ParseStats>,
    pub filter: Option<FilterReport>,
    pub toxicity: Option<CoverageReport>,
    pub embedding: Option<EmbedReport>,
    pub clustering: Option<ClusterReport>,
    pub stats: Option<StatsReport>,
    pub flags: Flags,
    pub interpretations: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportError {
    pub stage: String,
    pub message: String,
    pub exit_code: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub name: String,
    /// `ran` or `cached`.
    pub status: String,
    pub seconds: f64,
    pub key: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub events: Option<u64>,
    pub users: Option<u64>,
    pub influencers: Option<u64>,
    pub posts: Option<u64>,
    pub hashtags: Option<u64>,
    pub days: Option<u64>,
    pub windows: Option<u64>,
    pub valid_windows: Option<u64>,
    pub sample_rows: Option<u64>,
    pub labeled_users: Option<u64>,
    pub fit_users: Option<u64>,
    pub clusters: Option<u64>,
    pub outliers: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub applied: bool,
    pub terms: usize,
    pub min_matches: u64,
    pub retained_users: usize,
    pub dropped_users: usize,
    pub dropped_events: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub min_retweets: u32,
    pub eligible_posts: usize,
    pub scored_posts: usize,
    pub coverage: f64,
    pub missing_posts: usize,
    /// First missing post ids.
    pub missing_sample: Vec<String>,
    pub scored_retweets: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbedReport {
    pub k_window: usize,
    pub k_sample: usize,
    pub k_requested: usize,
    pub k_sample_reduced: bool,
    pub aggregation: String,
    pub alignment: String,
    pub scaling: String,
    pub single_window: bool,
    pub degenerate_windows: Vec<String>,
    pub padded_windows: usize,
    pub constant_columns: Vec<usize>,
    pub alignment_fallbacks: usize,
    pub max_svd_iterations: usize,
    pub scree: Vec<f64>,
    pub explained: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub tau: f64,
    pub min_cluster_size: usize,
    pub min_samples: usize,
    pub fit_users: usize,
    pub sizes: Vec<usize>,
    pub outliers: usize,
    pub inactive_users: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub tests: usize,
    pub alpha: f64,
    pub threshold: Option<f64>,
    pub significant: usize,
    pub untestable_directions: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Flags {
    pub padded_windows: usize,
    pub degenerate_windows: usize,
    pub constant_columns: usize,
    pub untestable_directions: usize,
    pub numeric_failures: Vec<String>,
}

impl RunReport {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            software: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            status: "running".to_string(),
            config_hash: config.hash(),
            config: config.clone(),
            ..Self::default()
        }
    }

    pub fn stage(&self, name: &str) -> Option<&StageReport> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn record_error(&mut self, stage: &str, err: &Error) {
        self.status = "failed".to_string();
        if let Error::Numeric { .. } = err {
            self.flags.numeric_failures.push(format!("{stage}: {err}"));
        }
        self.error = Some(ReportError {
            stage: stage.to_string(),
            message: err.to_string(),
            exit_code: err.exit_code(),
        });
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut json = serde_json::to_vec_pretty(self).expect("report serialises");
        json.push(b'\n');
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
    }

    /// Short human-readable digest.
    pub fn summary(&self) -> String {
        let mut out = format!("{} {} `{}`: {}\n", self.software, self.version, self.command, self.status);
        if let Some(e) = &self.error {
            out += &format!("  failed in {}: {}\n", e.stage, e.message);
        }
        for s in &self.stages {
            out += &format!("  {:<8} {:<7} {:>9.2}s\n", s.name, s.status, s.seconds);
        }
        let c = &self.counts;
        let show = |v: Option<u64>| v.map_or("-".to_string(), |v| v.to_string());
        out += &format!(
            "  events {}  users {}  windows {} ({} valid)  clusters {}  outliers {}\n",
            show(c.events),
            show(c.users),
            show(c.windows),
            show(c.valid_windows),
            show(c.clusters),
            show(c.outliers)
        );
        if let Some(s) = &self.stats {
            out += &format!(
                "  granger tests {}  threshold {}  significant {}  untestable directions {}\n",
                s.tests,
                s.threshold.map_or("-".to_string(), |t| format!("{t:.3e}")),
                s.significant,
                s.untestable_directions.len()
            );
        }
        for w in &self.warnings {
            out += &format!("  warning: {w}\n");
        }
        out
    }
}
