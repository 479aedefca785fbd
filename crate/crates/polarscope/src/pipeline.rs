//! Stage orchestration with a hash-chained stage cache.
//!
//! Ingest always runs. Every later stage has a key that hashes the key of
//! the stage before it together with the settings the stage itself reads,
//! so a change invalidates exactly the stages downstream of it. Run
//! directories contain:
//!
//! ```text
//! report.json                 always written
//! users.csv                   ingest
//! windows.csv, scree.csv      embed
//! assignment.csv, clusters.csv
//! series/pair_*.csv, series/toxicity_*.csv
//! granger.csv, granger_lags.csv, mann_whitney.csv, log_odds.csv
//! cache/decompositions.bin, cache/embedding.bin
//! cache/cluster.json, cache/series.json, cache/stats.json
//! ```

use std::fs::{File, OpenOptions};
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;
use sha2::{Digest, Sha256};

use crate::cache::{self, Header, KIND_DECOMPOSITIONS, KIND_EMBEDDING};
use crate::config::{hash_json, validate_config, RunConfig};
use crate::embed::{assemble, decompose_windows, EmbedOptions, Embedding, WindowResult};
use crate::error::{Error, Result};
use crate::export;
use crate::ingest::{filter_users, join_toxicity, read_terms, read_toxicity, EventStore, ParseOptions, ScoredPosts, UserIndex};
use crate::report::{ClusterReport, CoverageReport, EmbedReport, FilterReport, RunReport, StageReport, StatsReport};
use crate::stages::{run_cluster, run_series, run_stats, ClusterOutcome, SeriesOutcome, StatsOptions, StatsOutcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, clap::ValueEnum)]
pub enum Stage {
    Ingest,
    Embed,
    Cluster,
    Series,
    Stats,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Embed => "embed",
            Stage::Cluster => "cluster",
            Stage::Series => "series",
            Stage::Stats => "stats",
        }
    }
}

const INTERPRETATIONS: &[&str] = &[
    "windows are trailing: the window dated d covers the window_days days ending at d",
    "F_i is the share of a cluster's scored retweets in the window that went to post i",
    "a post counts toward every cluster whose members retweeted it in the window",
    "the fit threshold tau applies to raw (pre-normalisation) user vector norms",
    "window scores are aligned to the previous window by orthogonal Procrustes unless alignment = none",
    "sample matrix columns are centered and divided by one pooled standard deviation unless scaling = zscore",
];

struct Lock(PathBuf);

impl Lock {
    fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(".polarscope.lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Lock(path))
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Config(vec![format!(
                "{} exists: another run owns this output directory (remove the file if no run is active)",
                path.display()
            )])),
            Err(e) => Err(Error::io(path, e)),
        }
    }
}

impl Drop for Lock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.0);
    }
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

/// Results kept in memory after a run, for callers that want more than the
/// files on disk.
#[derive(Default)]
pub struct Artifacts {
    pub store: Option<EventStore>,
    pub users: Option<UserIndex>,
    pub embedding: Option<Embedding>,
    pub clusters: Option<ClusterOutcome>,
    pub scored: Option<ScoredPosts>,
    pub series: Option<SeriesOutcome>,
    pub stats: Option<StatsOutcome>,
}

struct Run {
    cfg: RunConfig,
    out: PathBuf,
    report: RunReport,
    stage: &'static str,
    art: Artifacts,
    quiet: bool,
}

/// Runs the pipeline up to `until` and writes `report.json`. The report is
/// returned whether the run succeeded or not.
pub fn run_pipeline(config: &RunConfig, until: Stage, command: &str) -> (RunReport, Result<Artifacts>) {
    run_pipeline_with(config, until, command, true)
}

pub fn run_pipeline_with(config: &RunConfig, until: Stage, command: &str, quiet: bool) -> (RunReport, Result<Artifacts>) {
    let mut report = RunReport::new(command, config);
    report.interpretations = INTERPRETATIONS.iter().map(|s| s.to_string()).collect();
    let cfg = match validate_config(config, true) {
        Ok(c) => c,
        Err(v) => {
            let e = Error::Config(v);
            report.record_error("config", &e);
            if std::fs::create_dir_all(&config.out_dir).is_ok() {
                let _ = report.write(&config.out_dir.join("report.json"));
            }
            return (report, Err(e));
        }
    };
    report.config = cfg.clone();
    report.config_hash = cfg.hash();
    let out = cfg.out_dir.clone();
    if let Err(e) = std::fs::create_dir_all(&out) {
        let e = Error::io(&out, e);
        report.record_error("config", &e);
        return (report, Err(e));
    }
    let lock = match Lock::acquire(&out) {
        Ok(l) => l,
        Err(e) => {
            report.record_error("config", &e);
            return (report, Err(e));
        }
    };
    let mut run = Run {
        cfg,
        out: out.clone(),
        report,
        stage: "ingest",
        art: Artifacts::default(),
        quiet,
    };
    let result = run.execute(until);
    let mut report = run.report;
    let result = match result {
        Ok(()) => {
            report.status = "ok".to_string();
            Ok(run.art)
        }
        Err(e) => {
            report.record_error(run.stage, &e);
            Err(e)
        }
    };
    if let Err(e) = report.write(&out.join("report.json")) {
        drop(lock);
        return (report, result.and(Err(e)));
    }
    drop(lock);
    (report, result)
}

impl Run {
    fn note(&self, msg: &str) {
        if !self.quiet {
            eprintln!("[{}] {msg}", self.stage);
        }
    }

    fn finish_stage(&mut self, started: Instant, cached: bool, key: &str) {
        self.report.stages.push(StageReport {
            name: self.stage.to_string(),
            status: if cached { "cached" } else { "ran" }.to_string(),
            seconds: started.elapsed().as_secs_f64(),
            key: key.to_string(),
        });
        self.note(if cached { "served from cache" } else { "done" });
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn execute(&mut self, until: Stage) -> Result<()> {
        let ingest_key = self.ingest()?;
        if until == Stage::Ingest {
            return Ok(());
        }
        self.stage = "embed";
        let embed_key = self.embed(&ingest_key)?;
        if until == Stage::Embed {
            return Ok(());
        }
        self.stage = "cluster";
        let cluster_key = self.cluster(&embed_key)?;
        if until == Stage::Cluster {
            return Ok(());
        }
        self.stage = "join_toxicity";
        let tox_sha = self.join()?;
        self.stage = "series";
        let series_key = self.series(&cluster_key, &tox_sha)?;
        if until == Stage::Series {
            return Ok(());
        }
        self.stage = "stats";
        self.stats(&series_key)
    }

    fn ingest(&mut self) -> Result<String> {
        let started = Instant::now();
        let events_path = self.cfg.events.clone().expect("validated");
        let events_sha = file_sha256(&events_path)?;
        let (start, end) = self.cfg.interval();
        let opts = ParseOptions {
            format: self.cfg.event_format(),
            malformed_tolerance: self.cfg.malformed_tolerance,
            start,
            end,
        };
        let file = File::open(&events_path).map_err(|e| Error::io(&events_path, e))?;
        let (mut store, stats) = EventStore::read(BufReader::with_capacity(1 << 20, file), &opts)?;
        self.report.parse = Some(stats);
        let (index, terms_sha) = match &self.cfg.terms {
            Some(path) => {
                let f = File::open(path).map_err(|e| Error::io(path, e))?;
                let terms = read_terms(BufReader::new(f))?;
                let index = filter_users(&mut store, &terms, self.cfg.min_matches)?;
                self.report.filter = Some(FilterReport {
                    applied: true,
                    terms: terms.len(),
                    min_matches: self.cfg.min_matches,
                    retained_users: index.len(),
                    dropped_users: index.dropped_users,
                    dropped_events: index.dropped_events,
                });
                (index, Some(file_sha256(path)?))
            }
            None => {
                self.report
                    .warnings
                    .push("no term list configured; the user filter was skipped".to_string());
                let index = UserIndex::unfiltered(&store);
                self.report.filter = Some(FilterReport {
                    applied: false,
                    terms: 0,
                    min_matches: self.cfg.min_matches,
                    retained_users: index.len(),
                    dropped_users: 0,
                    dropped_events: 0,
                });
                (index, None)
            }
        };
        if store.is_empty() {
            return Err(Error::Data("no events remain after parsing and filtering".to_string()));
        }
        let days = store.timestamps.last().unwrap().div_euclid(86_400) - store.timestamps[0].div_euclid(86_400) + 1;
        let c = &mut self.report.counts;
        c.events = Some(store.len() as u64);
        c.users = Some(store.users.len() as u64);
        c.influencers = Some(store.influencer_names.len() as u64);
        c.posts = Some(store.post_names.len() as u64);
        c.hashtags = Some(store.hashtags.len() as u64);
        c.days = Some(days as u64);
        export::users(&self.path("users.csv"), &index)?;
        let key = hash_json(&json!({
            "events": events_sha,
            "terms": terms_sha,
            "format": self.cfg.format,
            "malformed_tolerance": self.cfg.malformed_tolerance,
            "start": start,
            "end": end,
            "min_matches": self.cfg.min_matches,
        }));
        self.note(&format!("{} events, {} users", store.len(), store.users.len()));
        self.art.store = Some(store);
        self.art.users = Some(index);
        self.finish_stage(started, false, &key);
        Ok(key)
    }

    fn embed(&mut self, ingest_key: &str) -> Result<String> {
        let started = Instant::now();
        let c = &self.cfg;
        let key = hash_json(&json!({
            "ingest": ingest_key,
            "window_days": c.window_days,
            "k_window": c.k_window,
            "k_sample": c.k_sample,
            "svd_tol": c.svd_tol,
            "svd_max_iterations": c.svd_max_iterations,
            "alignment": c.alignment,
            "scaling": c.scaling,
            "seed": c.seed,
        }));
        let header = |kind| Header {
            kind,
            seed: c.seed,
            key: cache::key_bytes(&key),
        };
        let emb_path = self.path("cache/embedding.bin");
        let dec_path = self.path("cache/decompositions.bin");
        let store = self.art.store.as_ref().expect("ingested");
        let current = |p: &Path, kind| cache::read_header(p) == Some(header(kind));
        let (embedding, cached) = if current(&emb_path, KIND_EMBEDDING) && current(&dec_path, KIND_DECOMPOSITIONS) {
            (cache::read_embedding(&emb_path)?.1, true)
        } else {
            let opts = EmbedOptions::from_config(c);
            let plan = store.plan_windows(c.window_days);
            self.note(&format!("{} windows", plan.windows.len()));
            let results = decompose_windows(store, &plan, &opts)?;
            let valid: Vec<&WindowResult> = results.iter().flatten().collect();
            cache::write_decompositions(&dec_path, &header(KIND_DECOMPOSITIONS), &valid, c.k_window)?;
            drop(valid);
            let e = assemble(&plan, store, results, &opts)?;
            cache::write_embedding(&emb_path, &header(KIND_EMBEDDING), &e)?;
            (e, false)
        };
        export::windows(&self.path("windows.csv"), &embedding)?;
        export::scree(&self.path("scree.csv"), &embedding)?;

        let degenerate: Vec<String> = embedding
            .windows
            .iter()
            .filter(|w| !w.valid)
            .map(|w| export::date(w.anchor))
            .collect();
        let r = &mut self.report;
        r.counts.windows = Some(embedding.windows.len() as u64);
        r.counts.valid_windows = Some(embedding.valid_windows() as u64);
        r.counts.sample_rows = Some(embedding.row_users.len() as u64);
        r.flags.padded_windows = embedding.padded_windows();
        r.flags.degenerate_windows = degenerate.len();
        r.flags.constant_columns = embedding.constant_columns.len();
        if embedding.plan_degenerate {
            r.warnings
                .push("sample spans fewer days than one window; a single window covers all events".to_string());
        }
        if embedding.reduced {
            r.warnings.push(format!(
                "k_sample reduced from {} to {} (rank of the sample matrix)",
                embedding.k_requested,
                embedding.k_sample()
            ));
        }
        r.embedding = Some(EmbedReport {
            k_window: embedding.k_window,
            k_sample: embedding.k_sample(),
            k_requested: embedding.k_requested,
            k_sample_reduced: embedding.reduced,
            aggregation: format!("{:?}", c.aggregation).to_lowercase(),
            alignment: format!("{:?}", c.alignment).to_lowercase(),
            scaling: format!("{:?}", c.scaling).to_lowercase(),
            single_window: embedding.plan_degenerate,
            degenerate_windows: degenerate,
            padded_windows: embedding.padded_windows(),
            constant_columns: embedding.constant_columns.clone(),
            alignment_fallbacks: embedding.alignment_fallbacks,
            max_svd_iterations: embedding.windows.iter().map(|w| w.iterations).max().unwrap_or(0),
            scree: embedding.scree.clone(),
            explained: embedding.explained.clone(),
        });
        self.art.embedding = Some(embedding);
        self.finish_stage(started, cached, &key);
        Ok(key)
    }

    fn cluster(&mut self, embed_key: &str) -> Result<String> {
        let started = Instant::now();
        let c = &self.cfg;
        let key = hash_json(&json!({
            "embed": embed_key,
            "aggregation": c.aggregation,
            "tau": c.tau,
            "min_cluster_size": c.min_cluster_size,
            "min_samples": c.min_samples,
        }));
        let path = self.path("cache/cluster.json");
        let store = self.art.store.as_ref().expect("ingested");
        let (outcome, cached) = match cache::read_json::<ClusterOutcome>(&path, &key) {
            Some(o) => (o, true),
            None => {
                let emb = self.art.embedding.as_ref().expect("embedded");
                let vectors = emb.user_vectors(store.users.len(), c.aggregation.into());
                let o = run_cluster(&vectors, c.tau, c.min_cluster_size, c.min_samples)?;
                cache::write_json(&path, &key, &o)?;
                (o, false)
            }
        };
        export::assignment(&self.path("assignment.csv"), store, &outcome)?;
        export::clusters(&self.path("clusters.csv"), store, &outcome, c.top_n)?;
        let r = &mut self.report;
        r.counts.labeled_users = Some(outcome.users.len() as u64);
        r.counts.fit_users = Some(outcome.fit_users as u64);
        r.counts.clusters = Some(outcome.n_clusters() as u64);
        r.counts.outliers = Some((outcome.outliers + outcome.inactive_users) as u64);
        r.clustering = Some(ClusterReport {
            tau: outcome.tau,
            min_cluster_size: outcome.min_cluster_size,
            min_samples: outcome.min_samples,
            fit_users: outcome.fit_users,
            sizes: outcome.sizes.clone(),
            outliers: outcome.outliers,
            inactive_users: outcome.inactive_users,
        });
        self.note(&format!("{} clusters, sizes {:?}", outcome.n_clusters(), outcome.sizes));
        self.art.clusters = Some(outcome);
        self.finish_stage(started, cached, &key);
        Ok(key)
    }

    fn join(&mut self) -> Result<String> {
        let Some(path) = self.cfg.toxicity.clone() else {
            return Err(Error::Config(vec![
                "join_toxicity: no toxicity file configured; the series and stats stages need one".to_string(),
            ]));
        };
        let sha = file_sha256(&path)?;
        let f = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let table = read_toxicity(BufReader::with_capacity(1 << 20, f))?;
        let store = self.art.store.as_ref().expect("ingested");
        let scored = join_toxicity(store, &table, self.cfg.min_retweets);
        let scored_retweets = store
            .posts
            .iter()
            .filter(|&&p| scored.scores[p as usize].is_some())
            .count() as u64;
        if !scored.missing.is_empty() {
            self.report.warnings.push(format!(
                "{} posts with at least {} retweets have no toxicity score",
                scored.missing.len(),
                self.cfg.min_retweets
            ));
        }
        self.report.toxicity = Some(CoverageReport {
            min_retweets: self.cfg.min_retweets,
            eligible_posts: scored.eligible,
            scored_posts: scored.scored,
            coverage: scored.coverage(),
            missing_posts: scored.missing.len(),
            missing_sample: scored.missing.iter().take(20).cloned().collect(),
            scored_retweets,
        });
        self.art.scored = Some(scored);
        Ok(sha)
    }

    fn labels(&self) -> Vec<u32> {
        let store = self.art.store.as_ref().expect("ingested");
        self.art.clusters.as_ref().expect("clustered").assignment().dense_labels(store.users.len())
    }

    fn series(&mut self, cluster_key: &str, tox_sha: &str) -> Result<String> {
        let started = Instant::now();
        let key = hash_json(&json!({
            "cluster": cluster_key,
            "toxicity": tox_sha,
            "min_retweets": self.cfg.min_retweets,
        }));
        let path = self.path("cache/series.json");
        let (outcome, cached) = match cache::read_json::<SeriesOutcome>(&path, &key) {
            Some(o) => (o, true),
            None => {
                let labels = self.labels();
                let o = run_series(
                    self.art.store.as_ref().expect("ingested"),
                    self.art.embedding.as_ref().expect("embedded"),
                    &labels,
                    self.art.clusters.as_ref().expect("clustered").n_clusters(),
                    self.art.scored.as_ref().expect("joined"),
                );
                cache::write_json(&path, &key, &o)?;
                (o, false)
            }
        };
        export::series(&self.path("series"), &outcome, self.cfg.smoothing_sigma)?;
        self.art.series = Some(outcome);
        self.finish_stage(started, cached, &key);
        Ok(key)
    }

    fn stats(&mut self, series_key: &str) -> Result<()> {
        let started = Instant::now();
        let c = &self.cfg;
        let key = hash_json(&json!({
            "series": series_key,
            "detrend_window": c.detrend_window,
            "day_of_week": c.day_of_week,
            "max_lag": c.max_lag,
            "clip": c.clip,
            "alpha": c.alpha,
            "log_odds_smoothing": c.log_odds_smoothing,
            "top_n": c.top_n,
        }));
        let path = self.path("cache/stats.json");
        let (outcome, cached) = match cache::read_json::<StatsOutcome>(&path, &key) {
            Some(o) => (o, true),
            None => {
                let opts = StatsOptions {
                    detrend_window: c.detrend_window,
                    regressors: c.regressors(),
                    max_lag: c.max_lag,
                    clip: c.clip,
                    alpha: c.alpha,
                    log_odds_smoothing: c.log_odds_smoothing,
                    top_n: c.top_n,
                };
                let labels = self.labels();
                let o = run_stats(
                    self.art.series.as_ref().expect("series"),
                    self.art.store.as_ref().expect("ingested"),
                    &labels,
                    &self.art.clusters.as_ref().expect("clustered").sizes,
                    self.art.scored.as_ref().expect("joined"),
                    &opts,
                )?;
                cache::write_json(&path, &key, &o)?;
                (o, false)
            }
        };
        export::granger(&self.out, &outcome)?;
        export::comparisons(&self.out, &outcome)?;
        let r = &mut self.report;
        r.flags.untestable_directions = outcome.untestable.len();
        if outcome.threshold.is_none() {
            r.warnings
                .push("no Granger test was executable; series too short for the detrend window and lags".to_string());
        }
        r.stats = Some(StatsReport {
            tests: outcome.tests,
            alpha: outcome.alpha,
            threshold: outcome.threshold,
            significant: outcome.significant,
            untestable_directions: outcome.untestable.clone(),
        });
        self.art.stats = Some(outcome);
        self.finish_stage(started, cached, &key);
        Ok(())
    }
}
