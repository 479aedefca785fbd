use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use polarscope_core::stats::{
    bonferroni, granger_scan, hashtag_log_odds, mann_whitney_auc, rolling_detrend, DirectionScan, Regressors,
};

use super::cluster_name;
use super::series::SeriesOutcome;
use crate::error::{Error, Result};
use crate::ingest::{EventStore, ScoredPosts};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StatsOptions {
    pub detrend_window: usize,
    pub regressors: Regressors,
    pub max_lag: usize,
    pub clip: Option<usize>,
    pub alpha: f64,
    pub log_odds_smoothing: f64,
    pub top_n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagOutcome {
    pub lag: usize,
    /// `None` for an infinite statistic (perfect unrestricted fit).
    pub f_stat: Option<f64>,
    pub p_value: Option<f64>,
    pub n_obs: usize,
    pub rss_restricted: Option<f64>,
    pub rss_unrestricted: Option<f64>,
    pub significant: bool,
    /// Why the lag could not be tested.
    pub untestable: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionOutcome {
    pub a: usize,
    pub b: usize,
    /// 0: `T_a → T_b`, 1: `T_b → T_a`, 2: `D → T_joint`, 3: `T_joint → D`.
    pub kind: usize,
    pub name: String,
    pub lags: Vec<LagOutcome>,
    /// Lag with the smallest p-value.
    pub best_lag: Option<usize>,
}

impl DirectionOutcome {
    pub fn best(&self) -> Option<&LagOutcome> {
        self.best_lag.map(|l| &self.lags[l - 1])
    }

    pub fn pair_name(&self) -> String {
        format!("{}-{}", cluster_name(self.a), cluster_name(self.b))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MannWhitneyOutcome {
    pub more_toxic: usize,
    pub less_toxic: usize,
    pub n1: usize,
    pub n2: usize,
    pub u: f64,
    pub auc: f64,
    pub p_value: f64,
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogOddsOutcome {
    pub cluster: usize,
    pub hashtag: String,
    pub log_odds: f64,
    pub k_in: u64,
    pub n_in: u64,
    pub k_out: u64,
    pub n_out: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsOutcome {
    pub tests: usize,
    pub alpha: f64,
    pub threshold: Option<f64>,
    pub significant: usize,
    pub directions: Vec<DirectionOutcome>,
    pub untestable: Vec<String>,
    /// Mean toxicity of each cluster's scored retweets.
    pub mean_toxicity: Vec<Option<f64>>,
    pub mann_whitney: Vec<MannWhitneyOutcome>,
    pub log_odds: Vec<LogOddsOutcome>,
}

/// Names of the four directions tested for the pair `a < b`.
pub fn direction_names(a: usize, b: usize) -> [String; 4] {
    let (ca, cb) = (cluster_name(a), cluster_name(b));
    [
        format!("T_{ca}->T_{cb}"),
        format!("T_{cb}->T_{ca}"),
        format!("D_{ca}{cb}->T_joint"),
        format!("T_joint->D_{ca}{cb}"),
    ]
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn direction(a: usize, b: usize, kind: usize, scan: &DirectionScan) -> DirectionOutcome {
    let lags = scan
        .lags
        .iter()
        .enumerate()
        .map(|(i, r)| match r {
            Ok(g) => LagOutcome {
                lag: g.lag,
                f_stat: finite(g.f_stat),
                p_value: Some(g.p_value),
                n_obs: g.n_obs,
                rss_restricted: Some(g.rss_restricted),
                rss_unrestricted: Some(g.rss_unrestricted),
                significant: false,
                untestable: None,
            },
            Err(e) => LagOutcome {
                lag: i + 1,
                f_stat: None,
                p_value: None,
                n_obs: 0,
                rss_restricted: None,
                rss_unrestricted: None,
                significant: false,
                untestable: Some(e.to_string()),
            },
        })
        .collect();
    DirectionOutcome {
        a,
        b,
        kind,
        name: direction_names(a, b)[kind].clone(),
        lags,
        best_lag: scan.best().map(|g| g.lag),
    }
}

/// Detrends every series, scans all four directions per pair, applies the
/// Bonferroni correction over every executed test, and adds the
/// Mann-Whitney and hashtag log-odds comparisons.
pub fn run_stats(
    series: &SeriesOutcome,
    store: &EventStore,
    labels: &[u32],
    sizes: &[usize],
    scored: &ScoredPosts,
    opts: &StatsOptions,
) -> Result<StatsOutcome> {
    let first_day = series.days.first().copied().unwrap_or(0);
    let detrend = |s: &[Option<f64>]| rolling_detrend(s, first_day, opts.detrend_window, opts.regressors).residuals;
    let tox: Vec<Vec<Option<f64>>> = series.toxicity.par_iter().map(|s| detrend(s)).collect();
    let scans: Vec<Result<[DirectionOutcome; 4]>> = series
        .pairs
        .par_iter()
        .map(|p| {
            let d = detrend(&p.dissimilarity);
            let j = detrend(&p.joint_toxicity);
            let t = granger_scan(&tox[p.a], &tox[p.b], opts.max_lag, opts.clip).map_err(|e| Error::numeric("stats", e))?;
            let dj = granger_scan(&d, &j, opts.max_lag, opts.clip).map_err(|e| Error::numeric("stats", e))?;
            Ok([
                direction(p.a, p.b, 0, &t.forward),
                direction(p.a, p.b, 1, &t.backward),
                direction(p.a, p.b, 2, &dj.forward),
                direction(p.a, p.b, 3, &dj.backward),
            ])
        })
        .collect();
    let mut directions = Vec::with_capacity(scans.len() * 4);
    for s in scans {
        directions.extend(s?);
    }

    let p_values: Vec<f64> = directions
        .iter()
        .flat_map(|d| d.lags.iter().filter_map(|l| l.p_value))
        .collect();
    let (threshold, significant) = match bonferroni(&p_values, opts.alpha) {
        Ok(b) => {
            let mut flags = b.significant.iter();
            for d in &mut directions {
                for l in d.lags.iter_mut().filter(|l| l.p_value.is_some()) {
                    l.significant = *flags.next().expect("one flag per p-value");
                }
            }
            (Some(b.threshold), b.significant.iter().filter(|&&s| s).count())
        }
        Err(_) => (None, 0),
    };
    let untestable = directions
        .iter()
        .filter(|d| d.best_lag.is_none())
        .map(|d| format!("{} {}", d.pair_name(), d.name))
        .collect();

    let (mean_toxicity, mann_whitney) = toxicity_comparisons(store, labels, sizes.len(), scored);
    let log_odds = log_odds(store, labels, sizes, opts);
    Ok(StatsOutcome {
        tests: p_values.len(),
        alpha: opts.alpha,
        threshold,
        significant,
        directions,
        untestable,
        mean_toxicity,
        mann_whitney,
        log_odds,
    })
}

/// One-sided comparisons of the retweet toxicity distributions, each pair
/// oriented most-toxic cluster first.
fn toxicity_comparisons(
    store: &EventStore,
    labels: &[u32],
    k: usize,
    scored: &ScoredPosts,
) -> (Vec<Option<f64>>, Vec<MannWhitneyOutcome>) {
    let mut scores: Vec<Vec<f64>> = vec![Vec::new(); k];
    for e in 0..store.len() {
        let c = labels.get(store.retweeters[e] as usize).copied().unwrap_or(u32::MAX);
        if c == u32::MAX {
            continue;
        }
        if let Some(s) = scored.scores[store.posts[e] as usize] {
            scores[c as usize].push(s);
        }
    }
    let means: Vec<Option<f64>> = scores
        .iter()
        .map(|s| (!s.is_empty()).then(|| s.iter().sum::<f64>() / s.len() as f64))
        .collect();
    let mut order: Vec<usize> = (0..k).filter(|&c| means[c].is_some()).collect();
    order.sort_by(|&x, &y| means[y].unwrap().total_cmp(&means[x].unwrap()).then(x.cmp(&y)));
    let mut out = Vec::new();
    for (i, &hi) in order.iter().enumerate() {
        for &lo in &order[i + 1..] {
            let r = mann_whitney_auc(&scores[hi], &scores[lo]);
            out.push(MannWhitneyOutcome {
                more_toxic: hi,
                less_toxic: lo,
                n1: r.n1,
                n2: r.n2,
                u: r.u,
                auc: r.auc,
                p_value: r.p_value,
                exact: r.exact,
            });
        }
    }
    (means, out)
}

fn log_odds(store: &EventStore, labels: &[u32], sizes: &[usize], opts: &StatsOptions) -> Vec<LogOddsOutcome> {
    let k = sizes.len();
    let mut keys: Vec<u64> = Vec::new();
    for e in 0..store.len() {
        let user = store.retweeters[e];
        if labels.get(user as usize).copied().unwrap_or(u32::MAX) == u32::MAX {
            continue;
        }
        for &h in store.hashtags_of(e) {
            keys.push((u64::from(h) << 32) | u64::from(user));
        }
    }
    keys.sort_unstable();
    keys.dedup();
    let mut table: Vec<(u32, Vec<u64>)> = Vec::new();
    for key in keys {
        let h = (key >> 32) as u32;
        let c = labels[(key & 0xffff_ffff) as usize] as usize;
        if table.last().map(|r| r.0) != Some(h) {
            table.push((h, vec![0; k]));
        }
        table.last_mut().expect("pushed above").1[c] += 1;
    }
    let users: Vec<u64> = sizes.iter().map(|&s| s as u64).collect();
    hashtag_log_odds(&users, &table, opts.log_odds_smoothing, opts.top_n)
        .into_iter()
        .map(|e| LogOddsOutcome {
            cluster: e.cluster,
            hashtag: store.hashtags.name(e.hashtag).to_string(),
            log_odds: e.log_odds,
            k_in: e.k_in,
            n_in: e.n_in,
            k_out: e.k_out,
            n_out: e.n_out,
        })
        .collect()
}
