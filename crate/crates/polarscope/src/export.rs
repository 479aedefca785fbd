//! Plot-ready CSV exports. Empty cells mark gaps or untestable values.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use chrono::DateTime;
use polarscope_core::clustering::cluster_summary;
use polarscope_core::dynamics::gaussian_smooth;

use crate::embed::Embedding;
use crate::error::{Error, Result};
use crate::ingest::{EventStore, UserIndex};
use crate::stages::{cluster_name, ClusterOutcome, SeriesOutcome, StatsOutcome};

/// `YYYY-MM-DD` of a day index.
pub fn date(day: i64) -> String {
    DateTime::from_timestamp(day * 86_400, 0)
        .map(|d| d.date_naive().to_string())
        .unwrap_or_else(|| day.to_string())
}

/// Shortest round-trip text; scientific notation for very small or large magnitudes.
pub fn float(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

fn num(x: Option<f64>) -> String {
    x.map_or_else(String::new, float)
}

struct Csv {
    path: std::path::PathBuf,
    w: csv::Writer<BufWriter<File>>,
}

impl Csv {
    fn create(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            w: csv::Writer::from_writer(BufWriter::with_capacity(1 << 16, f)),
        })
    }

    fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.w.write_record(fields).map_err(|e| csv_err(&self.path, e))
    }

    fn finish(mut self) -> Result<()> {
        self.w.flush().map_err(|e| Error::io(&self.path, e))
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

/// `users.csv`: retained users with event and term-match counts.
pub fn users(path: &Path, index: &UserIndex) -> Result<()> {
    let mut w = Csv::create(path)?;
    w.row(["user", "events", "matches"])?;
    for (i, name) in index.names.iter().enumerate() {
        w.row([name.clone(), index.event_counts[i].to_string(), index.match_counts[i].to_string()])?;
    }
    w.finish()
}

/// `windows.csv`: one row per calendar-day window.
pub fn windows(path: &Path, e: &Embedding) -> Result<()> {
    let mut w = Csv::create(path)?;
    w.row([
        "date",
        "first_date",
        "events",
        "users",
        "influencers",
        "valid",
        "effective_rank",
        "padded",
        "iterations",
        "total_variance",
        "sigma_1",
    ])?;
    for info in &e.windows {
        w.row([
            date(info.anchor),
            date(info.first_day),
            info.events.to_string(),
            info.users.to_string(),
            info.influencers.to_string(),
            info.valid.to_string(),
            info.effective_rank.to_string(),
            info.padded(e.k_window).to_string(),
            info.iterations.to_string(),
            float(info.total_variance),
            float(info.singular_values.first().copied().unwrap_or(0.0)),
        ])?;
    }
    w.finish()
}

/// `scree.csv`: singular values of the scaled sample matrix.
pub fn scree(path: &Path, e: &Embedding) -> Result<()> {
    let total: f64 = e.scree.iter().map(|s| s * s).sum();
    let mut w = Csv::create(path)?;
    w.row(["component", "singular_value", "variance_share", "retained"])?;
    for (i, s) in e.scree.iter().enumerate() {
        let share = if total > 0.0 { s * s / total } else { 0.0 };
        w.row([(i + 1).to_string(), float(*s), float(share), (i < e.k_sample()).to_string()])?;
    }
    w.finish()
}

/// `assignment.csv`: `user,cluster,provenance`. Users absent from every
/// window are listed as inactive outliers.
pub fn assignment(path: &Path, store: &EventStore, c: &ClusterOutcome) -> Result<()> {
    let mut w = Csv::create(path)?;
    w.row(["user", "cluster", "provenance"])?;
    let mut pos = 0;
    for u in 0..store.users.len() as u32 {
        let name = store.users.name(u);
        if c.users.get(pos) == Some(&u) {
            let label = c.labels[pos].map_or_else(|| "outlier".to_string(), |l| cluster_name(l as usize));
            let prov = if c.fit[pos] { "fit" } else { "predicted" };
            w.row([name, &label, prov])?;
            pos += 1;
        } else {
            w.row([name, "outlier", "inactive"])?;
        }
    }
    w.finish()
}

/// `clusters.csv`: sizes, activity and the most frequent hashtags and users.
pub fn clusters(path: &Path, store: &EventStore, c: &ClusterOutcome, top_n: usize) -> Result<()> {
    let a = c.assignment();
    let summary = cluster_summary(&a, (0..store.len()).map(|e| (store.retweeters[e], store.hashtags_of(e))), top_n);
    let mut w = Csv::create(path)?;
    w.row(["cluster", "size", "fit_members", "events", "top_users", "top_hashtags"])?;
    for k in 0..c.n_clusters() {
        let fit = c.labels.iter().zip(&c.fit).filter(|(l, &f)| f && **l == Some(k as u32)).count();
        let users: Vec<String> = summary.top_users[k]
            .iter()
            .map(|&(u, n)| format!("{}:{n}", store.users.name(u)))
            .collect();
        let tags: Vec<String> = summary
            .top_hashtags(k, top_n)
            .iter()
            .map(|&(h, n)| format!("{}:{n}", store.hashtags.name(h)))
            .collect();
        w.row([
            cluster_name(k),
            summary.sizes[k].to_string(),
            fit.to_string(),
            summary.events_per_cluster[k].to_string(),
            users.join(";"),
            tags.join(";"),
        ])?;
    }
    let fit = c.labels.iter().zip(&c.fit).filter(|(l, &f)| f && l.is_none()).count();
    w.row([
        "outlier".to_string(),
        (summary.outliers + c.inactive_users).to_string(),
        fit.to_string(),
        summary.outlier_events.to_string(),
        String::new(),
        String::new(),
    ])?;
    w.finish()
}

/// `series/pair_<a>_<b>.csv` per pair and `series/toxicity_<c>.csv` per cluster.
pub fn series(dir: &Path, s: &SeriesOutcome, sigma: f64) -> Result<()> {
    for p in &s.pairs {
        let path = dir.join(format!("pair_{}_{}.csv", cluster_name(p.a), cluster_name(p.b)));
        let d_smooth = gaussian_smooth(&p.dissimilarity, sigma);
        let j_smooth = gaussian_smooth(&p.joint_toxicity, sigma);
        let mut w = Csv::create(&path)?;
        w.row(["date", "D_raw", "D_smooth", "T_joint_raw", "T_joint_smooth", "gap_flags"])?;
        for (t, &day) in s.days.iter().enumerate() {
            let mut gaps = String::new();
            if p.dissimilarity[t].is_none() {
                gaps.push('D');
            }
            if p.joint_toxicity[t].is_none() {
                gaps.push('T');
            }
            w.row([
                date(day),
                num(p.dissimilarity[t]),
                num(d_smooth[t]),
                num(p.joint_toxicity[t]),
                num(j_smooth[t]),
                gaps,
            ])?;
        }
        w.finish()?;
    }
    for (c, tox) in s.toxicity.iter().enumerate() {
        let path = dir.join(format!("toxicity_{}.csv", cluster_name(c)));
        let smooth = gaussian_smooth(tox, sigma);
        let mut w = Csv::create(&path)?;
        w.row(["date", "T_raw", "T_smooth", "active_users", "gap_flags"])?;
        for (t, &day) in s.days.iter().enumerate() {
            w.row([
                date(day),
                num(tox[t]),
                num(smooth[t]),
                s.active[c][t].to_string(),
                if tox[t].is_none() { "T".to_string() } else { String::new() },
            ])?;
        }
        w.finish()?;
    }
    Ok(())
}

/// `granger.csv` (best lag per direction, one row per pair) and
/// `granger_lags.csv` (every lag tested).
pub fn granger(dir: &Path, s: &StatsOutcome) -> Result<()> {
    let mut w = Csv::create(&dir.join("granger.csv"))?;
    w.row([
        "pair",
        "p_Tc1_Tc2",
        "lag_Tc1_Tc2",
        "p_Tc2_Tc1",
        "lag_Tc2_Tc1",
        "p_D_Tjoint",
        "lag_D_Tjoint",
        "p_Tjoint_D",
        "lag_Tjoint_D",
        "sig_Tc1_Tc2",
        "sig_Tc2_Tc1",
        "sig_D_Tjoint",
        "sig_Tjoint_D",
        "threshold",
    ])?;
    for quad in s.directions.chunks(4) {
        let mut row = vec![quad[0].pair_name()];
        for d in quad {
            let best = d.best();
            row.push(num(best.and_then(|b| b.p_value)));
            row.push(best.map_or_else(String::new, |b| b.lag.to_string()));
        }
        for d in quad {
            row.push(d.best().is_some_and(|b| b.significant).to_string());
        }
        row.push(num(s.threshold));
        w.row(row)?;
    }
    w.finish()?;

    let mut w = Csv::create(&dir.join("granger_lags.csv"))?;
    w.row([
        "pair",
        "direction",
        "lag",
        "f_stat",
        "p_value",
        "n_obs",
        "rss_restricted",
        "rss_unrestricted",
        "significant",
        "untestable",
    ])?;
    for d in &s.directions {
        for l in &d.lags {
            let f = match (l.f_stat, l.p_value) {
                (None, Some(_)) => "inf".to_string(),
                (f, _) => num(f),
            };
            w.row([
                d.pair_name(),
                d.name.clone(),
                l.lag.to_string(),
                f,
                num(l.p_value),
                l.n_obs.to_string(),
                num(l.rss_restricted),
                num(l.rss_unrestricted),
                l.significant.to_string(),
                l.untestable.clone().unwrap_or_default(),
            ])?;
        }
    }
    w.finish()
}

/// `mann_whitney.csv` and `log_odds.csv`.
pub fn comparisons(dir: &Path, s: &StatsOutcome) -> Result<()> {
    let mut w = Csv::create(&dir.join("mann_whitney.csv"))?;
    w.row(["more_toxic", "less_toxic", "mean_more", "mean_less", "n1", "n2", "u", "auc", "p_value", "method"])?;
    for m in &s.mann_whitney {
        w.row([
            cluster_name(m.more_toxic),
            cluster_name(m.less_toxic),
            num(s.mean_toxicity[m.more_toxic]),
            num(s.mean_toxicity[m.less_toxic]),
            m.n1.to_string(),
            m.n2.to_string(),
            float(m.u),
            float(m.auc),
            float(m.p_value),
            if m.exact { "exact" } else { "normal" }.to_string(),
        ])?;
    }
    w.finish()?;

    let mut w = Csv::create(&dir.join("log_odds.csv"))?;
    w.row(["cluster", "rank", "hashtag", "log_odds", "k_in", "n_in", "k_out", "n_out"])?;
    let mut rank = 0;
    let mut last = usize::MAX;
    for e in &s.log_odds {
        rank = if e.cluster == last { rank + 1 } else { 1 };
        last = e.cluster;
        w.row([
            cluster_name(e.cluster),
            rank.to_string(),
            e.hashtag.clone(),
            float(e.log_odds),
            e.k_in.to_string(),
            e.n_in.to_string(),
            e.k_out.to_string(),
            e.n_out.to_string(),
        ])?;
    }
    w.finish()
}
