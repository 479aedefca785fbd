use serde::{Deserialize, Serialize};

use polarscope_core::dynamics::{build_series_table, centroid_series, toxicity_series, ScoredRetweet};
use polarscope_core::window::day_index;

use crate::embed::Embedding;
use crate::ingest::{EventStore, ScoredPosts};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub a: usize,
    pub b: usize,
    pub dissimilarity: Vec<Option<f64>>,
    pub joint_toxicity: Vec<Option<f64>>,
}

/// Per-day series on the window anchors; `None` marks a gap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesOutcome {
    pub days: Vec<i64>,
    /// `[cluster][day]`
    pub toxicity: Vec<Vec<Option<f64>>>,
    /// Active members per cluster and day.
    pub active: Vec<Vec<u32>>,
    pub pairs: Vec<PairOutcome>,
}

impl SeriesOutcome {
    pub fn n_clusters(&self) -> usize {
        self.toxicity.len()
    }

    pub fn pair(&self, a: usize, b: usize) -> Option<&PairOutcome> {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        self.pairs.iter().find(|p| p.a == a && p.b == b)
    }
}

/// Retweets of scored posts, in time order.
pub fn scored_retweets(store: &EventStore, scored: &ScoredPosts) -> Vec<ScoredRetweet> {
    (0..store.len())
        .filter(|&e| scored.scores[store.posts[e] as usize].is_some())
        .map(|e| ScoredRetweet {
            day: day_index(store.timestamps[e]),
            user: store.retweeters[e],
            post: store.posts[e],
        })
        .collect()
}

/// `labels` is the dense per-user cluster lookup (`u32::MAX` for outliers).
pub fn run_series(
    store: &EventStore,
    embedding: &Embedding,
    labels: &[u32],
    n_clusters: usize,
    scored: &ScoredPosts,
) -> SeriesOutcome {
    let n_windows = embedding.windows.len();
    let centroids = centroid_series(
        &embedding.row_users,
        &embedding.row_windows,
        &embedding.projections,
        labels,
        n_windows,
        n_clusters,
    );
    let retweets = scored_retweets(store, scored);
    let toxicity = toxicity_series(&retweets, &scored.scores, labels, &embedding.window_bounds(), n_clusters);
    let days = embedding.windows.iter().map(|w| w.anchor).collect();
    let active = centroids.iter().map(|c| c.active.clone()).collect();
    let table = build_series_table(days, &centroids, toxicity);
    SeriesOutcome {
        days: table.days,
        toxicity: table.toxicity,
        active,
        pairs: table
            .pairs
            .into_iter()
            .map(|p| PairOutcome {
                a: p.a,
                b: p.b,
                dissimilarity: p.dissimilarity,
                joint_toxicity: p.joint_toxicity,
            })
            .collect(),
    }
}
