//! Cluster, series and stats stages over the embedding, with serialisable
//! results that double as cache payloads.

mod cluster;
mod series;
mod stats;

pub use cluster::{run_cluster, ClusterOutcome};
pub use series::{run_series, scored_retweets, PairOutcome, SeriesOutcome};
pub use stats::{direction_names, run_stats, DirectionOutcome, LagOutcome, LogOddsOutcome, MannWhitneyOutcome, StatsOptions, StatsOutcome};

/// Display name of cluster `c` (zero-based).
pub fn cluster_name(c: usize) -> String {
    format!("C{}", c + 1)
}
