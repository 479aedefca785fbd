//! Density clustering of user vectors. The model is fit on high-activity
//! users only and then predicts labels for everybody else.

mod hdbscan;
mod metrics;
mod model;
mod summary;

pub use hdbscan::{core_distances, euclidean, hdbscan, CondensedEdge, HdbscanOutput, Points};
pub use metrics::adjusted_rand_index;
pub use model::{
    fit_clusters, predict_clusters, ClusterAssignment, ClusterModel, ClusterParams, Provenance,
};
pub use summary::{cluster_summary, ClusterSummary, HashtagCounts};
