use serde::{Deserialize, Serialize};

use polarscope_core::clustering::{fit_clusters, predict_clusters, ClusterAssignment, ClusterParams, Provenance};
use polarscope_core::spectral::UserVectors;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterOutcome {
    pub tau: f64,
    pub min_cluster_size: usize,
    pub min_samples: usize,
    pub fit_users: usize,
    pub sizes: Vec<usize>,
    pub outliers: usize,
    /// Users of the index absent from every window.
    pub inactive_users: usize,
    pub admission_radius: Vec<f64>,
    pub stabilities: Vec<f64>,
    pub users: Vec<u32>,
    pub labels: Vec<Option<u32>>,
    pub fit: Vec<bool>,
}

impl ClusterOutcome {
    pub fn n_clusters(&self) -> usize {
        self.sizes.len()
    }

    pub fn assignment(&self) -> ClusterAssignment {
        ClusterAssignment {
            users: self.users.clone(),
            labels: self.labels.clone(),
            provenance: self
                .fit
                .iter()
                .map(|&f| if f { Provenance::Fit } else { Provenance::Predicted })
                .collect(),
            sizes: self.sizes.clone(),
            outliers: self.outliers,
        }
    }
}

/// Fits on high-norm users and predicts the rest. `min_cluster_size`
/// defaults to `max(50, 0.5% of users with a vector)`.
pub fn run_cluster(vectors: &UserVectors, tau: f64, min_cluster_size: Option<usize>, min_samples: usize) -> Result<ClusterOutcome> {
    let mut params = ClusterParams::default_for(vectors.len());
    params.tau = tau;
    params.min_samples = min_samples;
    if let Some(m) = min_cluster_size {
        params.min_cluster_size = m;
    }
    let model = fit_clusters(vectors, params).map_err(|e| Error::numeric("cluster", e))?;
    let a = predict_clusters(&model, vectors);
    Ok(ClusterOutcome {
        tau,
        min_cluster_size: params.min_cluster_size,
        min_samples,
        fit_users: model.fit_users.len(),
        sizes: a.sizes,
        outliers: a.outliers,
        inactive_users: vectors.excluded,
        admission_radius: model.admission_radius,
        stabilities: model.stabilities,
        users: a.users,
        labels: a.labels,
        fit: a.provenance.iter().map(|&p| p == Provenance::Fit).collect(),
    })
}
