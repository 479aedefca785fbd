use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use super::hdbscan::{euclidean, hdbscan, CondensedEdge, Points};
use crate::spectral::UserVectors;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusterParams {
    /// Raw-norm threshold for the fit subset.
    pub tau: f64,
    pub min_cluster_size: usize,
    pub min_samples: usize,
}

impl ClusterParams {
    /// Defaults scaled to the number of labeled users:
    /// `min_cluster_size = max(50, 0.5% of users)`, `min_samples = 10`, `tau = 10`.
    pub fn default_for(n_users: usize) -> Self {
        Self {
            tau: 10.0,
            min_cluster_size: 50.max(n_users.div_ceil(200)),
            min_samples: 10,
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.tau.is_finite() || self.tau < 0.0 {
            return Err(Error::InvalidParameter {
                name: "tau",
                reason: "must be a finite non-negative number".to_string(),
            });
        }
        if self.min_cluster_size < 2 {
            return Err(Error::InvalidParameter {
                name: "min_cluster_size",
                reason: "must be at least 2".to_string(),
            });
        }
        if self.min_samples < 1 {
            return Err(Error::InvalidParameter {
                name: "min_samples",
                reason: "must be at least 1".to_string(),
            });
        }
        Ok(())
    }
}

/// A fitted density clustering.
#[derive(Clone, Debug)]
pub struct ClusterModel {
    pub params: ClusterParams,
    pub dim: usize,
    pub n_clusters: usize,
    /// Global ids of the fit subset, ascending.
    pub fit_users: Vec<u32>,
    pub fit_labels: Vec<Option<u32>>,
    pub core_distances: Vec<f64>,
    pub condensed: Vec<CondensedEdge>,
    pub stabilities: Vec<f64>,
    /// Row-major exemplar coordinates and their cluster.
    exemplars: Vec<f64>,
    exemplar_labels: Vec<u32>,
    /// Largest core distance among each cluster's members.
    pub admission_radius: Vec<f64>,
}

impl ClusterModel {
    pub fn exemplar_count(&self) -> usize {
        self.exemplar_labels.len()
    }

    pub fn exemplar(&self, i: usize) -> (&[f64], u32) {
        (&self.exemplars[i * self.dim..(i + 1) * self.dim], self.exemplar_labels[i])
    }

    /// Label for a point outside the fit subset: the cluster of the nearest
    /// exemplar when within that cluster's admission radius.
    pub fn predict_point(&self, normalized: &[f64]) -> Option<u32> {
        if normalized.iter().all(|&v| v == 0.0) {
            return None;
        }
        let mut best = (f64::INFINITY, 0u32);
        for i in 0..self.exemplar_count() {
            let (x, label) = self.exemplar(i);
            let d = euclidean(x, normalized);
            if d < best.0 {
                best = (d, label);
            }
        }
        (best.0 <= self.admission_radius[best.1 as usize]).then_some(best.1)
    }

    fn fit_label(&self, user: u32) -> Option<Option<u32>> {
        self.fit_users.binary_search(&user).ok().map(|i| self.fit_labels[i])
    }
}

fn row_major(vectors: &UserVectors, rows: &[usize]) -> Vec<f64> {
    let k = vectors.normalized.cols();
    let mut out = Vec::with_capacity(rows.len() * k);
    for &r in rows {
        out.extend((0..k).map(|j| vectors.normalized[(r, j)]));
    }
    out
}

/// Fits the clustering on users whose raw norm exceeds `params.tau`.
pub fn fit_clusters(vectors: &UserVectors, params: ClusterParams) -> Result<ClusterModel> {
    params.validate()?;
    let eligible: Vec<usize> = (0..vectors.len()).filter(|&i| vectors.raw_norms[i] > params.tau).collect();
    if eligible.len() < params.min_cluster_size {
        return Err(Error::TooFewEligible {
            eligible: eligible.len(),
            required: params.min_cluster_size,
        });
    }
    let dim = vectors.normalized.cols();
    let data = row_major(vectors, &eligible);
    let out = hdbscan(Points { data: &data, dim }, params.min_cluster_size, params.min_samples);
    if out.n_clusters == 0 {
        return Err(Error::NoClusters);
    }
    let mut admission_radius = vec![0.0f64; out.n_clusters];
    let mut exemplars = Vec::new();
    let mut exemplar_labels = Vec::new();
    for (p, label) in out.labels.iter().enumerate() {
        if let Some(c) = *label {
            let r = &mut admission_radius[c as usize];
            *r = r.max(out.core_distances[p]);
            exemplars.extend_from_slice(&data[p * dim..(p + 1) * dim]);
            exemplar_labels.push(c);
        }
    }
    Ok(ClusterModel {
        params,
        dim,
        n_clusters: out.n_clusters,
        fit_users: eligible.iter().map(|&i| vectors.users[i]).collect(),
        fit_labels: out.labels,
        core_distances: out.core_distances,
        condensed: out.condensed,
        stabilities: out.stabilities,
        exemplars,
        exemplar_labels,
        admission_radius,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Fit,
    Predicted,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Fit => "fit",
            Provenance::Predicted => "predicted",
        }
    }
}

/// Labels for every user of a vector table.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterAssignment {
    /// Global user ids, ascending.
    pub users: Vec<u32>,
    pub labels: Vec<Option<u32>>,
    pub provenance: Vec<Provenance>,
    pub sizes: Vec<usize>,
    pub outliers: usize,
}

impl ClusterAssignment {
    pub fn n_clusters(&self) -> usize {
        self.sizes.len()
    }

    /// `None` when the user is unknown; `Some(None)` for an outlier.
    pub fn label_of(&self, user: u32) -> Option<Option<u32>> {
        self.users.binary_search(&user).ok().map(|i| self.labels[i])
    }

    /// Dense per-user lookup (`u32::MAX` marks outlier or unknown).
    pub fn dense_labels(&self, n_users: usize) -> Vec<u32> {
        let mut out = vec![u32::MAX; n_users];
        for (&u, l) in self.users.iter().zip(&self.labels) {
            if let (Some(slot), Some(c)) = (out.get_mut(u as usize), l) {
                *slot = *c;
            }
        }
        out
    }
}

/// Labels every user in `vectors`: fit users keep their fitted label,
/// the rest are predicted.
pub fn predict_clusters(model: &ClusterModel, vectors: &UserVectors) -> ClusterAssignment {
    let k = vectors.normalized.cols();
    let mut labels = Vec::with_capacity(vectors.len());
    let mut provenance = Vec::with_capacity(vectors.len());
    let mut row = vec![0.0; k];
    for (i, &user) in vectors.users.iter().enumerate() {
        match model.fit_label(user) {
            Some(label) => {
                labels.push(label);
                provenance.push(Provenance::Fit);
            }
            None => {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = vectors.normalized[(i, j)];
                }
                labels.push(if k == model.dim { model.predict_point(&row) } else { None });
                provenance.push(Provenance::Predicted);
            }
        }
    }
    let mut sizes = vec![0usize; model.n_clusters];
    let mut outliers = 0;
    for l in &labels {
        match l {
            Some(c) => sizes[*c as usize] += 1,
            None => outliers += 1,
        }
    }
    ClusterAssignment {
        users: vectors.users.clone(),
        labels,
        provenance,
        sizes,
        outliers,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::spectral::{user_vectors, Aggregation};

    /// Two tight groups on the unit circle scaled to norm 20, plus extras.
    fn table(extra: &[[f64; 2]]) -> UserVectors {
        let mut rows = Vec::new();
        for i in 0..40 {
            let t = 0.002 * i as f64;
            rows.push([20.0 * libm::cos(t), 20.0 * libm::sin(t)]);
            rows.push([20.0 * libm::cos(1.5 + t), 20.0 * libm::sin(1.5 + t)]);
        }
        rows.extend_from_slice(extra);
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let proj = Matrix::from_row_major(rows.len(), 2, &flat);
        let ids: Vec<u32> = (0..rows.len() as u32).collect();
        user_vectors(&ids, &proj, rows.len(), Aggregation::Sum)
    }

    fn params() -> ClusterParams {
        ClusterParams {
            tau: 10.0,
            min_cluster_size: 10,
            min_samples: 5,
        }
    }

    #[test]
    fn default_params_scale_with_users() {
        assert_eq!(ClusterParams::default_for(1000).min_cluster_size, 50);
        assert_eq!(ClusterParams::default_for(82_358).min_cluster_size, 412);
    }

    #[test]
    fn fit_then_predict() {
        let v = table(&[[0.5, 0.0], [0.0, 0.0], [0.0, -3.0]]);
        let model = fit_clusters(&v, params()).unwrap();
        assert_eq!(model.n_clusters, 2);
        assert_eq!(model.fit_users.len(), 80);
        let a = predict_clusters(&model, &v);
        assert_eq!(a.provenance[80], Provenance::Predicted);
        // low-activity user pointing along the first group
        assert_eq!(a.labels[80], a.labels[0]);
        // zero vector
        assert_eq!(a.labels[81], None);
        // direction far from both groups
        assert_eq!(a.labels[82], None);
        assert_eq!(a.sizes.iter().sum::<usize>() + a.outliers, v.len());
    }

    #[test]
    fn fit_users_pass_through() {
        let v = table(&[]);
        let model = fit_clusters(&v, params()).unwrap();
        let a = predict_clusters(&model, &v);
        for (i, &u) in model.fit_users.iter().enumerate() {
            assert_eq!(a.label_of(u), Some(model.fit_labels[i]));
            assert_eq!(a.provenance[i], Provenance::Fit);
        }
    }

    #[test]
    fn exemplar_coincident_point() {
        let v = table(&[]);
        let model = fit_clusters(&v, params()).unwrap();
        let (x, label) = model.exemplar(3);
        let x = x.to_vec();
        assert_eq!(model.predict_point(&x), Some(label));
    }

    #[test]
    fn too_few_eligible() {
        let v = table(&[]);
        let p = ClusterParams { tau: 25.0, ..params() };
        assert_eq!(
            fit_clusters(&v, p).unwrap_err(),
            Error::TooFewEligible { eligible: 0, required: 10 }
        );
    }
}
