//! Per-window cluster series: centroids, structural dissimilarity, toxicity
//! prevalence and joint toxicity, plus Gaussian smoothing for display.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::Matrix;
use crate::math::{ceil, exp, expm1, ln_1p, norm};

/// Mean sample-space position of a cluster's active members, per window.
#[derive(Clone, Debug, PartialEq)]
pub struct CentroidSeries {
    pub cluster: usize,
    /// `None` where no member was active.
    pub centroids: Vec<Option<Vec<f64>>>,
    pub active: Vec<u32>,
}

/// Builds centroids from the per-(user, window) projections. `labels` maps a
/// global user id to its cluster (`u32::MAX` for outliers or unknown users).
pub fn centroid_series(
    row_users: &[u32],
    row_windows: &[u32],
    projections: &Matrix,
    labels: &[u32],
    n_windows: usize,
    n_clusters: usize,
) -> Vec<CentroidSeries> {
    assert_eq!(row_users.len(), projections.rows());
    assert_eq!(row_windows.len(), projections.rows());
    let k = projections.cols();
    let mut sums = vec![0.0f64; n_clusters * n_windows * k];
    let mut counts = vec![0u32; n_clusters * n_windows];
    for (row, (&u, &w)) in row_users.iter().zip(row_windows).enumerate() {
        let c = labels.get(u as usize).copied().unwrap_or(u32::MAX);
        if c == u32::MAX {
            continue;
        }
        let cell = c as usize * n_windows + w as usize;
        counts[cell] += 1;
        for j in 0..k {
            sums[cell * k + j] += projections[(row, j)];
        }
    }
    (0..n_clusters)
        .map(|c| {
            let centroids = (0..n_windows)
                .map(|w| {
                    let cell = c * n_windows + w;
                    let n = counts[cell];
                    (n > 0).then(|| sums[cell * k..(cell + 1) * k].iter().map(|s| s / n as f64).collect())
                })
                .collect();
            CentroidSeries {
                cluster: c,
                centroids,
                active: counts[c * n_windows..(c + 1) * n_windows].to_vec(),
            }
        })
        .collect()
}

/// `-cos(µ1, µ2)`; `None` when either centroid has zero norm.
pub fn structural_dissimilarity(mu1: &[f64], mu2: &[f64]) -> Option<f64> {
    let (n1, n2) = (norm(mu1), norm(mu2));
    if n1 == 0.0 || n2 == 0.0 || !n1.is_finite() || !n2.is_finite() {
        return None;
    }
    let dot: f64 = mu1.iter().zip(mu2).map(|(a, b)| a * b).sum();
    Some((-dot / (n1 * n2)).clamp(-1.0, 1.0))
}

/// Probability of meeting toxicity when engaging at random with a cluster's
/// posts: `1 - Π (1 - F_i T_i)` over `(F_i, T_i)` pairs, evaluated in log
/// space. `None` for an empty list.
pub fn cluster_toxicity(posts: &[(f64, f64)]) -> Option<f64> {
    if posts.is_empty() {
        return None;
    }
    let mut log_keep = 0.0;
    for &(f, t) in posts {
        let x = f * t;
        if x >= 1.0 {
            return Some(1.0);
        }
        log_keep += ln_1p(-x);
    }
    Some((-expm1(log_keep)).clamp(0.0, 1.0))
}

/// `1 - (1 - T1)(1 - T2)`, written so the result is never below either input.
pub fn joint_toxicity(t1: f64, t2: f64) -> f64 {
    let (hi, lo) = if t1 >= t2 { (t1, t2) } else { (t2, t1) };
    (hi + lo * (1.0 - hi)).min(1.0)
}

/// One scored retweet: window position of the day it happened, acting user,
/// retweeted post.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScoredRetweet {
    pub day: i64,
    pub user: u32,
    pub post: u32,
}

/// Cluster toxicity per window. `retweets` must be sorted by day and
/// `windows` lists each window's `(first_day, last_day)`; `scores[post]` is
/// the post's toxicity if scored. Returns `[cluster][window]`.
pub fn toxicity_series(
    retweets: &[ScoredRetweet],
    scores: &[Option<f64>],
    labels: &[u32],
    windows: &[(i64, i64)],
    n_clusters: usize,
) -> Vec<Vec<Option<f64>>> {
    debug_assert!(retweets.windows(2).all(|w| w[0].day <= w[1].day));
    let mut out = vec![vec![None; windows.len()]; n_clusters];
    let mut keys: Vec<u64> = Vec::new();
    let mut totals = vec![0u64; n_clusters];
    let mut log_keep = vec![0.0f64; n_clusters];
    let mut saturated = vec![false; n_clusters];
    for (w, &(first, last)) in windows.iter().enumerate() {
        let lo = retweets.partition_point(|r| r.day < first);
        let hi = retweets.partition_point(|r| r.day <= last);
        keys.clear();
        for r in &retweets[lo..hi] {
            let c = labels.get(r.user as usize).copied().unwrap_or(u32::MAX);
            if c == u32::MAX || scores.get(r.post as usize).copied().flatten().is_none() {
                continue;
            }
            keys.push((u64::from(c) << 32) | u64::from(r.post));
        }
        keys.sort_unstable();
        totals.iter_mut().for_each(|t| *t = 0);
        for &key in &keys {
            totals[(key >> 32) as usize] += 1;
        }
        log_keep.iter_mut().for_each(|v| *v = 0.0);
        saturated.iter_mut().for_each(|v| *v = false);
        let mut i = 0;
        while i < keys.len() {
            let mut j = i + 1;
            while j < keys.len() && keys[j] == keys[i] {
                j += 1;
            }
            let c = (keys[i] >> 32) as usize;
            let post = (keys[i] & 0xffff_ffff) as usize;
            let f = (j - i) as f64 / totals[c] as f64;
            let x = f * scores[post].unwrap_or(0.0);
            if x >= 1.0 {
                saturated[c] = true;
            } else {
                log_keep[c] += ln_1p(-x);
            }
            i = j;
        }
        for c in 0..n_clusters {
            if totals[c] > 0 {
                out[c][w] = Some(if saturated[c] {
                    1.0
                } else {
                    (-expm1(log_keep[c])).clamp(0.0, 1.0)
                });
            }
        }
    }
    out
}

/// Series for one unordered cluster pair `a < b`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairSeries {
    pub a: usize,
    pub b: usize,
    pub dissimilarity: Vec<Option<f64>>,
    pub joint_toxicity: Vec<Option<f64>>,
}

/// All series on one day index. A `None` cell is a gap.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesTable {
    pub days: Vec<i64>,
    pub toxicity: Vec<Vec<Option<f64>>>,
    pub pairs: Vec<PairSeries>,
}

impl SeriesTable {
    pub fn n_clusters(&self) -> usize {
        self.toxicity.len()
    }

    pub fn pair(&self, a: usize, b: usize) -> Option<&PairSeries> {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        self.pairs.iter().find(|p| p.a == a && p.b == b)
    }
}

pub fn build_series_table(days: Vec<i64>, centroids: &[CentroidSeries], toxicity: Vec<Vec<Option<f64>>>) -> SeriesTable {
    let n = days.len();
    let k = centroids.len();
    assert_eq!(toxicity.len(), k, "one toxicity series per cluster");
    let mut pairs = Vec::with_capacity(k * k.saturating_sub(1) / 2);
    for a in 0..k {
        for b in (a + 1)..k {
            let dissimilarity = (0..n)
                .map(|w| match (&centroids[a].centroids[w], &centroids[b].centroids[w]) {
                    (Some(x), Some(y)) => structural_dissimilarity(x, y),
                    _ => None,
                })
                .collect();
            let joint = (0..n)
                .map(|w| Some(joint_toxicity(toxicity[a][w]?, toxicity[b][w]?)))
                .collect();
            pairs.push(PairSeries {
                a,
                b,
                dissimilarity,
                joint_toxicity: joint,
            });
        }
    }
    SeriesTable { days, toxicity, pairs }
}

/// Gaussian smoothing truncated at `±ceil(3σ)`, with weights renormalised
/// over the non-gap days in reach. Gap days stay gaps.
pub fn gaussian_smooth(series: &[Option<f64>], sigma: f64) -> Vec<Option<f64>> {
    assert!(sigma > 0.0, "sigma must be positive");
    let radius = ceil(3.0 * sigma) as isize;
    let weights: Vec<f64> = (-radius..=radius)
        .map(|d| exp(-((d * d) as f64) / (2.0 * sigma * sigma)))
        .collect();
    let n = series.len() as isize;
    (0..n)
        .map(|t| {
            series[t as usize]?;
            let (mut acc, mut wsum) = (0.0, 0.0);
            for d in -radius..=radius {
                let s = t + d;
                if s < 0 || s >= n {
                    continue;
                }
                if let Some(v) = series[s as usize] {
                    let w = weights[(d + radius) as usize];
                    acc += w * v;
                    wsum += w;
                }
            }
            Some(acc / wsum)
        })
        .collect()
}

/// Central weight of the normalised truncated kernel.
pub fn kernel_center_weight(sigma: f64) -> f64 {
    let radius = ceil(3.0 * sigma) as i64;
    let total: f64 = (-radius..=radius)
        .map(|d| exp(-((d * d) as f64) / (2.0 * sigma * sigma)))
        .sum();
    1.0 / total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dissimilarity_extremes() {
        assert!((structural_dissimilarity(&[1.0, 2.0], &[1.0, 2.0]).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(structural_dissimilarity(&[1.0, 0.0], &[0.0, 3.0]), Some(0.0));
        assert!((structural_dissimilarity(&[1.0, -2.0], &[-1.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(structural_dissimilarity(&[0.0, 0.0], &[1.0, 0.0]), None);
        let (a, b) = ([0.3, -1.2, 2.0], [1.1, 0.4, -0.7]);
        assert_eq!(structural_dissimilarity(&a, &b), structural_dissimilarity(&b, &a));
    }

    #[test]
    fn toxicity_examples() {
        assert!((cluster_toxicity(&[(1.0, 0.4)]).unwrap() - 0.4).abs() < 1e-15);
        assert!((cluster_toxicity(&[(0.5, 0.5), (0.5, 0.5)]).unwrap() - 0.4375).abs() < 1e-15);
        assert_eq!(cluster_toxicity(&[(0.3, 0.0), (0.7, 0.0)]), Some(0.0));
        assert_eq!(cluster_toxicity(&[]), None);
        assert_eq!(cluster_toxicity(&[(1.0, 1.0), (0.0, 0.2)]), Some(1.0));
    }

    #[test]
    fn joint_examples() {
        assert_eq!(joint_toxicity(0.0, 0.37), 0.37);
        assert_eq!(joint_toxicity(0.5, 0.5), 0.75);
        assert_eq!(joint_toxicity(1.0, 0.2), 1.0);
    }

    #[test]
    fn centroid_basics() {
        // users 0,1 in cluster 0; user 2 in cluster 1; user 3 outlier
        let labels = [0, 0, 1, u32::MAX];
        let users = [0, 1, 2, 3, 0];
        let windows = [0, 0, 0, 0, 1];
        let proj = Matrix::from_row_major(5, 2, &[1.0, 2.0, -1.0, -2.0, 3.0, 0.0, 9.0, 9.0, 0.5, 0.5]);
        let cs = centroid_series(&users, &windows, &proj, &labels, 3, 2);
        assert_eq!(cs[0].centroids[0], Some(vec![0.0, 0.0]));
        assert_eq!(cs[0].centroids[1], Some(vec![0.5, 0.5]));
        assert_eq!(cs[0].centroids[2], None);
        assert_eq!(cs[1].active, vec![1, 0, 0]);
        let table = build_series_table(vec![10, 11, 12], &cs, vec![vec![Some(0.1); 3], vec![Some(0.2), None, Some(0.0)]]);
        let p = table.pair(1, 0).unwrap();
        assert_eq!(p.dissimilarity, vec![None, None, None]);
        assert_eq!(p.joint_toxicity[1], None);
    }

    #[test]
    fn toxicity_series_shares() {
        // cluster 0: users 0,1; post 0 (T=.4) retweeted twice, post 1 (T=.8) once, post 2 unscored
        let rts = [
            ScoredRetweet { day: 0, user: 0, post: 0 },
            ScoredRetweet { day: 0, user: 1, post: 0 },
            ScoredRetweet { day: 1, user: 1, post: 1 },
            ScoredRetweet { day: 1, user: 0, post: 2 },
            ScoredRetweet { day: 2, user: 2, post: 1 },
        ];
        let scores = [Some(0.4), Some(0.8), None];
        let out = toxicity_series(&rts, &scores, &[0, 0, 1], &[(0, 1), (2, 2)], 2);
        let expect = 1.0 - (1.0 - 2.0 / 3.0 * 0.4) * (1.0 - 1.0 / 3.0 * 0.8);
        assert!((out[0][0].unwrap() - expect).abs() < 1e-15);
        assert_eq!(out[0][1], None);
        assert_eq!(out[1][0], None);
        assert!((out[1][1].unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn smoothing_rules() {
        let flat = vec![Some(0.3); 20];
        assert!(gaussian_smooth(&flat, 3.0).iter().all(|v| (v.unwrap() - 0.3).abs() < 1e-15));
        let mut impulse = vec![Some(0.0); 41];
        impulse[20] = Some(1.0);
        let s = gaussian_smooth(&impulse, 3.0);
        assert!((s[20].unwrap() - kernel_center_weight(3.0)).abs() < 1e-15);
        let mut gappy = flat.clone();
        gappy[5] = None;
        let g = gaussian_smooth(&gappy, 3.0);
        assert_eq!(g[5], None);
        assert!((g[6].unwrap() - 0.3).abs() < 1e-15);
    }
}
