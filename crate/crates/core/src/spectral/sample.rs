//! Second stage: stacking window scores into the sample matrix, its PCA and
//! per-user aggregation.

use alloc::vec;
use alloc::vec::Vec;

use super::window::WindowDecomposition;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::math::sqrt;

/// Rotation applied to each window's scores before stacking.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Alignment {
    /// Stack scores as computed.
    None,
    /// Orthogonal Procrustes onto the previous aligned window over shared users.
    #[default]
    Procrustes,
}

/// Per-column scaling of the stacked scores.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ColumnScaling {
    /// Center and divide each column by its own standard deviation.
    ZScore,
    /// Center each column, divide all columns by one pooled standard deviation.
    #[default]
    Pooled,
}

/// Columns with a standard deviation below this are zeroed, not divided.
pub const SD_GUARD: f64 = 1e-12;

/// Rotations that map every window into a common frame.
///
/// Window `w` is aligned to the most recent earlier window through the users
/// they share; the first window (and any window sharing fewer than two users
/// with its predecessor) keeps the identity. The returned flags mark those
/// identity fallbacks after the first window.
pub fn align_windows(decomps: &[WindowDecomposition], mode: Alignment) -> (Vec<Matrix>, Vec<bool>) {
    let mut rotations = Vec::with_capacity(decomps.len());
    let mut unaligned = vec![false; decomps.len()];
    for (w, d) in decomps.iter().enumerate() {
        let k = d.scores.cols();
        if mode == Alignment::None || w == 0 {
            rotations.push(Matrix::identity(k));
            continue;
        }
        let prev = &decomps[w - 1];
        let (mine, theirs) = shared_rows(&d.users, &prev.users);
        if mine.len() < 2 || prev.scores.cols() != k {
            unaligned[w] = true;
            rotations.push(Matrix::identity(k));
            continue;
        }
        let x = d.scores.select_rows(&mine);
        let y = prev.scores.select_rows(&theirs).matmul(&rotations[w - 1]);
        rotations.push(linalg::procrustes(&x, &y));
    }
    (rotations, unaligned)
}

/// Row positions of the users present in both sorted id lists.
fn shared_rows(a: &[u32], b: &[u32]) -> (Vec<usize>, Vec<usize>) {
    let (mut i, mut j) = (0, 0);
    let (mut ia, mut jb) = (Vec::new(), Vec::new());
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                ia.push(i);
                jb.push(j);
                i += 1;
                j += 1;
            }
        }
    }
    (ia, jb)
}

/// Stacked, scaled window scores: one row per user-window instance.
#[derive(Clone, Debug)]
pub struct SampleMatrix {
    pub data: Matrix,
    /// Global user id of each row.
    pub row_users: Vec<u32>,
    /// Window position (into the decomposition list) of each row.
    pub row_windows: Vec<u32>,
    /// Row ranges per window: window `w` spans `offsets[w]..offsets[w + 1]`.
    pub offsets: Vec<usize>,
    pub column_means: Vec<f64>,
    /// Per-column divisor that was applied (0 for zeroed columns).
    pub column_scales: Vec<f64>,
    pub constant_columns: Vec<usize>,
    pub scaling: ColumnScaling,
}

impl SampleMatrix {
    pub fn n_rows(&self) -> usize {
        self.data.rows()
    }
}

/// Concatenates (optionally rotated) window scores and scales the columns.
pub fn assemble_sample_matrix(
    decomps: &[WindowDecomposition],
    rotations: Option<&[Matrix]>,
    scaling: ColumnScaling,
) -> Result<SampleMatrix> {
    if decomps.is_empty() {
        return Err(Error::NoValidWindows);
    }
    let k = decomps[0].scores.cols();
    if let Some(d) = decomps.iter().find(|d| d.scores.cols() != k) {
        return Err(Error::DimensionMismatch(alloc::format!(
            "window {} has {} score columns, expected {k}",
            d.anchor,
            d.scores.cols()
        )));
    }
    let total: usize = decomps.iter().map(|d| d.scores.rows()).sum();
    let mut data = Matrix::zeros(total, k);
    let mut row_users = Vec::with_capacity(total);
    let mut row_windows = Vec::with_capacity(total);
    let mut offsets = Vec::with_capacity(decomps.len() + 1);
    let mut at = 0usize;
    for (w, d) in decomps.iter().enumerate() {
        offsets.push(at);
        let block = match rotations {
            Some(r) => d.scores.matmul(&r[w]),
            None => d.scores.clone(),
        };
        let rows = block.rows();
        for j in 0..k {
            data.col_mut(j)[at..at + rows].copy_from_slice(block.col(j));
        }
        row_users.extend_from_slice(&d.users);
        row_windows.extend(core::iter::repeat_n(w as u32, rows));
        at += rows;
    }
    offsets.push(at);

    let n = total as f64;
    let mut column_means = vec![0.0; k];
    let mut sds = vec![0.0; k];
    for j in 0..k {
        let col = data.col(j);
        let mean = col.iter().sum::<f64>() / n;
        let var = if total > 1 {
            col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        column_means[j] = mean;
        sds[j] = sqrt(var);
    }
    let constant_columns: Vec<usize> = (0..k).filter(|&j| sds[j] < SD_GUARD).collect();
    let pooled = {
        let live: Vec<f64> = (0..k).filter(|&j| sds[j] >= SD_GUARD).map(|j| sds[j] * sds[j]).collect();
        if live.is_empty() {
            0.0
        } else {
            sqrt(live.iter().sum::<f64>() / live.len() as f64)
        }
    };
    let column_scales: Vec<f64> = (0..k)
        .map(|j| {
            if sds[j] < SD_GUARD {
                0.0
            } else {
                match scaling {
                    ColumnScaling::ZScore => sds[j],
                    ColumnScaling::Pooled => pooled,
                }
            }
        })
        .collect();
    for j in 0..k {
        let mean = column_means[j];
        let scale = column_scales[j];
        for x in data.col_mut(j) {
            *x = if scale == 0.0 { 0.0 } else { (*x - mean) / scale };
        }
    }
    Ok(SampleMatrix {
        data,
        row_users,
        row_windows,
        offsets,
        column_means,
        column_scales,
        constant_columns,
        scaling,
    })
}

/// Second-stage principal axes and the per-instance projections.
#[derive(Clone, Debug)]
pub struct SampleSpace {
    /// `k_window x k_sample` rotation, orthonormal columns.
    pub rotation: Matrix,
    /// All singular values of the scaled sample matrix (scree data).
    pub scree: Vec<f64>,
    /// Fraction of total variance per retained component.
    pub explained: Vec<f64>,
    /// `rows x k_sample` projections of every user-window instance.
    pub projections: Matrix,
    pub k_requested: usize,
    /// True when `k_sample` had to be reduced to the available rank.
    pub reduced: bool,
}

impl SampleSpace {
    pub fn k_sample(&self) -> usize {
        self.rotation.cols()
    }

    /// Projects arbitrary rows expressed in scaled sample coordinates.
    pub fn project(&self, rows: &Matrix) -> Matrix {
        rows.matmul(&self.rotation)
    }
}

/// PCA of the sample matrix through the eigendecomposition of `SᵀS`.
pub fn sample_pca(s: &SampleMatrix, k_sample: usize) -> Result<SampleSpace> {
    let k_window = s.data.cols();
    if k_sample == 0 || k_sample > k_window {
        return Err(Error::InvalidParameter {
            name: "k_sample",
            reason: alloc::format!("must be in 1..={k_window}, got {k_sample}"),
        });
    }
    let gram = s.data.tr_matmul(&s.data);
    let (eig, vecs) = linalg::symmetric_eigen(&gram);
    let top = eig.first().copied().unwrap_or(0.0).max(0.0);
    let rank = eig.iter().filter(|&&e| e > 1e-12 * top && e > 0.0).count();
    let k = k_sample.min(rank.max(1));
    let mut rotation = vecs.truncate_cols(k);
    let signs = linalg::canonical_signs(&rotation);
    linalg::scale_columns(&mut rotation, &signs);
    let total: f64 = eig.iter().map(|e| e.max(0.0)).sum();
    let explained = eig[..k]
        .iter()
        .map(|e| if total > 0.0 { e.max(0.0) / total } else { 0.0 })
        .collect();
    let scree = eig.iter().map(|e| sqrt(e.max(0.0))).collect();
    let projections = s.data.matmul(&rotation);
    Ok(SampleSpace {
        rotation,
        scree,
        explained,
        projections,
        k_requested: k_sample,
        reduced: k < k_sample,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Aggregation {
    #[default]
    Sum,
    Mean,
}

/// Per-user coordinates in sample space.
#[derive(Clone, Debug)]
pub struct UserVectors {
    /// Global user id per row, ascending.
    pub users: Vec<u32>,
    pub raw: Matrix,
    pub raw_norms: Vec<f64>,
    /// L2-normalised rows; zero rows stay zero.
    pub normalized: Matrix,
    pub windows_active: Vec<u32>,
    /// Users of the index that never appear in any window.
    pub excluded: usize,
    pub aggregation: Aggregation,
}

impl UserVectors {
    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn position(&self, user: u32) -> Option<usize> {
        self.users.binary_search(&user).ok()
    }
}

/// Aggregates each user's instance projections (sum or mean) and normalises.
/// `n_users` is the size of the user index, used to count excluded users.
pub fn user_vectors(
    row_users: &[u32],
    projections: &Matrix,
    n_users: usize,
    aggregation: Aggregation,
) -> UserVectors {
    assert_eq!(row_users.len(), projections.rows());
    let k = projections.cols();
    let mut users: Vec<u32> = row_users.to_vec();
    users.sort_unstable();
    users.dedup();
    let mut raw = Matrix::zeros(users.len(), k);
    let mut counts = vec![0u32; users.len()];
    for (row, &u) in row_users.iter().enumerate() {
        let pos = users.binary_search(&u).expect("user collected above");
        counts[pos] += 1;
        for j in 0..k {
            raw[(pos, j)] += projections[(row, j)];
        }
    }
    if aggregation == Aggregation::Mean {
        for (pos, &c) in counts.iter().enumerate() {
            for j in 0..k {
                raw[(pos, j)] /= c as f64;
            }
        }
    }
    let raw_norms: Vec<f64> = (0..users.len())
        .map(|i| sqrt((0..k).map(|j| raw[(i, j)] * raw[(i, j)]).sum()))
        .collect();
    let normalized = Matrix::from_fn(users.len(), k, |i, j| {
        if raw_norms[i] > 0.0 {
            raw[(i, j)] / raw_norms[i]
        } else {
            0.0
        }
    });
    UserVectors {
        excluded: n_users.saturating_sub(users.len()),
        users,
        raw,
        raw_norms,
        normalized,
        windows_active: counts,
        aggregation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decomp(anchor: i64, users: Vec<u32>, scores: Matrix) -> WindowDecomposition {
        let k = scores.cols();
        WindowDecomposition {
            anchor,
            users,
            rotation: Matrix::zeros(1, k),
            singular_values: vec![0.0; k],
            scores,
            effective_rank: k,
            total_variance: 0.0,
            iterations: 0,
        }
    }

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
    }

    #[test]
    fn row_count_is_sum_of_window_rows() {
        let mut s = 1;
        let ds: Vec<_> = [10usize, 12, 8]
            .iter()
            .enumerate()
            .map(|(w, &n)| decomp(w as i64, (0..n as u32).collect(), Matrix::from_fn(n, 30, |_, _| lcg(&mut s))))
            .collect();
        let sm = assemble_sample_matrix(&ds, None, ColumnScaling::ZScore).unwrap();
        assert_eq!((sm.data.rows(), sm.data.cols()), (30, 30));
        assert_eq!(sm.offsets, vec![0, 10, 22, 30]);
    }

    #[test]
    fn zscore_contract_and_constant_guard() {
        let mut s = 5;
        let mut scores = Matrix::from_fn(40, 5, |_, _| 3.0 * lcg(&mut s) + 1.0);
        for x in scores.col_mut(3) {
            *x = 7.0;
        }
        let sm = assemble_sample_matrix(&[decomp(0, (0..40).collect(), scores)], None, ColumnScaling::ZScore)
            .unwrap();
        assert_eq!(sm.constant_columns, vec![3]);
        for j in 0..5 {
            let col = sm.data.col(j);
            let mean = col.iter().sum::<f64>() / 40.0;
            let sd = sqrt(col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 39.0);
            assert!(mean.abs() <= 1e-8);
            if j == 3 {
                assert_eq!(sd, 0.0);
            } else {
                assert!((sd - 1.0).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn pooled_scaling_keeps_variance_ratios() {
        let mut s = 9;
        let scores = Matrix::from_fn(50, 3, |_, j| (j as f64 + 1.0) * lcg(&mut s));
        let sm = assemble_sample_matrix(&[decomp(0, (0..50).collect(), scores.clone())], None, ColumnScaling::Pooled)
            .unwrap();
        let ratio_in = sm.column_scales[0];
        assert!(sm.column_scales.iter().all(|&c| c == ratio_in));
    }

    #[test]
    fn rank_one_sample_has_one_component() {
        let mut s = 2;
        let dir = [0.5, -1.0, 2.0, 0.25];
        let scores = Matrix::from_fn(60, 4, {
            let t: Vec<f64> = (0..60).map(|_| lcg(&mut s)).collect();
            move |i, j| t[i] * dir[j]
        });
        let sm = assemble_sample_matrix(&[decomp(0, (0..60).collect(), scores)], None, ColumnScaling::ZScore)
            .unwrap();
        let space = sample_pca(&sm, 2).unwrap();
        assert!(space.reduced);
        assert_eq!(space.k_sample(), 1);
        assert!(space.explained[0] >= 0.999);
    }

    #[test]
    fn projection_is_linear_in_the_rows() {
        let mut s = 3;
        let x = Matrix::from_fn(20, 6, |_, _| lcg(&mut s));
        let sm = assemble_sample_matrix(&[decomp(0, (0..20).collect(), x.clone())], None, ColumnScaling::ZScore)
            .unwrap();
        let space = sample_pca(&sm, 3).unwrap();
        let mut scaled = x.clone();
        scaled.scale(2.5);
        let a = space.project(&scaled);
        let mut b = space.project(&x);
        b.scale(2.5);
        assert!(a.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn user_vectors_sum_and_exclusions() {
        let proj = Matrix::from_row_major(4, 2, &[3.0, 4.0, 3.0, 4.0, 3.0, 4.0, 1.0, 0.0]);
        let uv = user_vectors(&[7, 7, 7, 2], &proj, 10, Aggregation::Sum);
        assert_eq!(uv.users, vec![2, 7]);
        assert_eq!(uv.raw.row(1), vec![9.0, 12.0]);
        assert_eq!(uv.raw_norms[1], 15.0);
        assert!((uv.normalized[(1, 0)] - 0.6).abs() < 1e-15);
        assert_eq!(uv.excluded, 8);
        let mean = user_vectors(&[7, 7, 7, 2], &proj, 10, Aggregation::Mean);
        assert_eq!(mean.raw.row(1), vec![3.0, 4.0]);
    }

    #[test]
    fn zero_vector_normalizes_to_zero() {
        let proj = Matrix::from_row_major(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let uv = user_vectors(&[4, 4], &proj, 1, Aggregation::Sum);
        assert_eq!(uv.raw_norms[0], 0.0);
        assert!(uv.normalized.row(0).iter().all(|x| *x == 0.0 && !x.is_nan()));
    }

    #[test]
    fn procrustes_alignment_undoes_sign_flip() {
        let mut s = 4;
        let base = Matrix::from_fn(30, 3, |_, _| lcg(&mut s));
        let mut flipped = base.clone();
        for x in flipped.col_mut(0) {
            *x = -*x;
        }
        let ds = vec![decomp(0, (0..30).collect(), base.clone()), decomp(1, (0..30).collect(), flipped)];
        let (rot, unaligned) = align_windows(&ds, Alignment::Procrustes);
        assert!(!unaligned[1]);
        let aligned = ds[1].scores.matmul(&rot[1]);
        assert!(aligned.max_abs_diff(&base) < 1e-12);
    }
}
