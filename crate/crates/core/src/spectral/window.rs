use alloc::vec::Vec;

use super::centering::double_center;
use super::svd::{truncated_svd, SvdOptions};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::sparse::CsrMatrix;

/// User x influencer retweet counts for one window.
#[derive(Clone, Debug)]
pub struct WindowIncidence {
    /// Anchor (final day) of the window, as a day index.
    pub anchor: i64,
    /// Global user id of each row, ascending.
    pub users: Vec<u32>,
    /// Global influencer id of each column, ascending.
    pub influencers: Vec<u32>,
    pub counts: CsrMatrix,
}

impl WindowIncidence {
    /// Builds the window matrix from `(user, influencer)` retweet pairs given
    /// in global ids. Each pair contributes a count of one.
    pub fn from_pairs(anchor: i64, pairs: &[(u32, u32)]) -> Self {
        let mut users: Vec<u32> = pairs.iter().map(|p| p.0).collect();
        users.sort_unstable();
        users.dedup();
        let mut influencers: Vec<u32> = pairs.iter().map(|p| p.1).collect();
        influencers.sort_unstable();
        influencers.dedup();
        let mut local: Vec<(u32, u32)> = pairs
            .iter()
            .map(|&(u, i)| {
                let r = users.binary_search(&u).expect("user present") as u32;
                let c = influencers.binary_search(&i).expect("influencer present") as u32;
                (r, c)
            })
            .collect();
        let counts = CsrMatrix::from_counts(users.len(), influencers.len(), &mut local);
        Self {
            anchor,
            users,
            influencers,
            counts,
        }
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_influencers(&self) -> usize {
        self.influencers.len()
    }
}

/// Per-window principal axes and user scores.
#[derive(Clone, Debug)]
pub struct WindowDecomposition {
    pub anchor: i64,
    /// Global user id of each score row.
    pub users: Vec<u32>,
    /// Influencer loadings, `influencers x k_window`; padded columns are zero.
    pub rotation: Matrix,
    /// Length `k_window`, non-increasing, zero-padded.
    pub singular_values: Vec<f64>,
    /// `users x k_window` scores of the centered matrix on the rotation.
    pub scores: Matrix,
    /// Number of computed (non-padded) components.
    pub effective_rank: usize,
    /// Squared Frobenius norm of the centered window matrix.
    pub total_variance: f64,
    pub iterations: usize,
}

impl WindowDecomposition {
    pub fn is_padded(&self) -> bool {
        self.effective_rank < self.singular_values.len()
    }
}

/// Centers the window, takes its leading `k_window` components and returns
/// the user scores `C Q̃`.
///
/// Windows whose centered rank bound `min(users, influencers) - 1` is below
/// `k_window` get zero-padded columns. A window with fewer than two users or
/// influencers is rejected as degenerate.
pub fn window_scores(
    w: &WindowIncidence,
    k_window: usize,
    opts: &SvdOptions,
) -> Result<WindowDecomposition> {
    let (m, n) = (w.n_users(), w.n_influencers());
    if m < 2 || n < 2 {
        return Err(Error::DegenerateWindow {
            users: m,
            influencers: n,
        });
    }
    let centered = double_center(&w.counts);
    let k_eff = k_window.min(m.min(n) - 1);
    let svd = truncated_svd(&centered, k_eff, opts)?;

    let mut v = svd.v;
    let mut u = svd.u;
    let signs = linalg::canonical_signs(&v);
    linalg::scale_columns(&mut v, &signs);
    linalg::scale_columns(&mut u, &signs);

    let mut rotation = Matrix::zeros(n, k_window);
    let mut scores = Matrix::zeros(m, k_window);
    let mut singular_values = alloc::vec![0.0; k_window];
    for (j, sv) in singular_values.iter_mut().enumerate().take(k_eff) {
        rotation.col_mut(j).copy_from_slice(v.col(j));
        let s = svd.s[j];
        *sv = s;
        for (dst, src) in scores.col_mut(j).iter_mut().zip(u.col(j)) {
            *dst = s * src;
        }
    }
    Ok(WindowDecomposition {
        anchor: w.anchor,
        users: w.users.clone(),
        rotation,
        singular_values,
        scores,
        effective_rank: k_eff,
        total_variance: centered.frobenius_norm_sq(),
        iterations: svd.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn pairs_map_to_local_indices() {
        let w = WindowIncidence::from_pairs(3, &[(10, 5), (2, 5), (10, 7), (10, 5)]);
        assert_eq!(w.users, vec![2, 10]);
        assert_eq!(w.influencers, vec![5, 7]);
        assert_eq!(
            w.counts.to_dense(),
            Matrix::from_row_major(2, 2, &[1.0, 0.0, 2.0, 1.0])
        );
    }

    #[test]
    fn three_users_pad_to_thirty() {
        let pairs = [(0, 0), (0, 1), (1, 1), (1, 2), (2, 3), (2, 0), (2, 2)];
        let w = WindowIncidence::from_pairs(0, &pairs);
        let d = window_scores(&w, 30, &SvdOptions::default()).unwrap();
        assert_eq!(d.scores.cols(), 30);
        assert_eq!(d.effective_rank, 2);
        assert!(d.is_padded());
        for j in 2..30 {
            assert!(d.scores.col(j).iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn single_user_is_degenerate() {
        let w = WindowIncidence::from_pairs(0, &[(0, 0), (0, 1)]);
        assert!(matches!(
            window_scores(&w, 30, &SvdOptions::default()),
            Err(Error::DegenerateWindow { users: 1, .. })
        ));
    }

    #[test]
    fn loadings_follow_sign_convention() {
        let mut pairs = vec![];
        for u in 0..12u32 {
            for i in 0..6u32 {
                if (u + i) % 3 != 0 {
                    pairs.push((u, i + (u % 2) * 3));
                }
            }
        }
        let w = WindowIncidence::from_pairs(0, &pairs);
        let d = window_scores(&w, 4, &SvdOptions::default()).unwrap();
        for j in 0..d.effective_rank {
            let col = d.rotation.col(j);
            let big = col.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
            assert!(big > 0.0);
        }
    }
}
