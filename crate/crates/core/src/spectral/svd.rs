//! Truncated SVD of an implicit operator by restarted block Krylov iteration.
//!
//! The Krylov basis lives on the smaller side of the operator (right vectors
//! when `cols <= rows`). Each restart expands a block of Ritz vectors with
//! repeated applications of the Gram operator `MᵀM`, performs Rayleigh-Ritz
//! on the projected Gram matrix and keeps the leading block. Converged right
//! vectors are refined by a dense SVD of `M V`, which keeps small singular
//! values accurate (no squaring of the spectrum in the final values).

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::centering::{LinearOperator, Transposed};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::math::{dot, norm, sqrt};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvdOptions {
    /// Relative residual tolerance, measured against the largest singular value.
    pub tol: f64,
    /// Budget of block applications of the Gram operator.
    pub max_iterations: usize,
    pub seed: u64,
    /// Extra block columns beyond `k`.
    pub oversample: usize,
    /// Krylov basis size as a multiple of the block size.
    pub basis_blocks: usize,
}

impl Default for SvdOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iterations: 1000,
            seed: 0x5eed,
            oversample: 10,
            basis_blocks: 3,
        }
    }
}

/// Leading `k` singular triplets.
#[derive(Clone, Debug)]
pub struct TruncatedSvd {
    /// `rows x k` left vectors.
    pub u: Matrix,
    pub s: Vec<f64>,
    /// `cols x k` right vectors.
    pub v: Matrix,
    /// Per-triplet residual `max(‖M v - σ u‖, ‖Mᵀ u - σ v‖)`.
    pub residuals: Vec<f64>,
    /// Gram-operator block applications used.
    pub iterations: usize,
}

/// Computes the top-`k` singular triplets of `op`.
///
/// Fails with [`Error::NoConvergence`] (carrying the achieved residuals) when
/// the iteration budget runs out.
pub fn truncated_svd<O: LinearOperator + ?Sized>(
    op: &O,
    k: usize,
    opts: &SvdOptions,
) -> Result<TruncatedSvd> {
    let (m, n) = (op.nrows(), op.ncols());
    if k > m.min(n) {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: alloc::format!("k = {k} exceeds min(rows, cols) = {}", m.min(n)),
        });
    }
    if n <= m {
        right_side_svd(op, k, opts)
    } else {
        let t = right_side_svd(&Transposed(op), k, opts)?;
        Ok(TruncatedSvd {
            u: t.v,
            s: t.s,
            v: t.u,
            residuals: t.residuals,
            iterations: t.iterations,
        })
    }
}

struct Gram<'a, O: ?Sized> {
    op: &'a O,
}

impl<O: LinearOperator + ?Sized> Gram<'_, O> {
    fn apply(&self, x: &Matrix) -> Matrix {
        let mx = self.op.apply_block(x);
        self.op.apply_transpose_block(&mx)
    }
}

/// Orthonormalises `w` against `basis` and internally; columns that collapse
/// are dropped. At most `limit` columns are kept.
fn expand_block(basis: &Matrix, mut w: Matrix, limit: usize) -> Matrix {
    let rows = w.rows();
    let mut kept: Vec<Vec<f64>> = Vec::new();
    for j in 0..w.cols() {
        if kept.len() == limit {
            break;
        }
        let col = w.col_mut(j);
        let before = norm(col);
        if before == 0.0 {
            continue;
        }
        for _pass in 0..2 {
            for b in 0..basis.cols() {
                let c = dot(basis.col(b), col);
                crate::math::axpy(-c, basis.col(b), col);
            }
            for q in &kept {
                let c = dot(q, col);
                crate::math::axpy(-c, q, col);
            }
        }
        let after = norm(col);
        if after > 1e-10 * before {
            let inv = 1.0 / after;
            kept.push(col.iter().map(|x| x * inv).collect());
        }
    }
    let mut data = Vec::with_capacity(rows * kept.len());
    for q in &kept {
        data.extend_from_slice(q);
    }
    Matrix::from_col_major(rows, kept.len(), data)
}

fn right_side_svd<O: LinearOperator + ?Sized>(
    op: &O,
    k: usize,
    opts: &SvdOptions,
) -> Result<TruncatedSvd> {
    let (m, n) = (op.nrows(), op.ncols());
    if k == 0 {
        return Ok(TruncatedSvd {
            u: Matrix::zeros(m, 0),
            s: Vec::new(),
            v: Matrix::zeros(n, 0),
            residuals: Vec::new(),
            iterations: 0,
        });
    }
    let gram = Gram { op };
    let block = (k + opts.oversample).min(n);
    let max_basis = (opts.basis_blocks.max(2) * block).min(n);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let start = Matrix::from_fn(n, block, |_, _| rng.random::<f64>() - 0.5);
    let mut x = expand_block(&Matrix::zeros(n, 0), start, block);
    if x.cols() < block {
        let mut padded = x.clone();
        padded.hcat(&Matrix::zeros(n, block - x.cols()));
        linalg::complete_orthonormal(&mut padded, x.cols());
        x = padded;
    }
    let mut gx = gram.apply(&x);
    let mut iterations = 1usize;

    loop {
        let mut basis = x;
        let mut images = gx;
        let mut newest = 0usize;
        while basis.cols() < max_basis {
            let fresh = Matrix::from_fn(n, basis.cols() - newest, |i, j| images[(i, newest + j)]);
            let limit = max_basis - basis.cols();
            let q = expand_block(&basis, fresh, limit);
            if q.cols() == 0 {
                break;
            }
            let gq = gram.apply(&q);
            iterations += 1;
            newest = basis.cols();
            basis.hcat(&q);
            images.hcat(&gq);
        }

        let projected = basis.tr_matmul(&images);
        let (theta, y) = linalg::symmetric_eigen(&projected);
        let keep = block.min(theta.len());
        let y = y.truncate_cols(keep);
        let ritz = basis.matmul(&y);
        let ritz_images = images.matmul(&y);

        let sigma1 = sqrt(theta[0].max(0.0));
        let floor = sqrt(opts.tol) * sigma1;
        let mut residuals = vec![0.0; k];
        let mut converged = true;
        for j in 0..k {
            let mut r = ritz_images.col(j).to_vec();
            crate::math::axpy(-theta[j], ritz.col(j), &mut r);
            residuals[j] = norm(&r);
            let sigma = sqrt(theta[j].max(0.0));
            if residuals[j] > opts.tol * sigma1 * sigma.max(floor) {
                converged = false;
            }
        }
        let exhausted = basis.cols() == n;
        if converged || exhausted || sigma1 == 0.0 {
            return Ok(finalize(op, ritz.truncate_cols(k), iterations));
        }
        if iterations >= opts.max_iterations {
            let worst = residuals.iter().copied().fold(0.0, f64::max);
            return Err(Error::NoConvergence {
                iterations,
                worst,
                residuals,
            });
        }
        x = ritz;
        gx = ritz_images;
    }
}

/// Dense SVD of `M V` turns converged right vectors into accurate triplets.
fn finalize<O: LinearOperator + ?Sized>(op: &O, v: Matrix, iterations: usize) -> TruncatedSvd {
    let k = v.cols();
    let mv = op.apply_block(&v);
    let d = linalg::svd(&mv);
    let u = d.u;
    let s = d.s;
    let v = v.matmul(&d.v);
    let mtu = op.apply_transpose_block(&u);
    let mv = op.apply_block(&v);
    let residuals = (0..k)
        .map(|j| {
            let mut left = mv.col(j).to_vec();
            crate::math::axpy(-s[j], u.col(j), &mut left);
            let mut right = mtu.col(j).to_vec();
            crate::math::axpy(-s[j], v.col(j), &mut right);
            norm(&left).max(norm(&right))
        })
        .collect();
    TruncatedSvd {
        u,
        s,
        v,
        residuals,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut s = seed;
        Matrix::from_fn(rows, cols, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        })
    }

    #[test]
    fn rank_two_tail_is_tiny() {
        let a = lcg_matrix(30, 2, 1);
        let b = lcg_matrix(2, 20, 2);
        let m = a.matmul(&b);
        let t = truncated_svd(&m, 5, &SvdOptions::default()).unwrap();
        for j in 2..5 {
            assert!(t.s[j] <= 1e-10 * t.s[0], "sigma_{j} = {}", t.s[j]);
        }
    }

    #[test]
    fn full_rank_reconstruction() {
        let m = lcg_matrix(5, 4, 7);
        let t = truncated_svd(&m, 4, &SvdOptions::default()).unwrap();
        let mut us = t.u.clone();
        linalg::scale_columns(&mut us, &t.s);
        let rebuilt = us.matmul(&t.v.transpose());
        let err = {
            let mut d = rebuilt.clone();
            for (x, y) in d.as_mut_slice().iter_mut().zip(m.as_slice()) {
                *x -= y;
            }
            d.frobenius_norm()
        };
        assert!(err <= 1e-8 * m.frobenius_norm());
    }

    #[test]
    fn wide_operator_uses_transposed_side() {
        let m = lcg_matrix(6, 40, 3);
        let t = truncated_svd(&m, 3, &SvdOptions::default()).unwrap();
        assert_eq!(t.u.rows(), 6);
        assert_eq!(t.v.rows(), 40);
        for r in &t.residuals {
            assert!(*r <= 1e-8 * t.s[0]);
        }
    }

    #[test]
    fn rejects_k_above_rank_bound() {
        let m = lcg_matrix(3, 4, 3);
        assert!(matches!(
            truncated_svd(&m, 4, &SvdOptions::default()),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn exhausted_budget_reports_residuals() {
        let m = lcg_matrix(200, 150, 9);
        let opts = SvdOptions {
            max_iterations: 2,
            oversample: 0,
            basis_blocks: 2,
            ..SvdOptions::default()
        };
        match truncated_svd(&m, 20, &opts) {
            Err(Error::NoConvergence { residuals, .. }) => assert_eq!(residuals.len(), 20),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let m = lcg_matrix(60, 45, 4);
        let opts = SvdOptions::default();
        let a = truncated_svd(&m, 6, &opts).unwrap();
        let b = truncated_svd(&m, 6, &opts).unwrap();
        assert_eq!(a.s, b.s);
        assert_eq!(a.v, b.v);
    }
}
