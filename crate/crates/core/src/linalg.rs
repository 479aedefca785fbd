//! Small dense linear algebra: column-major matrices, Householder QR (plain and
//! column-pivoted), one-sided Jacobi SVD, cyclic Jacobi symmetric eigensolver
//! and orthogonal Procrustes.
//!
//! Everything here works on matrices that fit comfortably in memory (a few
//! hundred columns at most); the large sparse work lives in [`crate::sparse`]
//! and [`crate::spectral::svd`].

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math::{axpy, dot, hypot, norm, sqrt};

/// Dense column-major matrix of `f64`.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(12) {
            write!(f, "  ")?;
            for j in 0..self.cols.min(8) {
                write!(f, "{:>12.5e} ", self[(i, j)])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Wraps a column-major buffer.
    ///
    /// # Panics
    /// If `data.len() != rows * cols`.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "buffer does not match shape");
        Self { rows, cols, data }
    }

    /// Builds a matrix from a row-major slice, the natural layout for literals.
    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols, "buffer does not match shape");
        Self::from_fn(rows, cols, |i, j| data[i * cols + j])
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// Mutable access to two distinct columns at once.
    pub fn col_pair_mut(&mut self, p: usize, q: usize) -> (&mut [f64], &mut [f64]) {
        assert!(p != q);
        let r = self.rows;
        if p < q {
            let (a, b) = self.data.split_at_mut(q * r);
            (&mut a[p * r..(p + 1) * r], &mut b[..r])
        } else {
            let (a, b) = self.data.split_at_mut(p * r);
            (&mut b[..r], &mut a[q * r..(q + 1) * r])
        }
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `self * other`
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let oc = other.col(j);
            let dst = out.col_mut(j);
            for (k, &w) in oc.iter().enumerate() {
                if w != 0.0 {
                    axpy(w, &self.data[k * self.rows..(k + 1) * self.rows], dst);
                }
            }
        }
        out
    }

    /// `selfᵀ * other`
    pub fn tr_matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "row counts differ");
        Matrix::from_fn(self.cols, other.cols, |i, j| dot(self.col(i), other.col(j)))
    }

    /// Keeps the first `n` columns.
    pub fn truncate_cols(mut self, n: usize) -> Matrix {
        let n = n.min(self.cols);
        self.data.truncate(n * self.rows);
        self.cols = n;
        self
    }

    /// Selects rows by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        Matrix::from_fn(idx.len(), self.cols, |i, j| self[(idx[i], j)])
    }

    /// Appends the columns of `other` to the right.
    pub fn hcat(&mut self, other: &Matrix) {
        assert_eq!(self.rows, other.rows);
        self.data.extend_from_slice(&other.data);
        self.cols += other.cols;
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn scale(&mut self, alpha: f64) {
        for v in &mut self.data {
            *v *= alpha;
        }
    }

    /// Largest absolute elementwise difference, for tests and diagnostics.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

/// Builds the Householder vector for `x` in place. Returns `(tau, beta)` such
/// that `(I - tau v vᵀ) x = beta e1` with `v[0] = 1` stored implicitly.
fn householder(x: &mut [f64]) -> (f64, f64) {
    let alpha = x[0];
    let tail = norm(&x[1..]);
    if tail == 0.0 {
        return (0.0, alpha);
    }
    let beta = -alpha.signum() * hypot(alpha, tail);
    let beta = if alpha == 0.0 { -hypot(alpha, tail) } else { beta };
    let tau = (beta - alpha) / beta;
    let scale = 1.0 / (alpha - beta);
    for v in &mut x[1..] {
        *v *= scale;
    }
    x[0] = 1.0;
    (tau, beta)
}

/// Applies `(I - tau v vᵀ)` to `y`, with `v` as returned by [`householder`].
#[inline]
fn apply_reflector(v: &[f64], tau: f64, y: &mut [f64]) {
    if tau == 0.0 {
        return;
    }
    let w = tau * dot(v, y);
    axpy(-w, v, y);
}

/// Thin QR of an `m x n` matrix with `m >= n`: `A = Q R`, `Q` is `m x n` with
/// orthonormal columns and `R` is `n x n` upper triangular.
pub fn thin_qr(a: &Matrix) -> (Matrix, Matrix) {
    let (m, n) = (a.rows, a.cols);
    assert!(m >= n, "thin_qr needs rows >= cols");
    let mut work = a.clone();
    let mut taus = vec![0.0; n];
    for k in 0..n {
        let (tau, beta) = householder(&mut work.col_mut(k)[k..]);
        taus[k] = tau;
        for j in (k + 1)..n {
            let (vk, cj) = work.col_pair_mut(k, j);
            apply_reflector(&vk[k..], tau, &mut cj[k..]);
        }
        work.col_mut(k)[k] = beta;
    }
    let r = Matrix::from_fn(n, n, |i, j| if i <= j { work[(i, j)] } else { 0.0 });
    let mut q = Matrix::zeros(m, n);
    for j in 0..n {
        q[(j, j)] = 1.0;
    }
    let mut v = vec![0.0; m];
    for k in (0..n).rev() {
        v[k] = 1.0;
        v[k + 1..].copy_from_slice(&work.col(k)[k + 1..]);
        for j in 0..n {
            apply_reflector(&v[k..], taus[k], &mut q.col_mut(j)[k..]);
        }
    }
    (q, r)
}

/// Householder QR with column pivoting, used for least squares with explicit
/// rank detection.
#[derive(Clone, Debug)]
pub struct PivotedQr {
    factors: Matrix,
    taus: Vec<f64>,
    perm: Vec<usize>,
    rank: usize,
}

impl PivotedQr {
    /// Factors `a`; a diagonal entry of `R` with `|r_kk| <= rel_tol * |r_11|`
    /// ends the numerical rank.
    pub fn new(a: &Matrix, rel_tol: f64) -> Self {
        let (m, n) = (a.rows, a.cols);
        let mut work = a.clone();
        let steps = m.min(n);
        let mut taus = vec![0.0; steps];
        let mut perm: Vec<usize> = (0..n).collect();
        let mut col_norms: Vec<f64> = (0..n).map(|j| dot(work.col(j), work.col(j))).collect();
        let mut rank = steps;
        let mut r11 = 0.0;
        for k in 0..steps {
            // recompute the trailing norms exactly; designs here are small
            for (j, norm) in col_norms.iter_mut().enumerate().skip(k) {
                let c = &work.col(j)[k..];
                *norm = dot(c, c);
            }
            let p = (k..n)
                .max_by(|&x, &y| col_norms[x].total_cmp(&col_norms[y]).then(y.cmp(&x)))
                .unwrap_or(k);
            if p != k {
                let (ck, cp) = work.col_pair_mut(k, p);
                ck.swap_with_slice(cp);
                perm.swap(k, p);
                col_norms.swap(k, p);
            }
            let (tau, beta) = householder(&mut work.col_mut(k)[k..]);
            taus[k] = tau;
            for j in (k + 1)..n {
                let (vk, cj) = work.col_pair_mut(k, j);
                apply_reflector(&vk[k..], tau, &mut cj[k..]);
            }
            if k == 0 {
                r11 = beta.abs();
            }
            if beta.abs() <= rel_tol * r11 || r11 == 0.0 {
                rank = k;
                taus[k] = tau;
                // keep reflector data consistent; the rest is not used
                work.col_mut(k)[k] = beta;
                break;
            }
            work.col_mut(k)[k] = beta;
        }
        Self {
            factors: work,
            taus,
            perm,
            rank,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.factors.cols
    }

    /// Applies `Qᵀ` to `b` in place (only the first `rank` reflectors).
    fn apply_qt(&self, b: &mut [f64]) {
        let m = self.factors.rows;
        let mut v = vec![0.0; m];
        for k in 0..self.rank {
            v[k] = 1.0;
            v[k + 1..m].copy_from_slice(&self.factors.col(k)[k + 1..]);
            apply_reflector(&v[k..m], self.taus[k], &mut b[k..]);
        }
    }

    /// Least-squares solution restricted to the leading `rank` pivot columns,
    /// plus the residual sum of squares.
    pub fn solve(&self, b: &[f64]) -> (Vec<f64>, f64) {
        let n = self.factors.cols;
        let mut qtb = b.to_vec();
        self.apply_qt(&mut qtb);
        let r = self.rank;
        let mut z = vec![0.0; r];
        for i in (0..r).rev() {
            let mut s = qtb[i];
            for (j, zj) in z.iter().enumerate().skip(i + 1) {
                s -= self.factors[(i, j)] * zj;
            }
            z[i] = s / self.factors[(i, i)];
        }
        let rss = dot(&qtb[r..], &qtb[r..]);
        let mut x = vec![0.0; n];
        for (k, &zk) in z.iter().enumerate() {
            x[self.perm[k]] = zk;
        }
        (x, rss)
    }
}

/// Singular value decomposition `A = U diag(s) Vᵀ` with singular values in
/// non-increasing order.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

/// Dense SVD by one-sided (Hestenes) Jacobi rotations.
///
/// Returns the thin factorisation: for an `m x n` input `U` is `m x r`, `V`
/// is `n x r` with `r = min(m, n)`. Columns of `U` belonging to zero singular
/// values are completed to an orthonormal set.
pub fn svd(a: &Matrix) -> Svd {
    if a.rows < a.cols {
        let t = svd(&a.transpose());
        return Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        };
    }
    // reduce tall matrices to their square R factor first
    if a.rows > a.cols && a.cols > 0 {
        let (q, r) = thin_qr(a);
        let inner = jacobi_svd_square(&r);
        return Svd {
            u: q.matmul(&inner.u),
            s: inner.s,
            v: inner.v,
        };
    }
    jacobi_svd_square(a)
}

fn jacobi_svd_square(a: &Matrix) -> Svd {
    let n = a.cols;
    let mut u = a.clone();
    let mut v = Matrix::identity(n);
    const EPS: f64 = 1e-15;
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(u.col(p), u.col(p));
                let beta = dot(u.col(q), u.col(q));
                let gamma = dot(u.col(p), u.col(q));
                if alpha == 0.0 || beta == 0.0 || gamma.abs() <= EPS * sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + sqrt(1.0 + zeta * zeta));
                let c = 1.0 / sqrt(1.0 + t * t);
                let s = c * t;
                rotate_cols(&mut u, p, q, c, s);
                rotate_cols(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut s: Vec<f64> = (0..n).map(|j| norm(u.col(j))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| s[y].total_cmp(&s[x]).then(x.cmp(&y)));
    let u_sorted = Matrix::from_fn(u.rows, n, |i, j| u[(i, order[j])]);
    let v_sorted = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    s = order.iter().map(|&j| s[j]).collect();
    let mut u = u_sorted;
    let smax = s.first().copied().unwrap_or(0.0);
    let mut complete_from = n;
    for (j, &sj) in s.iter().enumerate() {
        if sj > smax * 1e-300 && sj > 0.0 {
            let inv = 1.0 / sj;
            for x in u.col_mut(j) {
                *x *= inv;
            }
        } else {
            complete_from = j;
            break;
        }
    }
    if complete_from < n {
        s[complete_from..].fill(0.0);
        complete_orthonormal(&mut u, complete_from);
    }
    Svd { u, s, v: v_sorted }
}

#[inline]
fn rotate_cols(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let (cp, cq) = m.col_pair_mut(p, q);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let a = *x;
        let b = *y;
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Replaces columns `from..` of `m` with unit vectors orthogonal to all
/// earlier columns (Gram-Schmidt over the canonical basis).
pub fn complete_orthonormal(m: &mut Matrix, from: usize) {
    let rows = m.rows;
    let mut candidate = 0usize;
    for j in from..m.cols {
        loop {
            assert!(candidate < rows, "cannot complete more columns than rows");
            let mut e = vec![0.0; rows];
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for k in 0..j {
                    let c = dot(m.col(k), &e);
                    axpy(-c, m.col(k), &mut e);
                }
            }
            let nrm = norm(&e);
            if nrm > 1e-8 {
                for x in &mut e {
                    *x /= nrm;
                }
                m.col_mut(j).copy_from_slice(&e);
                break;
            }
        }
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi. Eigenvalues come back in
/// non-increasing order with matching eigenvector columns.
pub fn symmetric_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.rows;
    assert_eq!(n, a.cols, "symmetric_eigen needs a square matrix");
    let mut m = a.clone();
    // symmetrize against round-off in the caller
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    let mut v = Matrix::identity(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|j| (0..j).map(move |i| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        let diag: f64 = (0..n).map(|i| m[(i, i)] * m[(i, i)]).sum();
        if off <= 1e-30 * diag || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + sqrt(1.0 + theta * theta));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / sqrt(1.0 + t * t);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                rotate_cols(&mut v, p, q, c, s);
            }
        }
    }
    let vals: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| vals[y].total_cmp(&vals[x]).then(x.cmp(&y)));
    let sorted_vals = order.iter().map(|&i| vals[i]).collect();
    let sorted_vecs = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    (sorted_vals, sorted_vecs)
}

/// Orthogonal `R` minimising `‖X R - Y‖_F` (orthogonal Procrustes).
pub fn procrustes(x: &Matrix, y: &Matrix) -> Matrix {
    let cross = x.tr_matmul(y);
    let d = svd(&cross);
    d.u.matmul(&d.v.transpose())
}

/// Flips each column so that its entry of largest magnitude is positive
/// (first such entry on ties). Returns the applied signs.
pub fn canonical_signs(m: &Matrix) -> Vec<f64> {
    (0..m.cols)
        .map(|j| {
            let col = m.col(j);
            let mut best = 0usize;
            for (i, x) in col.iter().enumerate() {
                if x.abs() > col[best].abs() {
                    best = i;
                }
            }
            if col.get(best).copied().unwrap_or(0.0) < 0.0 {
                -1.0
            } else {
                1.0
            }
        })
        .collect()
}

pub fn scale_columns(m: &mut Matrix, signs: &[f64]) {
    for (j, &s) in signs.iter().enumerate() {
        if s != 1.0 {
            for x in m.col_mut(j) {
                *x *= s;
            }
        }
    }
}
