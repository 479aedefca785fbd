use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::Matrix;
use crate::sparse::CsrMatrix;

/// Something that can be multiplied by a vector from either side.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `y = M x`
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// `y = Mᵀ x`
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]);

    /// `M X` for a block of column vectors.
    fn apply_block(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.nrows(), x.cols());
        for j in 0..x.cols() {
            self.apply(x.col(j), out.col_mut(j));
        }
        out
    }

    /// `Mᵀ X` for a block of column vectors.
    fn apply_transpose_block(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.ncols(), x.cols());
        for j in 0..x.cols() {
            self.apply_transpose(x.col(j), out.col_mut(j));
        }
        out
    }
}

impl LinearOperator for Matrix {
    fn nrows(&self) -> usize {
        self.rows()
    }
    fn ncols(&self) -> usize {
        self.cols()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (j, &xj) in x.iter().enumerate() {
            crate::math::axpy(xj, self.col(j), y);
        }
    }
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        for (j, yj) in y.iter_mut().enumerate() {
            *yj = crate::math::dot(self.col(j), x);
        }
    }
}

impl LinearOperator for CsrMatrix {
    fn nrows(&self) -> usize {
        self.rows()
    }
    fn ncols(&self) -> usize {
        self.cols()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec(x, y)
    }
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        self.tr_mul_vec(x, y)
    }
}

/// Swaps the roles of `apply` and `apply_transpose`.
pub struct Transposed<'a, O: ?Sized>(pub &'a O);

impl<O: LinearOperator + ?Sized> LinearOperator for Transposed<'_, O> {
    fn nrows(&self) -> usize {
        self.0.ncols()
    }
    fn ncols(&self) -> usize {
        self.0.nrows()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.0.apply_transpose(x, y)
    }
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        self.0.apply(x, y)
    }
}

/// Implicitly double-centered view of a sparse count matrix:
/// `C = A - r 1ᵀ - 1 cᵀ + g 1 1ᵀ` with row means `r`, column means `c` and
/// grand mean `g`. The dense `C` is never formed.
#[derive(Clone, Debug)]
pub struct DoubleCentered<'a> {
    counts: &'a CsrMatrix,
    row_means: Vec<f64>,
    col_means: Vec<f64>,
    grand_mean: f64,
}

/// Wraps `a` in its double-centered operator.
pub fn double_center(a: &CsrMatrix) -> DoubleCentered<'_> {
    let (m, n) = (a.rows(), a.cols());
    let row_means: Vec<f64> = a.row_sums().into_iter().map(|s| s / n as f64).collect();
    let col_means: Vec<f64> = a.col_sums().into_iter().map(|s| s / m as f64).collect();
    let grand_mean = row_means.iter().sum::<f64>() / m as f64;
    DoubleCentered {
        counts: a,
        row_means,
        col_means,
        grand_mean,
    }
}

impl DoubleCentered<'_> {
    pub fn row_means(&self) -> &[f64] {
        &self.row_means
    }

    pub fn col_means(&self) -> &[f64] {
        &self.col_means
    }

    pub fn grand_mean(&self) -> f64 {
        self.grand_mean
    }

    pub fn counts(&self) -> &CsrMatrix {
        self.counts
    }

    /// Entry `(i, j)` of the centered matrix.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let a = self.counts.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v);
        a - self.row_means[i] - self.col_means[j] + self.grand_mean
    }

    /// Materialises the centered matrix. Only for tests and tiny windows.
    pub fn to_dense(&self) -> Matrix {
        let mut d = self.counts.to_dense();
        for j in 0..d.cols() {
            let shift = self.grand_mean - self.col_means[j];
            for (i, x) in d.col_mut(j).iter_mut().enumerate() {
                *x += shift - self.row_means[i];
            }
        }
        d
    }

    /// Squared Frobenius norm of the centered matrix, from the identity
    /// `‖C‖² = ‖A‖² - n Σ rᵢ² - m Σ cⱼ² + m n g²`.
    pub fn frobenius_norm_sq(&self) -> f64 {
        let (m, n) = (self.nrows() as f64, self.ncols() as f64);
        let a2: f64 = self.counts.values().iter().map(|v| v * v).sum();
        let r2: f64 = self.row_means.iter().map(|v| v * v).sum();
        let c2: f64 = self.col_means.iter().map(|v| v * v).sum();
        (a2 - n * r2 - m * c2 + m * n * self.grand_mean * self.grand_mean).max(0.0)
    }
}

impl LinearOperator for DoubleCentered<'_> {
    fn nrows(&self) -> usize {
        self.counts.rows()
    }

    fn ncols(&self) -> usize {
        self.counts.cols()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.counts.mul_vec(x, y);
        let sum_x: f64 = x.iter().sum();
        let cx = crate::math::dot(&self.col_means, x);
        let shift = self.grand_mean * sum_x - cx;
        for (yi, ri) in y.iter_mut().zip(&self.row_means) {
            *yi += shift - ri * sum_x;
        }
    }

    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        self.counts.tr_mul_vec(x, y);
        let sum_x: f64 = x.iter().sum();
        let rx = crate::math::dot(&self.row_means, x);
        let shift = self.grand_mean * sum_x - rx;
        for (yj, cj) in y.iter_mut().zip(&self.col_means) {
            *yj += shift - cj * sum_x;
        }
    }
}

/// Explicit dense double-centering, kept independent of the operator path.
pub fn double_center_dense(a: &Matrix) -> Matrix {
    let (m, n) = (a.rows(), a.cols());
    let mut rows = vec![0.0; m];
    let mut cols = vec![0.0; n];
    for j in 0..n {
        for i in 0..m {
            rows[i] += a[(i, j)];
            cols[j] += a[(i, j)];
        }
    }
    let total: f64 = rows.iter().sum();
    let g = total / (m * n) as f64;
    Matrix::from_fn(m, n, |i, j| a[(i, j)] - rows[i] / n as f64 - cols[j] / m as f64 + g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_matrix_centers_to_zero() {
        let trip = (0..3u32)
            .flat_map(|i| (0..4u32).map(move |j| (i, j, 5.0)))
            .collect();
        let a = CsrMatrix::from_triplets(3, 4, trip);
        let c = double_center(&a);
        assert!(c.to_dense().as_slice().iter().all(|v| v.abs() < 1e-14));
        let mut y = vec![0.0; 3];
        c.apply(&[1.0, -2.0, 3.0, 0.5], &mut y);
        assert!(y.iter().all(|v| v.abs() < 1e-13));
        assert!(c.frobenius_norm_sq() < 1e-12);
    }

    #[test]
    fn identity_two_by_two() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 1, 1.0)]);
        let c = double_center(&a);
        assert_eq!(c.row_means(), &[0.5, 0.5]);
        assert_eq!(c.col_means(), &[0.5, 0.5]);
        assert_eq!(c.grand_mean(), 0.5);
        let d = c.to_dense();
        // 1 - r - c + g = 1 - .5 - .5 + .5; the centering projector J is idempotent so J I J = J
        let expected = Matrix::from_row_major(2, 2, &[0.5, -0.5, -0.5, 0.5]);
        assert!(d.max_abs_diff(&expected) < 1e-15);
        assert_eq!(c.entry(0, 1), -0.5);
    }

    #[test]
    fn operator_matches_dense_both_sides() {
        let a = CsrMatrix::from_triplets(
            3,
            4,
            vec![(0, 0, 2.0), (0, 3, 1.0), (1, 1, 4.0), (2, 2, 1.0), (2, 0, 3.0)],
        );
        let c = double_center(&a);
        let d = c.to_dense();
        let x = [0.3, -1.0, 2.0, 0.7];
        let mut y = vec![0.0; 3];
        let mut yd = vec![0.0; 3];
        c.apply(&x, &mut y);
        d.apply(&x, &mut yd);
        for (p, q) in y.iter().zip(&yd) {
            assert!((p - q).abs() < 1e-13);
        }
        let u = [1.0, -0.5, 0.25];
        let mut z = vec![0.0; 4];
        let mut zd = vec![0.0; 4];
        c.apply_transpose(&u, &mut z);
        d.apply_transpose(&u, &mut zd);
        for (p, q) in z.iter().zip(&zd) {
            assert!((p - q).abs() < 1e-13);
        }
        assert!((c.frobenius_norm_sq() - d.frobenius_norm() * d.frobenius_norm()).abs() < 1e-12);
    }
}
