use alloc::vec::Vec;

use crate::linalg::{Matrix, PivotedQr};
use crate::{Error, Result};

/// Relative pivot tolerance below which a design is declared rank deficient.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub rss: f64,
}

impl OlsFit {
    pub fn predict(&self, row: &[f64]) -> f64 {
        row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum()
    }
}

/// Least squares by pivoted QR. Deficient designs are an error.
pub fn ols(design: &Matrix, y: &[f64]) -> Result<OlsFit> {
    if design.rows() != y.len() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "design has {} rows, response has {}",
            design.rows(),
            y.len()
        )));
    }
    if design.rows() < design.cols() {
        return Err(Error::InsufficientData {
            have: design.rows(),
            need: design.cols().saturating_sub(1),
        });
    }
    let qr = PivotedQr::new(design, RANK_TOL);
    if !qr.is_full_rank() {
        return Err(Error::RankDeficient {
            rank: qr.rank(),
            columns: design.cols(),
        });
    }
    let (coefficients, rss) = qr.solve(y);
    Ok(OlsFit { coefficients, rss })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = Matrix::from_fn(6, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let y: Vec<f64> = (0..6).map(|i| 5.0 + 2.0 * i as f64).collect();
        let fit = ols(&x, &y).unwrap();
        assert!((fit.coefficients[0] - 5.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
        assert!(fit.rss < 1e-20);
    }

    #[test]
    fn duplicate_column_is_rejected() {
        let x = Matrix::from_fn(5, 3, |i, j| if j == 0 { 1.0 } else { (i * i) as f64 });
        assert!(matches!(ols(&x, &[1.0, 2.0, 0.0, 3.0, 1.0]), Err(Error::RankDeficient { rank: 2, columns: 3 })));
    }
}
