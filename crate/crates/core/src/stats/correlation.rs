use alloc::vec::Vec;

use crate::math::sqrt;

/// Midranks (1-based) of a sample.
pub fn midranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = alloc::vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && x[order[j]] == x[order[i]] {
            j += 1;
        }
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Pearson correlation; `NaN` when either input is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return f64::NAN;
    }
    sxy / sqrt(sxx * syy)
}

/// Spearman rank correlation over the positions where both values exist.
pub fn spearman(x: &[Option<f64>], y: &[Option<f64>]) -> f64 {
    let (a, b): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter_map(|(p, q)| Some(((*p)?, (*q)?)))
        .unzip();
    if a.len() < 2 {
        return f64::NAN;
    }
    pearson(&midranks(&a), &midranks(&b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_is_one() {
        let x: Vec<Option<f64>> = (0..10).map(|i| Some(i as f64)).collect();
        let y: Vec<Option<f64>> = (0..10).map(|i| Some(libm::exp(i as f64))).collect();
        assert!((spearman(&x, &y) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gaps_dropped_pairwise() {
        let x = [Some(1.0), None, Some(3.0), Some(2.0)];
        let y = [Some(3.0), Some(0.0), None, Some(1.0)];
        assert!((spearman(&x, &y) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn ties_use_midranks() {
        assert_eq!(midranks(&[2.0, 1.0, 2.0, 5.0]), alloc::vec![2.5, 1.0, 2.5, 4.0]);
    }
}
