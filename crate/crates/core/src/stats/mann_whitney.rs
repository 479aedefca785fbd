use alloc::vec;
use alloc::vec::Vec;

use super::special::normal_upper_tail;
use crate::math::sqrt;

/// Largest `n1 * n2` handled by exact enumeration.
pub const EXACT_LIMIT: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToxicityComparison {
    pub n1: usize,
    pub n2: usize,
    /// Mann-Whitney `U` of the first sample.
    pub u: f64,
    /// One-sided p-value for "first sample stochastically greater".
    pub p_value: f64,
    pub auc: f64,
    pub exact: bool,
}

/// Doubled midranks of the pooled sample (integers), plus tie group sizes.
fn doubled_ranks(a: &[f64], b: &[f64]) -> (Vec<u64>, Vec<u64>) {
    let mut pooled: Vec<(f64, usize)> = a.iter().chain(b).copied().zip(0..).collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut ranks = vec![0u64; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i + 1;
        while j < pooled.len() && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        // ranks i+1 ..= j share the midrank (i + 1 + j) / 2
        let r2 = (i + 1 + j) as u64;
        for item in &pooled[i..j] {
            ranks[item.1] = r2;
        }
        ties.push((j - i) as u64);
        i = j;
    }
    (ranks, ties)
}

/// Exact `P(sum of doubled ranks of a random size-k subset >= threshold)`.
fn exact_upper(ranks: &[u64], k: usize, threshold: u64) -> f64 {
    let max_sum: u64 = {
        let mut sorted = ranks.to_vec();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        sorted[..k].iter().sum()
    };
    let width = max_sum as usize + 1;
    // ways[j][s]: subsets of size j with doubled-rank sum s
    let mut ways = vec![0.0f64; (k + 1) * width];
    ways[0] = 1.0;
    let mut reach = 0usize;
    for &r in ranks {
        let r = r as usize;
        reach = (reach + r).min(max_sum as usize);
        for j in (1..=k).rev() {
            let (lo, hi) = ways.split_at_mut(j * width);
            let prev = &lo[(j - 1) * width..];
            let cur = &mut hi[..width];
            for s in (r..=reach).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    let row = &ways[k * width..];
    let total: f64 = row.iter().sum();
    let upper: f64 = row[(threshold as usize).min(width)..].iter().sum();
    (upper / total).clamp(0.0, 1.0)
}

/// One-sided Mann-Whitney test of `a` against `b` with midranks.
pub fn mann_whitney_auc(a: &[f64], b: &[f64]) -> ToxicityComparison {
    assert!(!a.is_empty() && !b.is_empty(), "both samples need at least one value");
    let (n1, n2) = (a.len(), b.len());
    let (ranks, ties) = doubled_ranks(a, b);
    let r2_a: u64 = ranks[..n1].iter().sum();
    let u = r2_a as f64 / 2.0 - (n1 * (n1 + 1)) as f64 / 2.0;
    let prod = (n1 * n2) as f64;
    let exact = n1 * n2 <= EXACT_LIMIT;
    let p_value = if exact {
        // R_a >= r  <=>  R_b <= total - r; enumerate the smaller group
        if n1 <= n2 {
            exact_upper(&ranks, n1, r2_a)
        } else {
            let total: u64 = ranks.iter().sum();
            let r2_b = total - r2_a;
            let neg: Vec<u64> = ranks.iter().map(|&r| (2 * (n1 + n2) + 2) as u64 - r).collect();
            // R_b <= r2_b  <=>  Σ (c - r) >= n2 c - r2_b
            let c = (2 * (n1 + n2) + 2) as u64;
            exact_upper(&neg, n2, n2 as u64 * c - r2_b)
        }
    } else {
        let n = (n1 + n2) as f64;
        let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0));
        let var = prod / 12.0 * ((n + 1.0) - tie_term);
        if var <= 0.0 {
            1.0
        } else {
            normal_upper_tail((u - prod / 2.0 - 0.5) / sqrt(var))
        }
    };
    ToxicityComparison {
        n1,
        n2,
        u,
        p_value,
        auc: u / prod,
        exact,
    }
}
