use alloc::vec::Vec;

use crate::math::ln;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogOddsEntry {
    pub hashtag: u32,
    pub cluster: usize,
    pub log_odds: f64,
    /// Users of the cluster that used the hashtag.
    pub k_in: u64,
    pub n_in: u64,
    /// Users of all other clusters that used the hashtag.
    pub k_out: u64,
    pub n_out: u64,
}

/// Smoothed log-odds ratio of in-cluster against out-of-cluster prevalence.
pub fn log_odds_ratio(k_in: u64, n_in: u64, k_out: u64, n_out: u64, smoothing: f64) -> f64 {
    let (k_in, n_in, k_out, n_out) = (k_in as f64, n_in as f64, k_out as f64, n_out as f64);
    ln((k_in + smoothing) / (n_in - k_in + smoothing)) - ln((k_out + smoothing) / (n_out - k_out + smoothing))
}

/// Log-odds for every (cluster, hashtag) from per-cluster user prevalence.
/// `users_per_cluster[c]` is the size of cluster `c`; each table row is a
/// hashtag id with the number of users per cluster who used it. Output is
/// cluster-major, highest log-odds first, truncated to `top_n` per cluster.
pub fn hashtag_log_odds(
    users_per_cluster: &[u64],
    table: &[(u32, Vec<u64>)],
    smoothing: f64,
    top_n: usize,
) -> Vec<LogOddsEntry> {
    assert!(smoothing > 0.0, "smoothing keeps the ratios finite");
    let total_users: u64 = users_per_cluster.iter().sum();
    let mut out = Vec::new();
    for (c, &n_in) in users_per_cluster.iter().enumerate() {
        let n_out = total_users - n_in;
        let mut entries: Vec<LogOddsEntry> = table
            .iter()
            .filter(|(_, counts)| counts.iter().any(|&k| k > 0))
            .map(|(h, counts)| {
                let k_in = counts[c];
                let k_out = counts.iter().sum::<u64>() - k_in;
                LogOddsEntry {
                    hashtag: *h,
                    cluster: c,
                    log_odds: log_odds_ratio(k_in, n_in, k_out, n_out, smoothing),
                    k_in,
                    n_in,
                    k_out,
                    n_out,
                }
            })
            .collect();
        entries.sort_by(|a, b| b.log_odds.total_cmp(&a.log_odds).then(a.hashtag.cmp(&b.hashtag)));
        entries.truncate(top_n);
        out.extend(entries);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn hand_computed_value() {
        let v = log_odds_ratio(10, 10, 0, 10, 0.5);
        assert!((v - 2.0 * libm::log(21.0)).abs() < 1e-12);
        assert!((v - 6.089).abs() < 1e-3);
    }

    #[test]
    fn equal_prevalence_is_zero() {
        assert!(log_odds_ratio(3, 10, 6, 20, 0.5).abs() < 0.06);
        assert_eq!(log_odds_ratio(5, 10, 5, 10, 0.5), 0.0);
    }

    #[test]
    fn absent_hashtags_dropped_and_ordering() {
        let table = vec![(1, vec![5, 0]), (2, vec![0, 0]), (3, vec![1, 4])];
        let out = hashtag_log_odds(&[10, 10], &table, 0.5, 10);
        assert!(out.iter().all(|e| e.hashtag != 2 && e.log_odds.is_finite()));
        assert_eq!(out[0].cluster, 0);
        assert_eq!(out[0].hashtag, 1);
        assert_eq!(out[2].cluster, 1);
        assert_eq!(out[2].hashtag, 3);
    }
}
