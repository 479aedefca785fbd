use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::model::ClusterAssignment;

/// Occurrences of one hashtag by cluster; `outliers` also collects unlabeled users.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HashtagCounts {
    pub hashtag: u32,
    pub per_cluster: Vec<u64>,
    pub outliers: u64,
}

impl HashtagCounts {
    pub fn total(&self) -> u64 {
        self.per_cluster.iter().sum::<u64>() + self.outliers
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterSummary {
    pub sizes: Vec<usize>,
    pub outliers: usize,
    pub events_per_cluster: Vec<u64>,
    pub outlier_events: u64,
    /// Most active members per cluster as `(user, events)`, busiest first.
    pub top_users: Vec<Vec<(u32, u64)>>,
    /// Ascending by hashtag id.
    pub hashtags: Vec<HashtagCounts>,
}

impl ClusterSummary {
    pub fn total_hashtag_occurrences(&self) -> u64 {
        self.hashtags.iter().map(HashtagCounts::total).sum()
    }

    /// The `top_n` most frequent hashtags of a cluster as `(hashtag, count)`.
    pub fn top_hashtags(&self, cluster: usize, top_n: usize) -> Vec<(u32, u64)> {
        let mut v: Vec<(u32, u64)> = self
            .hashtags
            .iter()
            .map(|h| (h.hashtag, h.per_cluster[cluster]))
            .filter(|&(_, c)| c > 0)
            .collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        v.truncate(top_n);
        v
    }
}

/// Tallies activity per cluster. `events` yields the acting user and the
/// hashtag ids of each event.
pub fn cluster_summary<'a, I>(assignment: &ClusterAssignment, events: I, top_n: usize) -> ClusterSummary
where
    I: IntoIterator<Item = (u32, &'a [u32])>,
{
    let k = assignment.n_clusters();
    let mut events_per_cluster = vec![0u64; k];
    let mut outlier_events = 0u64;
    let mut user_events: BTreeMap<u32, u64> = BTreeMap::new();
    let mut tags: BTreeMap<u32, HashtagCounts> = BTreeMap::new();
    for (user, hashtags) in events {
        let label = assignment.label_of(user).flatten();
        match label {
            Some(c) => {
                events_per_cluster[c as usize] += 1;
                *user_events.entry(user).or_default() += 1;
            }
            None => outlier_events += 1,
        }
        for &h in hashtags {
            let entry = tags.entry(h).or_insert_with(|| HashtagCounts {
                hashtag: h,
                per_cluster: vec![0; k],
                outliers: 0,
            });
            match label {
                Some(c) => entry.per_cluster[c as usize] += 1,
                None => entry.outliers += 1,
            }
        }
    }
    let mut top_users: Vec<Vec<(u32, u64)>> = vec![Vec::new(); k];
    for (user, count) in user_events {
        if let Some(Some(c)) = assignment.label_of(user) {
            top_users[c as usize].push((user, count));
        }
    }
    for list in &mut top_users {
        list.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        list.truncate(top_n);
    }
    ClusterSummary {
        sizes: assignment.sizes.clone(),
        outliers: assignment.outliers,
        events_per_cluster,
        outlier_events,
        top_users,
        hashtags: tags.into_values().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::Provenance;

    fn assignment() -> ClusterAssignment {
        ClusterAssignment {
            users: vec![0, 1, 2, 3],
            labels: vec![Some(0), Some(1), Some(0), None],
            provenance: vec![Provenance::Fit; 4],
            sizes: vec![2, 1],
            outliers: 1,
        }
    }

    #[test]
    fn hashtag_partition_identity() {
        let a = assignment();
        let evs: Vec<(u32, Vec<u32>)> = vec![
            (0, vec![7, 8]),
            (1, vec![7]),
            (2, vec![]),
            (3, vec![8]),
            (9, vec![7]), // unknown user
            (0, vec![7]),
        ];
        let s = cluster_summary(&a, evs.iter().map(|(u, h)| (*u, h.as_slice())), 5);
        let total: usize = evs.iter().map(|(_, h)| h.len()).sum();
        assert_eq!(s.total_hashtag_occurrences(), total as u64);
        assert_eq!(s.events_per_cluster, vec![3, 1]);
        assert_eq!(s.outlier_events, 2);
        assert_eq!(s.top_users[0], vec![(0, 2), (2, 1)]);
        assert_eq!(s.top_hashtags(0, 1), vec![(7, 2)]);
        assert!(s.sizes.iter().all(|&n| n > 0));
    }
}
