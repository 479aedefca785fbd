use std::collections::HashMap;
use std::io::Read;

use super::store::EventStore;
use crate::error::{Error, Result};

pub type ToxicityTable = HashMap<String, f64>;

/// Reads `post,score` rows. Scores outside `[0, 1]` and conflicting
/// duplicates are errors.
pub fn read_toxicity<R: Read>(source: R) -> Result<ToxicityTable> {
    let mut reader = csv::Reader::from_reader(source);
    let header = reader.headers().map_err(|e| Error::Data(format!("toxicity header: {e}")))?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Data(format!("toxicity file header lacks column `{name}`")))
    };
    let (post_col, score_col) = (col("post")?, col("score")?);
    let mut table = ToxicityTable::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Data(format!("toxicity line {line}: {e}")))?;
        let post = rec.get(post_col).unwrap_or("").trim();
        let raw = rec.get(score_col).unwrap_or("").trim();
        let score: f64 = raw
            .parse()
            .map_err(|_| Error::Data(format!("toxicity line {line}: score `{raw}` is not a number")))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::Data(format!("toxicity line {line}: score {score} outside [0, 1]")));
        }
        if let Some(prev) = table.insert(post.to_string(), score) {
            if prev != score {
                return Err(Error::Data(format!("post `{post}` has conflicting scores {prev} and {score}")));
            }
        }
    }
    Ok(table)
}

/// Toxicity for posts with enough retweets, indexed by post id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScoredPosts {
    pub scores: Vec<Option<f64>>,
    pub retweets: Vec<u32>,
    pub min_retweets: u32,
    /// Posts at or above the retweet floor.
    pub eligible: usize,
    pub scored: usize,
    /// Eligible posts without a score row.
    pub missing: Vec<String>,
}

impl ScoredPosts {
    pub fn coverage(&self) -> f64 {
        if self.eligible == 0 {
            1.0
        } else {
            self.scored as f64 / self.eligible as f64
        }
    }
}

/// Attaches scores to posts retweeted at least `min_retweets` times in the
/// (filtered) store.
pub fn join_toxicity(store: &EventStore, table: &ToxicityTable, min_retweets: u32) -> ScoredPosts {
    let mut retweets = vec![0u32; store.post_names.len()];
    for &p in &store.posts {
        retweets[p as usize] += 1;
    }
    let mut scores = vec![None; retweets.len()];
    let (mut eligible, mut scored) = (0, 0);
    let mut missing = Vec::new();
    for (p, &n) in retweets.iter().enumerate() {
        if n < min_retweets {
            continue;
        }
        eligible += 1;
        let name = store.post_names.name(p as u32);
        match table.get(name) {
            Some(&s) => {
                scores[p] = Some(s);
                scored += 1;
            }
            None => missing.push(name.to_string()),
        }
    }
    ScoredPosts {
        scores,
        retweets,
        min_retweets,
        eligible,
        scored,
        missing,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::RetweetEvent;

    fn store() -> EventStore {
        let mut evs = Vec::new();
        for (post, n) in [("ten", 10), ("nine", 9), ("fifteen", 15)] {
            for k in 0..n {
                evs.push(RetweetEvent {
                    timestamp: k,
                    retweeter: format!("u{k}"),
                    influencer: "x".into(),
                    post: post.into(),
                    hashtags: vec![],
                    text_hash: None,
                });
            }
        }
        EventStore::from_events(&evs)
    }

    #[test]
    fn floor_and_coverage() {
        let table = read_toxicity("post,score\nten,0.4\nnine,0.9\n".as_bytes()).unwrap();
        let s = store();
        let j = join_toxicity(&s, &table, 10);
        let id = |n: &str| s.post_names.get(n).unwrap() as usize;
        assert_eq!(j.scores[id("ten")], Some(0.4));
        assert_eq!(j.scores[id("nine")], None);
        assert_eq!(j.scores[id("fifteen")], None);
        assert_eq!(j.missing, vec!["fifteen"]);
        assert_eq!((j.eligible, j.scored), (2, 1));
    }

    #[test]
    fn out_of_range_and_conflicts_abort() {
        assert!(read_toxicity("post,score\na,1.2\n".as_bytes()).is_err());
        assert!(read_toxicity("post,score\na,0.2\na,0.3\n".as_bytes()).is_err());
        assert!(read_toxicity("post,score\na,0.2\na,0.2\n".as_bytes()).is_ok());
    }
}
