use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read};

use super::store::EventStore;
use crate::error::{Error, Result};

/// Ideological terms, normalised for whole-token hashtag matching: lower
/// case, no leading `#`, inner whitespace removed so phrases match their
/// run-together hashtag form.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TermSet {
    terms: HashSet<String>,
}

impl TermSet {
    pub fn new<S: AsRef<str>>(terms: impl IntoIterator<Item = S>) -> Self {
        let terms = terms
            .into_iter()
            .map(|t| t.as_ref().trim().trim_start_matches('#').split_whitespace().collect::<String>().to_lowercase())
            .filter(|t| !t.is_empty())
            .collect();
        Self { terms }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn matches(&self, hashtag: &str) -> bool {
        self.terms.contains(hashtag)
    }
}

/// One term per line; blank lines and `//` comments are skipped.
pub fn read_terms<R: Read>(source: R) -> Result<TermSet> {
    let mut terms = Vec::new();
    for line in BufReader::new(source).lines() {
        let line = line.map_err(|e| Error::Data(format!("reading terms: {e}")))?;
        let t = line.trim();
        if !t.is_empty() && !t.starts_with("//") {
            terms.push(t.to_string());
        }
    }
    Ok(TermSet::new(terms))
}

/// Retained users and their bookkeeping.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UserIndex {
    /// External id of each retained user (dense id = position).
    pub names: Vec<String>,
    pub event_counts: Vec<u64>,
    pub match_counts: Vec<u64>,
    pub dropped_users: usize,
    pub dropped_events: usize,
}

impl UserIndex {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Index over every retweeter of `store`, without filtering.
    pub fn unfiltered(store: &EventStore) -> Self {
        Self {
            names: store.users.names().to_vec(),
            event_counts: store.user_event_counts(),
            match_counts: vec![0; store.users.len()],
            dropped_users: 0,
            dropped_events: 0,
        }
    }
}

/// Keeps users with at least `min_matches` term-matching retweets or
/// authored posts, and drops every event of the other retweeters.
pub fn filter_users(store: &mut EventStore, terms: &TermSet, min_matches: u64) -> Result<UserIndex> {
    if terms.is_empty() {
        return Err(Error::Config(vec!["term list is empty; the user filter would be vacuous".into()]));
    }
    if min_matches == 0 {
        return Err(Error::Config(vec!["min_matches must be at least 1".into()]));
    }
    let tag_hits: Vec<bool> = store.hashtags.names().iter().map(|t| terms.matches(t)).collect();
    let mut matches = vec![0u64; store.users.len()];
    let mut authored: HashSet<(u32, u32)> = HashSet::new();
    for e in 0..store.len() {
        if store.hashtags_of(e).iter().any(|&h| tag_hits[h as usize]) {
            matches[store.retweeters[e] as usize] += 1;
            authored.insert((store.influencers[e], store.posts[e]));
        }
    }
    for (influencer, _) in authored {
        if let Some(u) = store.users.get(store.influencer_names.name(influencer)) {
            matches[u as usize] += 1;
        }
    }
    let keep: Vec<bool> = matches.iter().map(|&m| m >= min_matches).collect();
    let before_users = store.users.len();
    let before_events = store.len();
    let kept_matches: Vec<u64> = matches.iter().zip(&keep).filter(|(_, &k)| k).map(|(&m, _)| m).collect();
    store.retain_retweeters(&keep);
    Ok(UserIndex {
        names: store.users.names().to_vec(),
        event_counts: store.user_event_counts(),
        match_counts: kept_matches,
        dropped_users: before_users - store.users.len(),
        dropped_events: before_events - store.len(),
    })
}
