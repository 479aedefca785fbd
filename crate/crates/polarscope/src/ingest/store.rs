use std::collections::HashMap;
use std::io::Read;

use polarscope_core::window::{day_index, plan_windows, WindowPlan, WindowSpec};
use polarscope_core::spectral::WindowIncidence;

use super::parse::{read_events, ParseOptions, ParseStats, RetweetEvent};
use crate::error::Result;

/// Bidirectional string ↔ dense id map.
#[derive(Clone, Debug, Default)]
pub struct Interner {
    ids: HashMap<String, u32>,
    names: Vec<String>,
}

impl Interner {
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.ids.insert(name.to_string(), id);
        self.names.push(name.to_string());
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn from_names(names: Vec<String>) -> Self {
        let ids = names.iter().enumerate().map(|(i, n)| (n.clone(), i as u32)).collect();
        Self { ids, names }
    }
}

/// Columnar, timestamp-sorted event storage. Retweeters, influencers, posts
/// and hashtags each have their own id space.
#[derive(Clone, Debug, Default)]
pub struct EventStore {
    pub timestamps: Vec<i64>,
    pub retweeters: Vec<u32>,
    pub influencers: Vec<u32>,
    pub posts: Vec<u32>,
    tag_offsets: Vec<u32>,
    tag_ids: Vec<u32>,
    pub users: Interner,
    pub influencer_names: Interner,
    pub post_names: Interner,
    pub hashtags: Interner,
}

impl EventStore {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn hashtags_of(&self, event: usize) -> &[u32] {
        &self.tag_ids[self.tag_offsets[event] as usize..self.tag_offsets[event + 1] as usize]
    }

    pub fn push(&mut self, ev: &RetweetEvent) {
        if self.tag_offsets.is_empty() {
            self.tag_offsets.push(0);
        }
        self.timestamps.push(ev.timestamp);
        self.retweeters.push(self.users.intern(&ev.retweeter));
        self.influencers.push(self.influencer_names.intern(&ev.influencer));
        self.posts.push(self.post_names.intern(&ev.post));
        for tag in &ev.hashtags {
            let id = self.hashtags.intern(tag);
            self.tag_ids.push(id);
        }
        self.tag_offsets.push(self.tag_ids.len() as u32);
    }

    /// Reads and sorts a whole event stream.
    pub fn read<R: Read>(source: R, opts: &ParseOptions) -> Result<(Self, ParseStats)> {
        let mut store = EventStore::default();
        let stats = read_events(source, opts, |ev| store.push(&ev))?;
        store.sort_by_time();
        Ok((store, stats))
    }

    pub fn from_events<'a>(events: impl IntoIterator<Item = &'a RetweetEvent>) -> Self {
        let mut store = EventStore::default();
        for ev in events {
            store.push(ev);
        }
        store.sort_by_time();
        store
    }

    /// Stable sort by timestamp, keeping file order among equal times.
    pub fn sort_by_time(&mut self) {
        if self.timestamps.windows(2).all(|w| w[0] <= w[1]) {
            return;
        }
        let mut order: Vec<u32> = (0..self.len() as u32).collect();
        order.sort_by_key(|&i| self.timestamps[i as usize]);
        self.apply_order(&order);
    }

    /// Keeps the listed events (in the given order) and remaps retweeters.
    fn apply_order(&mut self, order: &[u32]) {
        let pick = |v: &Vec<u32>| order.iter().map(|&i| v[i as usize]).collect::<Vec<u32>>();
        self.retweeters = pick(&self.retweeters);
        self.influencers = pick(&self.influencers);
        self.posts = pick(&self.posts);
        self.timestamps = order.iter().map(|&i| self.timestamps[i as usize]).collect();
        let mut offsets = Vec::with_capacity(order.len() + 1);
        let mut ids = Vec::with_capacity(self.tag_ids.len());
        offsets.push(0u32);
        for &i in order {
            ids.extend_from_slice(self.hashtags_of(i as usize));
            offsets.push(ids.len() as u32);
        }
        self.tag_offsets = offsets;
        self.tag_ids = ids;
    }

    /// Keeps events whose retweeter passes `keep`, renumbering retweeters
    /// densely in order of their old ids.
    pub fn retain_retweeters(&mut self, keep: &[bool]) {
        let mut remap = vec![u32::MAX; self.users.len()];
        let mut names = Vec::new();
        for (old, &k) in keep.iter().enumerate() {
            if k {
                remap[old] = names.len() as u32;
                names.push(self.users.name(old as u32).to_string());
            }
        }
        let order: Vec<u32> = (0..self.len() as u32).filter(|&i| keep[self.retweeters[i as usize] as usize]).collect();
        self.apply_order(&order);
        for r in &mut self.retweeters {
            *r = remap[*r as usize];
        }
        self.users = Interner::from_names(names);
    }

    pub fn days(&self) -> Vec<i64> {
        self.timestamps.iter().map(|&t| day_index(t)).collect()
    }

    pub fn plan_windows(&self, length_days: u32) -> WindowPlan {
        plan_windows(&self.days(), length_days)
    }

    pub fn incidence(&self, window: &WindowSpec) -> WindowIncidence {
        let pairs: Vec<(u32, u32)> = window
            .events
            .clone()
            .map(|i| (self.retweeters[i], self.influencers[i]))
            .collect();
        WindowIncidence::from_pairs(window.anchor, &pairs)
    }

    /// Events per retweeter.
    pub fn user_event_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.users.len()];
        for &u in &self.retweeters {
            counts[u as usize] += 1;
        }
        counts
    }
}
