//! Reading event logs, toxicity scores and term lists into compact,
//! timestamp-sorted columnar storage.

mod filter;
mod parse;
mod store;
mod toxicity;

pub use filter::{filter_users, read_terms, TermSet, UserIndex};
pub use parse::{parse_timestamp, read_events, EventFormat, ParseOptions, ParseStats, RetweetEvent};
pub use store::{EventStore, Interner};
pub use toxicity::{join_toxicity, read_toxicity, ScoredPosts, ToxicityTable};
