use std::io::{BufRead, BufReader, Read};
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};

/// One retweet as it appears in the input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RetweetEvent {
    pub timestamp: i64,
    pub retweeter: String,
    pub influencer: String,
    pub post: String,
    pub hashtags: Vec<String>,
    pub text_hash: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventFormat {
    Csv,
    Jsonl,
}

impl EventFormat {
    /// Guesses from a file extension (`.jsonl`/`.ndjson`/`.json`, otherwise CSV).
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "ndjson" | "json") => EventFormat::Jsonl,
            _ => EventFormat::Csv,
        }
    }
}

impl FromStr for EventFormat {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(EventFormat::Csv),
            "jsonl" => Ok(EventFormat::Jsonl),
            other => Err(format!("unknown event format `{other}` (expected csv or jsonl)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParseOptions {
    pub format: EventFormat,
    /// Largest tolerated fraction of malformed rows.
    pub malformed_tolerance: f64,
    /// Inclusive lower and exclusive upper timestamp bounds.
    pub start: Option<i64>,
    pub end: Option<i64>,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            format: EventFormat::Csv,
            malformed_tolerance: 0.01,
            start: None,
            end: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ParseStats {
    pub rows: usize,
    pub accepted: usize,
    pub malformed: usize,
    pub self_retweets: usize,
    pub out_of_interval: usize,
    /// Line numbers (1-based, header included) of the first malformed rows.
    pub first_malformed: Vec<usize>,
}

/// Unix seconds or an RFC 3339 date-time.
pub fn parse_timestamp(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(secs) = s.parse::<i64>() {
        return Some(secs);
    }
    chrono::DateTime::parse_from_rfc3339(s).ok().map(|t| t.timestamp())
}

fn normalize_hashtag(raw: &str) -> Option<Option<String>> {
    let t = raw.trim().trim_start_matches('#');
    if t.is_empty() {
        return Some(None);
    }
    if t.chars().any(char::is_whitespace) {
        return None;
    }
    Some(Some(t.to_lowercase()))
}

fn split_hashtags<'a>(items: impl Iterator<Item = &'a str>) -> Option<Vec<String>> {
    let mut out = Vec::new();
    for item in items {
        if let Some(tag) = normalize_hashtag(item)? {
            out.push(tag);
        }
    }
    Some(out)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonTimestamp {
    Int(i64),
    Text(String),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonHashtags {
    List(Vec<String>),
    Joined(String),
}

#[derive(Deserialize)]
struct JsonRow {
    timestamp: JsonTimestamp,
    retweeter: String,
    influencer: String,
    post: String,
    #[serde(default)]
    hashtags: Option<JsonHashtags>,
    #[serde(default)]
    text_hash: Option<String>,
}

fn event_from_json(line: &str) -> Option<RetweetEvent> {
    let row: JsonRow = serde_json::from_str(line).ok()?;
    let timestamp = match row.timestamp {
        JsonTimestamp::Int(v) => v,
        JsonTimestamp::Text(s) => parse_timestamp(&s)?,
    };
    let hashtags = match row.hashtags {
        None => Vec::new(),
        Some(JsonHashtags::List(v)) => split_hashtags(v.iter().map(String::as_str))?,
        Some(JsonHashtags::Joined(s)) => split_hashtags(s.split(';'))?,
    };
    valid_ids(RetweetEvent {
        timestamp,
        retweeter: row.retweeter,
        influencer: row.influencer,
        post: row.post,
        hashtags,
        text_hash: row.text_hash,
    })
}

fn valid_ids(ev: RetweetEvent) -> Option<RetweetEvent> {
    let ok = |s: &str| !s.trim().is_empty();
    (ok(&ev.retweeter) && ok(&ev.influencer) && ok(&ev.post)).then_some(ev)
}

struct CsvColumns {
    timestamp: usize,
    retweeter: usize,
    influencer: usize,
    post: usize,
    hashtags: Option<usize>,
    text_hash: Option<usize>,
}

impl CsvColumns {
    fn from_header(header: &csv::StringRecord) -> Result<Self> {
        let find = |name: &str| header.iter().position(|h| h.trim() == name);
        let need = |name: &str| find(name).ok_or_else(|| Error::Data(format!("event file header lacks column `{name}`")));
        Ok(Self {
            timestamp: need("timestamp")?,
            retweeter: need("retweeter")?,
            influencer: need("influencer")?,
            post: need("post")?,
            hashtags: find("hashtags"),
            text_hash: find("text_hash"),
        })
    }

    fn event(&self, rec: &csv::StringRecord) -> Option<RetweetEvent> {
        let hashtags = match self.hashtags.and_then(|i| rec.get(i)) {
            Some(s) => split_hashtags(s.split(';'))?,
            None => Vec::new(),
        };
        valid_ids(RetweetEvent {
            timestamp: parse_timestamp(rec.get(self.timestamp)?)?,
            retweeter: rec.get(self.retweeter)?.trim().to_string(),
            influencer: rec.get(self.influencer)?.trim().to_string(),
            post: rec.get(self.post)?.trim().to_string(),
            hashtags,
            text_hash: self.text_hash.and_then(|i| rec.get(i)).filter(|s| !s.is_empty()).map(str::to_string),
        })
    }
}

/// Streams events from `source` into `sink` in file order. Self-retweets and
/// events outside the interval are counted and skipped; malformed rows are
/// counted and fail the read once they exceed the tolerance.
pub fn read_events<R: Read>(source: R, opts: &ParseOptions, mut sink: impl FnMut(RetweetEvent)) -> Result<ParseStats> {
    let mut stats = ParseStats::default();
    let mut handle = |stats: &mut ParseStats, line: usize, parsed: Option<RetweetEvent>| {
        stats.rows += 1;
        let Some(ev) = parsed else {
            stats.malformed += 1;
            if stats.first_malformed.len() < 10 {
                stats.first_malformed.push(line);
            }
            return;
        };
        if ev.retweeter == ev.influencer {
            stats.self_retweets += 1;
        } else if opts.start.is_some_and(|s| ev.timestamp < s) || opts.end.is_some_and(|e| ev.timestamp >= e) {
            stats.out_of_interval += 1;
        } else {
            stats.accepted += 1;
            sink(ev);
        }
    };
    match opts.format {
        EventFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
            let header = reader.headers().map_err(|e| Error::Data(format!("unreadable event header: {e}")))?.clone();
            if header.is_empty() {
                return Ok(stats);
            }
            let cols = CsvColumns::from_header(&header)?;
            let mut rec = csv::StringRecord::new();
            loop {
                let line = reader.position().line() as usize;
                match reader.read_record(&mut rec) {
                    Ok(false) => break,
                    Ok(true) => {
                        let parsed = if rec.len() == header.len() { cols.event(&rec) } else { None };
                        handle(&mut stats, line, parsed);
                    }
                    Err(e) if e.is_io_error() => return Err(Error::Data(format!("reading events: {e}"))),
                    Err(_) => handle(&mut stats, line, None),
                }
            }
        }
        EventFormat::Jsonl => {
            let reader = BufReader::new(source);
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(|e| Error::Data(format!("reading events: {e}")))?;
                if line.trim().is_empty() {
                    continue;
                }
                handle(&mut stats, i + 1, event_from_json(&line));
            }
        }
    }
    if stats.rows > 0 && stats.malformed as f64 > opts.malformed_tolerance * stats.rows as f64 {
        return Err(Error::Malformed {
            bad: stats.malformed,
            total: stats.rows,
            rows: stats.first_malformed.clone(),
        });
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn collect(input: &str, format: EventFormat) -> (Vec<RetweetEvent>, ParseStats) {
        let mut out = Vec::new();
        let opts = ParseOptions { format, ..ParseOptions::default() };
        let stats = read_events(input.as_bytes(), &opts, |e| out.push(e)).unwrap();
        (out, stats)
    }

    #[test]
    fn csv_row_maps_fields() {
        let (evs, stats) = collect(
            "timestamp,retweeter,influencer,post,hashtags\n2021-01-05T00:00:00Z,u1,i1,p1,\"covid;vaccine\"\n",
            EventFormat::Csv,
        );
        assert_eq!(stats.accepted, 1);
        assert_eq!(
            evs[0],
            RetweetEvent {
                timestamp: 1_609_804_800,
                retweeter: "u1".into(),
                influencer: "i1".into(),
                post: "p1".into(),
                hashtags: vec!["covid".into(), "vaccine".into()],
                text_hash: None,
            }
        );
    }

    #[test]
    fn self_retweet_dropped() {
        let (evs, stats) = collect("timestamp,retweeter,influencer,post,hashtags\n5,u1,u1,p1,\n", EventFormat::Csv);
        assert!(evs.is_empty());
        assert_eq!(stats.self_retweets, 1);
    }

    #[test]
    fn empty_input() {
        let (evs, stats) = collect("", EventFormat::Csv);
        assert!(evs.is_empty());
        assert_eq!(stats.accepted, 0);
        let (evs, _) = collect("", EventFormat::Jsonl);
        assert!(evs.is_empty());
    }

    #[test]
    fn jsonl_accepts_lists_and_joined() {
        let input = concat!(
            r##"{"timestamp":1609804800,"retweeter":"a","influencer":"b","post":"p","hashtags":["#Covid","vaccine"]}"##,
            "\n",
            r#"{"timestamp":"2021-01-05T00:00:00Z","retweeter":"a","influencer":"c","post":"q","hashtags":"x;y"}"#,
            "\n"
        );
        let (evs, _) = collect(input, EventFormat::Jsonl);
        assert_eq!(evs[0].hashtags, vec!["covid", "vaccine"]);
        assert_eq!(evs[1].timestamp, 1_609_804_800);
        assert_eq!(evs[1].hashtags, vec!["x", "y"]);
    }

    #[test]
    fn malformed_rows_over_tolerance_abort_with_line_numbers() {
        let mut input = String::from("timestamp,retweeter,influencer,post,hashtags\n");
        for i in 0..20 {
            if i % 5 == 0 {
                input.push_str("not-a-time,u,i,p,\n");
            } else {
                input.push_str("10,u,i,p,\n");
            }
        }
        let opts = ParseOptions::default();
        match read_events(input.as_bytes(), &opts, |_| {}) {
            Err(Error::Malformed { bad, total, rows }) => {
                assert_eq!((bad, total), (4, 20));
                assert_eq!(rows, vec![2, 7, 12, 17]);
            }
            other => panic!("unexpected {other:?}"),
        }
        let lenient = ParseOptions { malformed_tolerance: 0.25, ..opts };
        assert_eq!(read_events(input.as_bytes(), &lenient, |_| {}).unwrap().malformed, 4);
    }

    #[test]
    fn hashtag_with_space_is_malformed() {
        let opts = ParseOptions { malformed_tolerance: 1.0, ..ParseOptions::default() };
        let stats = read_events("timestamp,retweeter,influencer,post,hashtags\n1,a,b,p,two words\n".as_bytes(), &opts, |_| {}).unwrap();
        assert_eq!(stats.malformed, 1);
    }
}
