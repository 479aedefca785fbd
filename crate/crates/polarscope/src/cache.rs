//! On-disk stage caches.
//!
//! Binary files share a 56-byte header, all integers little-endian:
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 8    | magic `PSCOPE\0\0`                      |
//! | 8      | 4    | format version (`1`)                    |
//! | 12     | 4    | kind: 1 decompositions, 2 embedding     |
//! | 16     | 8    | SVD seed                                |
//! | 24     | 32   | SHA-256 stage key (config hash chain)   |
//!
//! Floats are IEEE-754 `f64`, ids `u32`, counts `u64`, flags `u8`.
//! Matrices are stored column-major.
//!
//! **Decompositions** (`decompositions.bin`): `n_windows: u64`,
//! `k_window: u64`, then per valid window `anchor: i64`, `users: u64`,
//! `influencers: u64`, `effective_rank: u64`, `iterations: u64`,
//! `total_variance: f64`, `singular_values: [f64; k_window]`,
//! `user_ids: [u32; users]`, `influencer_ids: [u32; influencers]`,
//! `rotation: [f64; influencers * k_window]`, `scores: [f64; users * k_window]`.
//!
//! **Embedding** (`embedding.bin`): `n_windows: u64`, `k_window: u64`,
//! `k_sample: u64`, `rows: u64`, `plan_degenerate: u8`, `k_requested: u64`,
//! `reduced: u8`, `alignment_fallbacks: u64`; per planned window `anchor: i64`,
//! `first_day: i64`, `events: u64`, `users: u64`, `influencers: u64`,
//! `valid: u8`, `effective_rank: u64`, `iterations: u64`,
//! `total_variance: f64`, `singular_values: [f64; k_window]`; then
//! `column_means: [f64; k_window]`, `column_scales: [f64; k_window]`,
//! `n_constant: u64`, `constant_columns: [u64; n_constant]`,
//! `scree: [f64; k_window]`, `explained: [f64; k_sample]`,
//! `rotation: [f64; k_window * k_sample]`, `row_users: [u32; rows]`,
//! `row_windows: [u32; rows]`, `projections: [f64; rows * k_sample]`.
//!
//! JSON caches wrap a payload as `{"key": ..., "payload": ...}`.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use polarscope_core::linalg::Matrix;
use polarscope_core::spectral::WindowDecomposition;

use crate::embed::{Embedding, WindowInfo, WindowResult};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 8] = *b"PSCOPE\0\0";
pub const VERSION: u32 = 1;
pub const KIND_DECOMPOSITIONS: u32 = 1;
pub const KIND_EMBEDDING: u32 = 2;

/// Identifies what a cache file was computed from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Header {
    pub kind: u32,
    pub seed: u64,
    pub key: [u8; 32],
}

/// Decodes a hex stage key into raw bytes.
pub fn key_bytes(hex_key: &str) -> [u8; 32] {
    let mut out = [0u8; 32];
    if let Ok(v) = hex::decode(hex_key) {
        let n = v.len().min(32);
        out[..n].copy_from_slice(&v[..n]);
    }
    out
}

struct Out<W: Write>(W);

impl<W: Write> Out<W> {
    fn u8(&mut self, v: u8) -> io::Result<()> {
        self.0.write_all(&[v])
    }
    fn u32(&mut self, v: u32) -> io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn u64(&mut self, v: u64) -> io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn usize(&mut self, v: usize) -> io::Result<()> {
        self.u64(v as u64)
    }
    fn i64(&mut self, v: i64) -> io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn f64s(&mut self, v: &[f64]) -> io::Result<()> {
        for x in v {
            self.0.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }
    fn u32s(&mut self, v: &[u32]) -> io::Result<()> {
        for x in v {
            self.0.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }
    fn header(&mut self, h: &Header) -> io::Result<()> {
        self.0.write_all(&MAGIC)?;
        self.u32(VERSION)?;
        self.u32(h.kind)?;
        self.u64(h.seed)?;
        self.0.write_all(&h.key)
    }
}

struct In<R: Read>(R);

impl<R: Read> In<R> {
    fn bytes<const N: usize>(&mut self) -> io::Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0.read_exact(&mut b)?;
        Ok(b)
    }
    fn u8(&mut self) -> io::Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }
    fn u32(&mut self) -> io::Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn u64(&mut self) -> io::Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn usize(&mut self) -> io::Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| io::Error::new(io::ErrorKind::InvalidData, "count overflows usize"))
    }
    fn i64(&mut self) -> io::Result<i64> {
        Ok(i64::from_le_bytes(self.bytes()?))
    }
    fn f64s(&mut self, n: usize) -> io::Result<Vec<f64>> {
        let mut buf = vec![0u8; n * 8];
        self.0.read_exact(&mut buf)?;
        Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
    fn u32s(&mut self, n: usize) -> io::Result<Vec<u32>> {
        let mut buf = vec![0u8; n * 4];
        self.0.read_exact(&mut buf)?;
        Ok(buf.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect())
    }
    fn header(&mut self) -> io::Result<Header> {
        let magic: [u8; 8] = self.bytes()?;
        if magic != MAGIC {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "not a polarscope cache file"));
        }
        let version = self.u32()?;
        if version != VERSION {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("cache format version {version}, expected {VERSION}"),
            ));
        }
        Ok(Header {
            kind: self.u32()?,
            seed: self.u64()?,
            key: self.bytes()?,
        })
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(|f| BufWriter::with_capacity(1 << 20, f)).map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(|f| BufReader::with_capacity(1 << 20, f)).map_err(|e| Error::io(path, e))
}

fn check_kind(h: &Header, kind: u32, path: &Path) -> Result<()> {
    if h.kind != kind {
        return Err(Error::Data(format!("{}: cache kind {} where {kind} was expected", path.display(), h.kind)));
    }
    Ok(())
}

pub fn write_decompositions(path: &Path, header: &Header, windows: &[&WindowResult], k_window: usize) -> Result<()> {
    let mut o = Out(create(path)?);
    let res: io::Result<()> = (|| {
        o.header(header)?;
        o.usize(windows.len())?;
        o.usize(k_window)?;
        for w in windows {
            let d = &w.decomposition;
            o.i64(d.anchor)?;
            o.usize(d.users.len())?;
            o.usize(w.influencers.len())?;
            o.usize(d.effective_rank)?;
            o.usize(d.iterations)?;
            o.f64s(&[d.total_variance])?;
            o.f64s(&d.singular_values)?;
            o.u32s(&d.users)?;
            o.u32s(&w.influencers)?;
            o.f64s(d.rotation.as_slice())?;
            o.f64s(d.scores.as_slice())?;
        }
        o.0.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

pub fn read_decompositions(path: &Path) -> Result<(Header, Vec<WindowResult>)> {
    let mut r = In(open(path)?);
    let res: io::Result<(Header, Vec<WindowResult>)> = (|| {
        let h = r.header()?;
        let n = r.usize()?;
        let k = r.usize()?;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let anchor = r.i64()?;
            let n_users = r.usize()?;
            let n_infl = r.usize()?;
            let effective_rank = r.usize()?;
            let iterations = r.usize()?;
            let total_variance = r.f64s(1)?[0];
            let singular_values = r.f64s(k)?;
            let users = r.u32s(n_users)?;
            let influencers = r.u32s(n_infl)?;
            let rotation = Matrix::from_col_major(n_infl, k, r.f64s(n_infl * k)?);
            let scores = Matrix::from_col_major(n_users, k, r.f64s(n_users * k)?);
            out.push(WindowResult {
                decomposition: WindowDecomposition {
                    anchor,
                    users,
                    rotation,
                    singular_values,
                    scores,
                    effective_rank,
                    total_variance,
                    iterations,
                },
                influencers,
            });
        }
        Ok((h, out))
    })();
    let (h, out) = res.map_err(|e| Error::io(path, e))?;
    check_kind(&h, KIND_DECOMPOSITIONS, path)?;
    Ok((h, out))
}

pub fn write_embedding(path: &Path, header: &Header, e: &Embedding) -> Result<()> {
    let mut o = Out(create(path)?);
    let res: io::Result<()> = (|| {
        o.header(header)?;
        o.usize(e.windows.len())?;
        o.usize(e.k_window)?;
        o.usize(e.k_sample())?;
        o.usize(e.row_users.len())?;
        o.u8(e.plan_degenerate as u8)?;
        o.usize(e.k_requested)?;
        o.u8(e.reduced as u8)?;
        o.usize(e.alignment_fallbacks)?;
        for w in &e.windows {
            o.i64(w.anchor)?;
            o.i64(w.first_day)?;
            o.usize(w.events)?;
            o.usize(w.users)?;
            o.usize(w.influencers)?;
            o.u8(w.valid as u8)?;
            o.usize(w.effective_rank)?;
            o.usize(w.iterations)?;
            o.f64s(&[w.total_variance])?;
            o.f64s(&w.singular_values)?;
        }
        o.f64s(&e.column_means)?;
        o.f64s(&e.column_scales)?;
        o.usize(e.constant_columns.len())?;
        for &c in &e.constant_columns {
            o.usize(c)?;
        }
        o.f64s(&e.scree)?;
        o.f64s(&e.explained)?;
        o.f64s(e.rotation.as_slice())?;
        o.u32s(&e.row_users)?;
        o.u32s(&e.row_windows)?;
        o.f64s(e.projections.as_slice())?;
        o.0.flush()
    })();
    res.map_err(|err| Error::io(path, err))
}

pub fn read_embedding(path: &Path) -> Result<(Header, Embedding)> {
    let mut r = In(open(path)?);
    let res: io::Result<(Header, Embedding)> = (|| {
        let h = r.header()?;
        let n_windows = r.usize()?;
        let k_window = r.usize()?;
        let k = r.usize()?;
        let rows = r.usize()?;
        let plan_degenerate = r.u8()? != 0;
        let k_requested = r.usize()?;
        let reduced = r.u8()? != 0;
        let alignment_fallbacks = r.usize()?;
        let mut windows = Vec::with_capacity(n_windows);
        for _ in 0..n_windows {
            windows.push(WindowInfo {
                anchor: r.i64()?,
                first_day: r.i64()?,
                events: r.usize()?,
                users: r.usize()?,
                influencers: r.usize()?,
                valid: r.u8()? != 0,
                effective_rank: r.usize()?,
                iterations: r.usize()?,
                total_variance: r.f64s(1)?[0],
                singular_values: r.f64s(k_window)?,
            });
        }
        let column_means = r.f64s(k_window)?;
        let column_scales = r.f64s(k_window)?;
        let n_constant = r.usize()?;
        let constant_columns = (0..n_constant).map(|_| r.usize()).collect::<io::Result<_>>()?;
        let scree = r.f64s(k_window)?;
        let explained = r.f64s(k)?;
        let rotation = Matrix::from_col_major(k_window, k, r.f64s(k_window * k)?);
        let row_users = r.u32s(rows)?;
        let row_windows = r.u32s(rows)?;
        let projections = Matrix::from_col_major(rows, k, r.f64s(rows * k)?);
        Ok((
            h,
            Embedding {
                k_window,
                plan_degenerate,
                windows,
                row_users,
                row_windows,
                projections,
                rotation,
                scree,
                explained,
                column_means,
                column_scales,
                constant_columns,
                alignment_fallbacks,
                k_requested,
                reduced,
            },
        ))
    })();
    let (h, e) = res.map_err(|err| Error::io(path, err))?;
    check_kind(&h, KIND_EMBEDDING, path)?;
    Ok((h, e))
}

/// Reads only the header, to decide whether a binary cache is current.
pub fn read_header(path: &Path) -> Option<Header> {
    let f = File::open(path).ok()?;
    In(BufReader::new(f)).header().ok()
}

#[derive(Serialize, Deserialize)]
struct JsonCache<T> {
    key: String,
    payload: T,
}

pub fn write_json<T: Serialize>(path: &Path, key: &str, payload: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer(&mut w, &JsonCache { key: key.to_string(), payload })
        .map_err(|e| Error::io(path, io::Error::other(e)))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// The cached payload when the file exists and carries `key`.
pub fn read_json<T: DeserializeOwned>(path: &Path, key: &str) -> Option<T> {
    let f = File::open(path).ok()?;
    let c: JsonCache<T> = serde_json::from_reader(BufReader::new(f)).ok()?;
    (c.key == key).then_some(c.payload)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{embed, EmbedOptions};
    use crate::ingest::{EventStore, RetweetEvent};

    fn store() -> EventStore {
        let mut evs = Vec::new();
        for day in 0..12i64 {
            for u in 0..9u32 {
                for i in 0..4u32 {
                    if !(u + i + day as u32).is_multiple_of(3) {
                        evs.push(RetweetEvent {
                            timestamp: day * 86_400 + i64::from(u),
                            retweeter: format!("u{u}"),
                            influencer: format!("i{}", (i + u % 2) % 5),
                            post: format!("p{day}-{i}"),
                            hashtags: vec![],
                            text_hash: None,
                        });
                    }
                }
            }
        }
        EventStore::from_events(&evs)
    }

    fn opts() -> EmbedOptions {
        EmbedOptions {
            window_days: 7,
            k_window: 5,
            k_sample: 2,
            ..EmbedOptions::from_config(&Default::default())
        }
    }

    fn header(kind: u32) -> Header {
        Header { kind, seed: 7, key: key_bytes(&"ab".repeat(32)) }
    }

    #[test]
    fn embedding_round_trip() {
        let e = embed(&store(), &opts()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("embedding.bin");
        write_embedding(&path, &header(KIND_EMBEDDING), &e).unwrap();
        let (h, back) = read_embedding(&path).unwrap();
        assert_eq!(h, header(KIND_EMBEDDING));
        assert_eq!(back, e);
        assert_eq!(read_header(&path), Some(h));
    }

    #[test]
    fn decompositions_round_trip() {
        let s = store();
        let o = opts();
        let plan = s.plan_windows(o.window_days);
        let results = crate::embed::decompose_windows(&s, &plan, &o).unwrap();
        let valid: Vec<&WindowResult> = results.iter().flatten().collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("decompositions.bin");
        write_decompositions(&path, &header(KIND_DECOMPOSITIONS), &valid, o.k_window).unwrap();
        let (_, back) = read_decompositions(&path).unwrap();
        assert_eq!(back.len(), valid.len());
        for (a, b) in back.iter().zip(&valid) {
            assert_eq!(a.influencers, b.influencers);
            assert_eq!(a.decomposition.scores, b.decomposition.scores);
            assert_eq!(a.decomposition.rotation, b.decomposition.rotation);
            assert_eq!(a.decomposition.singular_values, b.decomposition.singular_values);
        }
        assert!(read_embedding(&path).is_err());
    }

    #[test]
    fn json_cache_keyed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        write_json(&path, "k1", &vec![1.5f64, 0.1 + 0.2]).unwrap();
        assert_eq!(read_json::<Vec<f64>>(&path, "k1"), Some(vec![1.5, 0.1 + 0.2]));
        assert_eq!(read_json::<Vec<f64>>(&path, "k2"), None);
    }
}
