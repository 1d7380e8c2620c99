//! Binary embedding cache.
//!
//! Layout, all integers `u32` little-endian, all floats `f32` little-endian:
//!
//! ```text
//! "SVEC" | version=1 | d_clip | d_text
//! repeated until EOF:
//!   id_len | id bytes (UTF-8) | n_refs
//!   image[d_clip] | cand_clip[d_clip] | n_refs × ref_clip[d_clip]
//!   cand_text[d_text] | n_refs × ref_text[d_text]
//! ```

use std::path::Path;

use indexmap::IndexMap;

use super::EmbeddingSet;
use crate::error::{Error, Result};

pub const CACHE_MAGIC: &[u8; 4] = b"SVEC";
pub const CACHE_VERSION: u32 = 1;

/// Embedding records keyed by sample id, in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingCache {
    d_clip: usize,
    d_text: usize,
    records: IndexMap<String, EmbeddingSet>,
}

impl EmbeddingCache {
    pub fn new(d_clip: usize, d_text: usize) -> Self {
        Self {
            d_clip,
            d_text,
            records: IndexMap::new(),
        }
    }

    pub fn d_clip(&self) -> usize {
        self.d_clip
    }

    pub fn d_text(&self) -> usize {
        self.d_text
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Adds a record, checking it against the header widths.
    pub fn insert(&mut self, id: impl Into<String>, set: EmbeddingSet) -> Result<()> {
        let id = id.into();
        self.check_record(&id, &set)?;
        if self.records.contains_key(&id) {
            return Err(Error::Format(format!("duplicate cache id {id:?}")));
        }
        self.records.insert(id, set);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&EmbeddingSet> {
        self.records.get(id)
    }

    /// Looks up a record, failing with a validation error naming the id.
    pub fn require(&self, id: &str) -> Result<&EmbeddingSet> {
        self.get(id)
            .ok_or_else(|| Error::Validation(format!("embedding cache has no entry for id {id:?}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &EmbeddingSet)> {
        self.records.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// L2-normalizes every stored vector.
    pub fn normalize(&mut self) {
        for set in self.records.values_mut() {
            set.normalize();
        }
    }

    fn check_record(&self, id: &str, set: &EmbeddingSet) -> Result<()> {
        let clip_ok = set.image.len() == self.d_clip
            && set.cand_clip.len() == self.d_clip
            && set.refs_clip.iter().all(|r| r.len() == self.d_clip);
        let text_ok = set.cand_text.len() == self.d_text && set.refs_text.iter().all(|r| r.len() == self.d_text);
        if !clip_ok || !text_ok {
            return Err(Error::Format(format!(
                "record {id:?} does not match header widths d_clip={} d_text={}",
                self.d_clip, self.d_text
            )));
        }
        if set.refs_clip.len() != set.refs_text.len() || set.refs_clip.is_empty() {
            return Err(Error::Format(format!(
                "record {id:?} has mismatched or empty reference lists"
            )));
        }
        Ok(())
    }

    /// Serializes the cache to bytes.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(CACHE_MAGIC);
        put_u32(&mut out, CACHE_VERSION);
        put_u32(&mut out, to_u32(self.d_clip)?);
        put_u32(&mut out, to_u32(self.d_text)?);
        for (id, set) in &self.records {
            self.check_record(id, set)?;
            put_u32(&mut out, to_u32(id.len())?);
            out.extend_from_slice(id.as_bytes());
            put_u32(&mut out, to_u32(set.n_refs())?);
            put_f32s(&mut out, &set.image);
            put_f32s(&mut out, &set.cand_clip);
            for r in &set.refs_clip {
                put_f32s(&mut out, r);
            }
            put_f32s(&mut out, &set.cand_text);
            for r in &set.refs_text {
                put_f32s(&mut out, r);
            }
        }
        Ok(out)
    }

    /// Parses a cache from bytes, validating magic, version and structure.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut rd = Reader { bytes, pos: 0 };
        let magic = rd
            .take(4)
            .map_err(|_| Error::Corrupt("file shorter than header".into()))?;
        if magic != CACHE_MAGIC {
            return Err(Error::Format("bad magic, not an embedding cache".into()));
        }
        let version = rd.u32()?;
        if version != CACHE_VERSION {
            return Err(Error::Format(format!("unsupported cache version {version}")));
        }
        let d_clip = rd.u32()? as usize;
        let d_text = rd.u32()? as usize;
        if d_clip == 0 || d_text == 0 {
            return Err(Error::Format("header widths must be positive".into()));
        }
        let mut cache = EmbeddingCache::new(d_clip, d_text);
        while !rd.at_end() {
            let id_len = rd.u32()? as usize;
            let id = std::str::from_utf8(rd.take(id_len)?)
                .map_err(|_| Error::Format("record id is not UTF-8".into()))?
                .to_string();
            let n = rd.u32()? as usize;
            if n == 0 {
                return Err(Error::Format(format!("record {id:?} has zero references")));
            }
            let image = rd.f32s(d_clip)?;
            let cand_clip = rd.f32s(d_clip)?;
            let refs_clip = (0..n).map(|_| rd.f32s(d_clip)).collect::<Result<Vec<_>>>()?;
            let cand_text = rd.f32s(d_text)?;
            let refs_text = (0..n).map(|_| rd.f32s(d_text)).collect::<Result<Vec<_>>>()?;
            cache.insert(
                id,
                EmbeddingSet {
                    image,
                    cand_clip,
                    refs_clip,
                    cand_text,
                    refs_text,
                },
            )?;
        }
        Ok(cache)
    }
}

/// Writes `cache` to `path` atomically.
pub fn write_cache(path: impl AsRef<Path>, cache: &EmbeddingCache) -> Result<()> {
    crate::io::write_atomic(path.as_ref(), &cache.to_bytes()?)
}

/// Reads a cache exactly as stored (no normalization).
pub fn read_cache(path: impl AsRef<Path>) -> Result<EmbeddingCache> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    EmbeddingCache::from_bytes(&bytes)
}

fn to_u32(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Format(format!("{n} does not fit in u32")))
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f32s(out: &mut Vec<u8>, vals: &[f32]) {
    for v in vals {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn at_end(&self) -> bool {
        self.pos == self.bytes.len()
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Corrupt(format!("truncated: needed {n} bytes at offset {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.take(
            n.checked_mul(4)
                .ok_or_else(|| Error::Corrupt("length overflow".into()))?,
        )?;
        Ok(raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect())
    }
}
