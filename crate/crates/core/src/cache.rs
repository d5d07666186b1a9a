//! Persisted top-k neighbour lists (`MFTK` files).
//!
//! ```text
//! magic "MFTK" | version u16 | k u32 | fingerprint u64 | sections u8
//! per section: query space u8 | candidate space u8 | count u64
//!     per entry: query id u64 | n u32 | n candidate ids u64
//! ```
//!
//! Lists are computed under [`CandidateFilter::standard`]. A lookup that adds
//! a narrower predicate only answers when the filtered prefix is provably
//! complete, and otherwise defers to a fresh scan, so a cache can speed
//! generation up but never alter its output.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::Corpus;
use crate::embedding::Modality;
use crate::error::{Error, Result};
use crate::index::{top_k, CandidateFilter, Stores, TopicIndex};
use crate::seed::{fnv1a64, mix};

pub const CACHE_MAGIC: [u8; 4] = *b"MFTK";
pub const CACHE_VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TopKCache {
    k: usize,
    fingerprint: u64,
    sections: BTreeMap<(Modality, Modality), HashMap<u64, Vec<u64>>>,
}

/// Digest of everything a cached list depends on.
pub fn inputs_fingerprint(corpus: &Corpus, stores: &Stores<'_>) -> u64 {
    let mut records: Vec<_> = corpus.iter().collect();
    records.sort_unstable_by_key(|r| r.id);
    let mut h = fnv1a64(b"mftk-inputs");
    for r in records {
        h = mix(h, r.id);
        h = mix(h, fnv1a64(r.topic.as_bytes()));
        h = mix(h, fnv1a64(r.caption.as_bytes()));
        h = mix(h, fnv1a64(r.image_ref.as_bytes()));
    }
    h = mix(h, stores.image.map_or(0, |s| s.fingerprint()));
    mix(h, stores.text.map_or(0, |s| s.fingerprint()))
}

impl TopKCache {
    /// Computes lists for every corpus record in each `(query, candidate)`
    /// space pair. Records with no admissible candidate get an empty list.
    pub fn build(
        corpus: &Corpus,
        index: &TopicIndex,
        stores: &Stores<'_>,
        spaces: &[(Modality, Modality)],
        k: usize,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("cache k must be at least 1".into()));
        }
        let mut sections = BTreeMap::new();
        for &(qs, cs) in spaces {
            stores.get(qs)?;
            stores.get(cs)?;
            let lists: Vec<(u64, Vec<u64>)> = corpus
                .records()
                .par_iter()
                .map(|record| {
                    let filter = CandidateFilter::standard(record, cs, corpus);
                    match top_k(record.id, qs, cs, index, stores, &filter, k) {
                        Ok(list) => Ok((record.id, list)),
                        Err(Error::NoCandidate(_)) => Ok((record.id, Vec::new())),
                        Err(e) => Err(e),
                    }
                })
                .collect::<Result<_>>()?;
            sections.insert((qs, cs), lists.into_iter().collect());
        }
        Ok(Self { k, fingerprint: inputs_fingerprint(corpus, stores), sections })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Fails with [`Error::CacheMismatch`] unless built from these inputs.
    pub fn check_inputs(&self, corpus: &Corpus, stores: &Stores<'_>) -> Result<()> {
        if inputs_fingerprint(corpus, stores) == self.fingerprint {
            Ok(())
        } else {
            Err(Error::CacheMismatch)
        }
    }

    pub fn list(&self, query_space: Modality, candidate_space: Modality, query_id: u64) -> Option<&[u64]> {
        self.sections.get(&(query_space, candidate_space))?.get(&query_id).map(Vec::as_slice)
    }

    /// The first `needed` cached candidates passing `extra`, when the cache
    /// can answer that exactly. An empty result means no candidate exists.
    pub fn lookup(
        &self,
        query_space: Modality,
        candidate_space: Modality,
        query_id: u64,
        needed: usize,
        extra: impl Fn(u64) -> bool,
    ) -> Option<Vec<u64>> {
        let list = self.list(query_space, candidate_space, query_id)?;
        let picked: Vec<u64> = list.iter().copied().filter(|&id| extra(id)).take(needed).collect();
        let complete = list.len() < self.k;
        (picked.len() == needed || complete).then_some(picked)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&CACHE_MAGIC);
        out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.k as u32).to_le_bytes());
        out.extend_from_slice(&self.fingerprint.to_le_bytes());
        out.push(self.sections.len() as u8);
        for (&(qs, cs), lists) in &self.sections {
            out.push(qs.to_byte());
            out.push(cs.to_byte());
            out.extend_from_slice(&(lists.len() as u64).to_le_bytes());
            let mut ids: Vec<u64> = lists.keys().copied().collect();
            ids.sort_unstable();
            for id in ids {
                let list = &lists[&id];
                out.extend_from_slice(&id.to_le_bytes());
                out.extend_from_slice(&(list.len() as u32).to_le_bytes());
                for c in list {
                    out.extend_from_slice(&c.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let found: [u8; 4] = r.take(4)?.try_into().unwrap();
        if found != CACHE_MAGIC {
            return Err(Error::BadMagic { expected: CACHE_MAGIC, found });
        }
        let version = r.u16()?;
        if version != CACHE_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let k = r.u32()? as usize;
        let fingerprint = r.u64()?;
        let n_sections = r.take(1)?[0];
        let mut sections = BTreeMap::new();
        for _ in 0..n_sections {
            let space = |b: u8| {
                Modality::from_byte(b).ok_or_else(|| Error::InvalidArgument(format!("unknown modality byte {b}")))
            };
            let qs = space(r.take(1)?[0])?;
            let cs = space(r.take(1)?[0])?;
            let count = r.u64()?;
            let mut lists = HashMap::new();
            for _ in 0..count {
                let id = r.u64()?;
                let n = r.u32()?;
                let list = (0..n).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
                lists.insert(id, list);
            }
            sections.insert((qs, cs), lists);
        }
        if r.pos != bytes.len() {
            return Err(Error::TrailingBytes(bytes.len() - r.pos));
        }
        Ok(Self { k, fingerprint, sections })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::TruncatedFile)?;
        let slice = self.bytes.get(self.pos..end).ok_or(Error::TruncatedFile)?;
        self.pos = end;
        Ok(slice)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
