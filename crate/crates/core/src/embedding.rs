//! Dense per-modality vector tables and the `MFEB` binary file format.
//!
//! ```text
//! offset  size        field
//! 0       4           magic "MFEB"
//! 4       2           format version (u16 LE)
//! 6       1           modality (0 = image, 1 = text)
//! 7       4           dim (u32 LE)
//! 11      8           count (u64 LE)
//! 19      8 * count   record ids (u64 LE)
//! ..      4 * count * dim  row-major f32 LE components
//! ```
//!
//! Vectors are L2-normalized on construction, so cosine similarity is a
//! plain dot product downstream.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::seed::{fnv1a64, mix, SplitMix64};

pub const EMBEDDING_MAGIC: [u8; 4] = *b"MFEB";
pub const EMBEDDING_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 1 + 4 + 8;

/// Vectors whose norm is already this close to 1 are stored untouched, which
/// keeps save/load byte-stable for files this crate wrote.
const RENORMALIZE_SLACK: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Image,
    Text,
}

impl Modality {
    pub fn to_byte(self) -> u8 {
        match self {
            Modality::Image => 0,
            Modality::Text => 1,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Modality::Image),
            1 => Some(Modality::Text),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Image => "image",
            Modality::Text => "text",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "image" => Ok(Modality::Image),
            "text" => Ok(Modality::Text),
            other => Err(Error::InvalidArgument(format!("unknown modality `{other}`"))),
        }
    }
}

/// An immutable table of unit vectors keyed by record id.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingStore {
    modality: Modality,
    dim: usize,
    ids: Vec<u64>,
    data: Vec<f32>,
    rows: HashMap<u64, usize>,
}

impl EmbeddingStore {
    /// Builds a store from row-major `data`, normalizing every row.
    pub fn from_rows(modality: Modality, dim: usize, ids: Vec<u64>, mut data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
        }
        if data.len() != ids.len() * dim {
            return Err(Error::InvalidArgument(format!(
                "{} components for {} rows of dim {dim}",
                data.len(),
                ids.len()
            )));
        }
        let mut rows = HashMap::with_capacity(ids.len());
        for (i, &id) in ids.iter().enumerate() {
            if rows.insert(id, i).is_some() {
                return Err(Error::DuplicateId(id));
            }
        }
        for (row, &id) in data.chunks_exact_mut(dim).zip(&ids) {
            normalize_row(row, id)?;
        }
        Ok(Self { modality, dim, ids, data, rows })
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn contains(&self, id: u64) -> bool {
        self.rows.contains_key(&id)
    }

    #[inline]
    pub fn vector(&self, id: u64) -> Option<&[f32]> {
        self.rows.get(&id).map(|&i| self.row(i))
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Stable 64-bit digest of the serialized store.
    pub fn fingerprint(&self) -> u64 {
        let mut h = fnv1a64(&self.header_bytes());
        for chunk in self.ids.chunks(4096) {
            let bytes: Vec<u8> = chunk.iter().flat_map(|id| id.to_le_bytes()).collect();
            h = mix(h, fnv1a64(&bytes));
        }
        for chunk in self.data.chunks(4096) {
            let bytes: Vec<u8> = chunk.iter().flat_map(|x| x.to_le_bytes()).collect();
            h = mix(h, fnv1a64(&bytes));
        }
        h
    }

    fn header_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN);
        out.extend_from_slice(&EMBEDDING_MAGIC);
        out.extend_from_slice(&EMBEDDING_VERSION.to_le_bytes());
        out.push(self.modality.to_byte());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.ids.len() as u64).to_le_bytes());
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.header_bytes();
        out.reserve(self.ids.len() * 8 + self.data.len() * 4);
        for id in &self.ids {
            out.extend_from_slice(&id.to_le_bytes());
        }
        for x in &self.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], expected_dim: Option<usize>) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::TruncatedFile);
        }
        let found: [u8; 4] = bytes[..4].try_into().unwrap();
        if found != EMBEDDING_MAGIC {
            return Err(Error::BadMagic { expected: EMBEDDING_MAGIC, found });
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::TruncatedFile);
        }
        let version = u16::from_le_bytes(bytes[4..6].try_into().unwrap());
        if version != EMBEDDING_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let modality = Modality::from_byte(bytes[6])
            .ok_or_else(|| Error::InvalidArgument(format!("unknown modality byte {}", bytes[6])))?;
        let dim = u32::from_le_bytes(bytes[7..11].try_into().unwrap()) as usize;
        let count = u64::from_le_bytes(bytes[11..19].try_into().unwrap());
        if let Some(expected) = expected_dim {
            if dim != expected {
                return Err(Error::DimMismatch { found: dim, expected });
            }
        }
        let count = usize::try_from(count).map_err(|_| Error::TruncatedFile)?;
        let ids_len = count.checked_mul(8).ok_or(Error::TruncatedFile)?;
        let data_len = count.checked_mul(dim).and_then(|n| n.checked_mul(4)).ok_or(Error::TruncatedFile)?;
        let needed = HEADER_LEN + ids_len + data_len;
        if bytes.len() < needed {
            return Err(Error::TruncatedFile);
        }
        if bytes.len() > needed {
            return Err(Error::TrailingBytes(bytes.len() - needed));
        }
        let body = &bytes[HEADER_LEN..];
        let ids: Vec<u64> =
            body[..ids_len].chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect();
        let data: Vec<f32> =
            body[ids_len..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        Self::from_rows(modality, dim, ids, data)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }
}

fn normalize_row(row: &mut [f32], id: u64) -> Result<()> {
    if row.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteVector(id));
    }
    let norm = row.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroVector(id));
    }
    if (norm - 1.0).abs() > RENORMALIZE_SLACK {
        for x in row.iter_mut() {
            *x = (f64::from(*x) / norm) as f32;
        }
    }
    Ok(())
}

pub fn load_embeddings(path: impl AsRef<Path>, expected_dim: Option<usize>) -> Result<EmbeddingStore> {
    let bytes = fs::read(path)?;
    EmbeddingStore::from_bytes(&bytes, expected_dim)
}

const IMAGE_STREAM: u64 = 0x494D_4147_4553_5452; // "IMAGESTR"
const TOKEN_STREAM: u64 = 0x544F_4B45_4E53_5452; // "TOKENSTR"
const CAPTION_STREAM: u64 = 0x4341_5054_494F_4E53; // "CAPTIONS"
const CAPTION_WEIGHT: f64 = 0.5;

/// Deterministic stand-in for a real encoder.
///
/// Image vectors are a pure function of `(seed, record id)`. Text vectors are
/// a pure function of `(seed, caption bytes)`: the sum of one pseudo-random
/// vector per whitespace token plus a smaller whole-caption term. Captions
/// sharing words therefore land near each other, and duplicate captions share
/// a vector. Rows are emitted in ascending id order.
pub fn mock_embed(corpus: &Corpus, dim: usize, modality: Modality, seed: u64) -> Result<EmbeddingStore> {
    if dim < 8 {
        return Err(Error::InvalidArgument(format!("mock embedding dim must be >= 8, got {dim}")));
    }
    let mut records: Vec<_> = corpus.iter().collect();
    records.sort_unstable_by_key(|r| r.id);
    let ids: Vec<u64> = records.iter().map(|r| r.id).collect();
    let rows: Vec<Vec<f32>> = records
        .par_iter()
        .map(|r| match modality {
            Modality::Image => image_vector(seed, r.id, dim),
            Modality::Text => text_vector(seed, &r.caption, dim),
        })
        .collect();
    let data: Vec<f32> = rows.into_iter().flatten().collect();
    EmbeddingStore::from_rows(modality, dim, ids, data)
}

fn accumulate(acc: &mut [f64], stream_seed: u64, weight: f64) {
    let mut g = SplitMix64::new(stream_seed);
    for x in acc.iter_mut() {
        *x += weight * g.next_signed_unit();
    }
}

fn finish(acc: Vec<f64>) -> Vec<f32> {
    let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
    acc.into_iter().map(|x| (x / norm) as f32).collect()
}

fn image_vector(seed: u64, id: u64, dim: usize) -> Vec<f32> {
    let mut acc = vec![0.0; dim];
    accumulate(&mut acc, mix(mix(seed, IMAGE_STREAM), id), 1.0);
    finish(acc)
}

fn text_vector(seed: u64, caption: &str, dim: usize) -> Vec<f32> {
    let mut acc = vec![0.0; dim];
    for token in caption.split_whitespace() {
        accumulate(&mut acc, mix(mix(seed, TOKEN_STREAM), fnv1a64(token.as_bytes())), 1.0);
    }
    accumulate(&mut acc, mix(mix(seed, CAPTION_STREAM), fnv1a64(caption.as_bytes())), CAPTION_WEIGHT);
    finish(acc)
}
