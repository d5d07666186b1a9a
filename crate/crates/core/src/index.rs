//! Topic partitioning and exact in-topic cosine retrieval.
//!
//! Candidates for a query are the other records of its topic bucket that pass
//! a [`CandidateFilter`]. Ranking is by descending cosine with ties broken by
//! ascending record id, so every result is reproducible by brute force.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};

use crate::corpus::{Corpus, NewsRecord};
use crate::embedding::{EmbeddingStore, Modality};
use crate::error::{Error, Result};

/// Every corpus record in exactly one bucket; buckets ascending by id.
#[derive(Clone, Debug, Default)]
pub struct TopicIndex {
    topics: Vec<String>,
    buckets: Vec<Vec<u64>>,
    bucket_of: HashMap<u64, usize>,
}

impl TopicIndex {
    pub fn build(corpus: &Corpus) -> Self {
        let mut grouped: BTreeMap<&str, Vec<u64>> = BTreeMap::new();
        for record in corpus.iter() {
            grouped.entry(record.topic.as_str()).or_default().push(record.id);
        }
        let mut topics = Vec::with_capacity(grouped.len());
        let mut buckets = Vec::with_capacity(grouped.len());
        let mut bucket_of = HashMap::with_capacity(corpus.len());
        for (i, (topic, mut ids)) in grouped.into_iter().enumerate() {
            ids.sort_unstable();
            for &id in &ids {
                bucket_of.insert(id, i);
            }
            topics.push(topic.to_string());
            buckets.push(ids);
        }
        Self { topics, buckets, bucket_of }
    }

    pub fn num_topics(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }

    pub fn topics(&self) -> impl Iterator<Item = (&str, &[u64])> {
        self.topics.iter().map(String::as_str).zip(self.buckets.iter().map(Vec::as_slice))
    }

    pub fn bucket(&self, topic: &str) -> Option<&[u64]> {
        self.topics.binary_search_by(|t| t.as_str().cmp(topic)).ok().map(|i| self.buckets[i].as_slice())
    }

    /// The bucket holding `id`, including `id` itself.
    pub fn bucket_of(&self, id: u64) -> Option<&[u64]> {
        self.bucket_of.get(&id).map(|&i| self.buckets[i].as_slice())
    }

    pub fn topic_of(&self, id: u64) -> Option<&str> {
        self.bucket_of.get(&id).map(|&i| self.topics[i].as_str())
    }
}

/// Dot product with `f64` accumulation. Both inputs must be unit vectors of
/// equal length for this to be a cosine.
#[inline]
pub(crate) fn dot(u: &[f32], v: &[f32]) -> f64 {
    const LANES: usize = 8;
    let mut acc = [0.0f64; LANES];
    let chunks_u = u.chunks_exact(LANES);
    let chunks_v = v.chunks_exact(LANES);
    let tail: f64 =
        chunks_u.remainder().iter().zip(chunks_v.remainder()).map(|(&a, &b)| f64::from(a) * f64::from(b)).sum();
    for (cu, cv) in chunks_u.zip(chunks_v) {
        for l in 0..LANES {
            acc[l] += f64::from(cu[l]) * f64::from(cv[l]);
        }
    }
    acc.iter().sum::<f64>() + tail
}

pub fn cosine(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimMismatch { found: v.len(), expected: u.len() });
    }
    Ok(dot(u, v).clamp(-1.0, 1.0))
}

type Predicate<'a> = Box<dyn Fn(u64) -> bool + Send + Sync + 'a>;

/// Admission test for candidates. The query id is always excluded.
pub struct CandidateFilter<'a> {
    query_id: u64,
    exclude_ids: HashSet<u64>,
    predicates: Vec<Predicate<'a>>,
}

impl<'a> CandidateFilter<'a> {
    pub fn for_query(query_id: u64) -> Self {
        Self { query_id, exclude_ids: HashSet::from([query_id]), predicates: Vec::new() }
    }

    /// Self-exclusion plus duplicate removal for the substituted modality:
    /// byte-identical captions for text candidates, identical image refs for
    /// image candidates.
    pub fn standard(query: &'a NewsRecord, candidate_space: Modality, corpus: &'a Corpus) -> Self {
        let filter = Self::for_query(query.id);
        match candidate_space {
            Modality::Text => {
                filter.with_predicate(move |id| corpus.get(id).is_some_and(|c| c.caption != query.caption))
            }
            Modality::Image => {
                filter.with_predicate(move |id| corpus.get(id).is_some_and(|c| c.image_ref != query.image_ref))
            }
        }
    }

    pub fn query_id(&self) -> u64 {
        self.query_id
    }

    pub fn exclude(mut self, id: u64) -> Self {
        self.exclude_ids.insert(id);
        self
    }

    pub fn with_predicate(mut self, predicate: impl Fn(u64) -> bool + Send + Sync + 'a) -> Self {
        self.predicates.push(Box::new(predicate));
        self
    }

    pub fn admits(&self, id: u64) -> bool {
        id != self.query_id && !self.exclude_ids.contains(&id) && self.predicates.iter().all(|p| p(id))
    }
}

/// Image and text stores addressed by one shared id space.
#[derive(Clone, Copy, Debug, Default)]
pub struct Stores<'a> {
    pub image: Option<&'a EmbeddingStore>,
    pub text: Option<&'a EmbeddingStore>,
}

impl<'a> Stores<'a> {
    pub fn new(image: Option<&'a EmbeddingStore>, text: Option<&'a EmbeddingStore>) -> Self {
        Self { image, text }
    }

    pub fn get(&self, space: Modality) -> Result<&'a EmbeddingStore> {
        match space {
            Modality::Image => self.image,
            Modality::Text => self.text,
        }
        .ok_or_else(|| Error::MissingInput { kind: "similarity search".into(), input: format!("{space} embeddings") })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoredCandidate {
    pub id: u64,
    pub score: f64,
}

/// Descending score, then ascending id.
#[inline]
fn rank_order(a: &ScoredCandidate, b: &ScoredCandidate) -> Ordering {
    b.score.total_cmp(&a.score).then(a.id.cmp(&b.id))
}

/// The `k` best admissible candidates with their cosine scores.
#[allow(clippy::too_many_arguments)]
pub fn top_k_scored(
    query_id: u64,
    query_space: Modality,
    candidate_space: Modality,
    index: &TopicIndex,
    stores: &Stores<'_>,
    filter: &CandidateFilter<'_>,
    k: usize,
) -> Result<Vec<ScoredCandidate>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let query_store = stores.get(query_space)?;
    let candidate_store = stores.get(candidate_space)?;
    if query_store.dim() != candidate_store.dim() {
        return Err(Error::DimMismatch { found: candidate_store.dim(), expected: query_store.dim() });
    }
    let query = query_store.vector(query_id).ok_or(Error::UnknownId(query_id))?;
    let bucket = index.bucket_of(query_id).ok_or(Error::UnknownId(query_id))?;

    let mut scored = Vec::with_capacity(bucket.len());
    for &id in bucket {
        if id == query_id || !filter.admits(id) {
            continue;
        }
        let v = candidate_store.vector(id).ok_or(Error::UnknownId(id))?;
        scored.push(ScoredCandidate { id, score: dot(query, v) });
    }
    if scored.is_empty() {
        return Err(Error::NoCandidate(query_id));
    }
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, rank_order);
        scored.truncate(k);
    }
    scored.sort_unstable_by(rank_order);
    Ok(scored)
}

/// Ids of the `k` best admissible candidates; shorter when fewer exist.
#[allow(clippy::too_many_arguments)]
pub fn top_k(
    query_id: u64,
    query_space: Modality,
    candidate_space: Modality,
    index: &TopicIndex,
    stores: &Stores<'_>,
    filter: &CandidateFilter<'_>,
    k: usize,
) -> Result<Vec<u64>> {
    Ok(top_k_scored(query_id, query_space, candidate_space, index, stores, filter, k)?
        .into_iter()
        .map(|c| c.id)
        .collect())
}

/// The admissible candidate at position `rank` (0 = most similar).
#[allow(clippy::too_many_arguments)]
pub fn nearest_candidate(
    query_id: u64,
    query_space: Modality,
    candidate_space: Modality,
    index: &TopicIndex,
    stores: &Stores<'_>,
    filter: &CandidateFilter<'_>,
    rank: usize,
) -> Result<u64> {
    let list = top_k(query_id, query_space, candidate_space, index, stores, filter, rank + 1)?;
    list.get(rank).copied().ok_or(Error::NoCandidate(query_id))
}
