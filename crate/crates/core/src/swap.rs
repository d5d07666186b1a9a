//! Same-type named-entity substitution.
//!
//! Two sources of replacement surfaces exist: a per-(topic, type) pool for
//! random swapping, and a single donor caption for pairwise swapping between
//! similar records. Both produce a [`SwapResult`] whose caption differs from
//! the original only inside replaced spans.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use crate::annotation::{Annotations, EntitySpan, EntityType};
use crate::corpus::{Corpus, NewsRecord};
use crate::error::{Error, Result};
use crate::index::TopicIndex;
use crate::seed::rng_from_seed;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Replacement {
    pub span: EntitySpan,
    pub old_surface: String,
    pub new_surface: String,
    pub new_source_id: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SwapResult {
    pub falsified_caption: String,
    pub replacements: Vec<Replacement>,
}

/// Splices replacements into `caption`, right to left so earlier char
/// offsets stay valid. Spans must be sorted and non-overlapping.
pub fn apply_replacements(caption: &str, replacements: &[Replacement]) -> Result<String> {
    for pair in replacements.windows(2) {
        if pair[0].span.end > pair[1].span.start {
            return Err(Error::OverlappingSpans);
        }
    }
    let mut byte_at: Vec<usize> = caption.char_indices().map(|(b, _)| b).collect();
    byte_at.push(caption.len());
    let n_chars = byte_at.len() - 1;
    let mut out = caption.to_string();
    for r in replacements.iter().rev() {
        let (start, end) = (r.span.start, r.span.end);
        if start > end || end > n_chars {
            return Err(Error::SpanOutOfBounds { start, end, len: n_chars });
        }
        out.replace_range(byte_at[start]..byte_at[end], &r.new_surface);
    }
    Ok(out)
}

fn finish(record_id: u64, caption: &str, replacements: Vec<Replacement>, on_fail: Error) -> Result<SwapResult> {
    if replacements.is_empty() {
        return Err(on_fail);
    }
    let falsified_caption = apply_replacements(caption, &replacements)?;
    // Adjacent spans can in principle re-spell the original text.
    if falsified_caption == caption {
        log::debug!("swap for record {record_id} reproduced the original caption");
        return Err(on_fail);
    }
    Ok(SwapResult { falsified_caption, replacements })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoolEntry {
    pub surface: String,
    pub source_id: u64,
}

/// Multiset of surfaces for one (topic, type), in ascending source-id order.
#[derive(Clone, Debug, Default)]
pub struct PoolBucket {
    entries: Vec<PoolEntry>,
    counts: HashMap<String, usize>,
}

impl PoolBucket {
    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count(&self, surface: &str) -> usize {
        self.counts.get(surface).copied().unwrap_or(0)
    }

    /// Uniform draw over entries whose surface differs from `own`.
    fn draw_excluding(&self, own: &str, rng: &mut impl Rng) -> Option<&PoolEntry> {
        let admissible = self.entries.len() - self.count(own);
        if admissible == 0 {
            return None;
        }
        // Rejection sampling is uniform over the admissible entries; the
        // indexed scan covers pools dominated by `own`.
        for _ in 0..32 {
            let entry = &self.entries[rng.gen_range(0..self.entries.len())];
            if entry.surface != own {
                return Some(entry);
            }
        }
        let target = rng.gen_range(0..admissible);
        self.entries.iter().filter(|e| e.surface != own).nth(target)
    }
}

#[derive(Clone, Debug, Default)]
pub struct EntityPool {
    buckets: BTreeMap<(String, EntityType), PoolBucket>,
}

impl EntityPool {
    pub fn build(corpus: &Corpus, annotations: &Annotations, topic_index: &TopicIndex) -> Self {
        let mut buckets: BTreeMap<(String, EntityType), PoolBucket> = BTreeMap::new();
        for (topic, ids) in topic_index.topics() {
            for &id in ids {
                if !corpus.contains(id) {
                    continue;
                }
                for span in annotations.entities(id) {
                    let bucket = buckets.entry((topic.to_string(), span.etype)).or_default();
                    bucket.entries.push(PoolEntry { surface: span.surface.clone(), source_id: id });
                    *bucket.counts.entry(span.surface.clone()).or_default() += 1;
                }
            }
        }
        Self { buckets }
    }

    pub fn bucket(&self, topic: &str, etype: EntityType) -> Option<&PoolBucket> {
        self.buckets.get(&(topic.to_string(), etype))
    }

    /// Total pooled surfaces for a (topic, type); 0 when absent.
    pub fn size(&self, topic: &str, etype: EntityType) -> usize {
        self.bucket(topic, etype).map_or(0, PoolBucket::len)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, EntityType, &PoolBucket)> {
        self.buckets.iter().map(|((t, e), b)| (t.as_str(), *e, b))
    }
}

pub fn build_entity_pool(corpus: &Corpus, annotations: &Annotations, topic_index: &TopicIndex) -> EntityPool {
    EntityPool::build(corpus, annotations, topic_index)
}

/// Replaces every span that has an admissible same-topic, same-type
/// substitute with a uniform draw from the pool, excluding its own surface.
pub fn random_swap(record: &NewsRecord, spans: &[EntitySpan], pool: &EntityPool, seed: u64) -> Result<SwapResult> {
    let mut rng = rng_from_seed(seed);
    let mut replacements = Vec::new();
    for span in spans {
        let Some(bucket) = pool.bucket(&record.topic, span.etype) else {
            continue;
        };
        if let Some(entry) = bucket.draw_excluding(&span.surface, &mut rng) {
            replacements.push(Replacement {
                span: span.clone(),
                old_surface: span.surface.clone(),
                new_surface: entry.surface.clone(),
                new_source_id: entry.source_id,
            });
        }
    }
    finish(record.id, &record.caption, replacements, Error::NoAdmissibleReplacement(record.id))
}

/// Swaps entities of shared types from `donor` into `record`.
///
/// The i-th span of type T in `record` takes the `(i mod m)`-th T surface of
/// the donor, `m` being the donor's count of T. Types the donor lacks stay
/// as they are. Identical surfaces are not replacements.
pub fn pairwise_swap(
    record: &NewsRecord,
    record_spans: &[EntitySpan],
    donor: &NewsRecord,
    donor_spans: &[EntitySpan],
) -> Result<SwapResult> {
    let mut donor_by_type: HashMap<EntityType, Vec<&EntitySpan>> = HashMap::new();
    for span in donor_spans {
        donor_by_type.entry(span.etype).or_default().push(span);
    }
    let mut seen: HashMap<EntityType, usize> = HashMap::new();
    let mut replacements = Vec::new();
    for span in record_spans {
        let Some(donors) = donor_by_type.get(&span.etype) else {
            continue;
        };
        let i = seen.entry(span.etype).or_default();
        let donor_span = donors[*i % donors.len()];
        *i += 1;
        if donor_span.surface != span.surface {
            replacements.push(Replacement {
                span: span.clone(),
                old_surface: span.surface.clone(),
                new_surface: donor_span.surface.clone(),
                new_source_id: donor.id,
            });
        }
    }
    finish(
        record.id,
        &record.caption,
        replacements,
        Error::InadmissiblePair { source_id: record.id, donor_id: donor.id },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::AnnotatedCaption;
    use crate::corpus::Split;
    use EntityType::*;

    fn rec(id: u64, topic: &str, caption: &str) -> NewsRecord {
        NewsRecord {
            id,
            image_ref: id.to_string(),
            caption: caption.into(),
            topic: topic.into(),
            source: "s".into(),
            split: Split::Train,
        }
    }

    fn span(caption: &str, etype: EntityType, surface: &str) -> EntitySpan {
        let byte = caption.find(surface).unwrap();
        let start = caption[..byte].chars().count();
        EntitySpan::new(etype, start, start + surface.chars().count(), surface)
    }

    fn repl(caption: &str, etype: EntityType, old: &str, new: &str) -> Replacement {
        Replacement {
            span: span(caption, etype, old),
            old_surface: old.into(),
            new_surface: new.into(),
            new_source_id: 0,
        }
    }

    #[test]
    fn splice_identity_and_lengths() {
        let c = "Alice visited Paris";
        assert_eq!(apply_replacements(c, &[]).unwrap(), c);
        let out = apply_replacements(c, &[repl(c, Person, "Alice", "Bo"), repl(c, Gpe, "Paris", "Reykjavík")]).unwrap();
        assert_eq!(out, "Bo visited Reykjavík");
        assert_eq!(out.chars().count(), c.chars().count() - 5 - 5 + 2 + 9);
    }

    #[test]
    fn splice_rejects_overlap_and_bounds() {
        let c = "Alice visited Paris";
        let mut a = repl(c, Person, "Alice", "X");
        let b = a.clone();
        assert!(matches!(apply_replacements(c, &[a.clone(), b]), Err(Error::OverlappingSpans)));
        a.span.end = 40;
        assert!(matches!(apply_replacements(c, &[a]), Err(Error::SpanOutOfBounds { .. })));
    }

    #[test]
    fn pairwise_positional() {
        let ca = "Alice visited Paris in 2020";
        let cx = "Bob toured Berlin in 1999";
        let a = rec(1, "t", ca);
        let x = rec(2, "t", cx);
        let sa = vec![span(ca, Person, "Alice"), span(ca, Gpe, "Paris"), span(ca, Date, "2020")];
        let sx = vec![span(cx, Person, "Bob"), span(cx, Gpe, "Berlin"), span(cx, Date, "1999")];
        let r = pairwise_swap(&a, &sa, &x, &sx).unwrap();
        assert_eq!(r.falsified_caption, "Bob visited Berlin in 1999");
        assert_eq!(r.replacements.len(), 3);
    }

    #[test]
    fn pairwise_cycles_donor_surfaces() {
        let ca = "Ann, Ben and Cal met";
        let cx = "Dee and Eve";
        let a = rec(1, "t", ca);
        let x = rec(2, "t", cx);
        let sa = vec![span(ca, Person, "Ann"), span(ca, Person, "Ben"), span(ca, Person, "Cal")];
        let sx = vec![span(cx, Person, "Dee"), span(cx, Person, "Eve")];
        let r = pairwise_swap(&a, &sa, &x, &sx).unwrap();
        assert_eq!(r.falsified_caption, "Dee, Eve and Dee met");
    }

    #[test]
    fn pairwise_inadmissible_cases() {
        let a = rec(1, "t", "Alice spoke");
        let sa = vec![span("Alice spoke", Person, "Alice")];
        let x = rec(2, "t", "In Paris");
        let sx = vec![span("In Paris", Gpe, "Paris")];
        assert!(matches!(pairwise_swap(&a, &sa, &x, &sx), Err(Error::InadmissiblePair { .. })));
        let y = rec(3, "t", "Alice again");
        let sy = vec![span("Alice again", Person, "Alice")];
        assert!(matches!(pairwise_swap(&a, &sa, &y, &sy), Err(Error::InadmissiblePair { source_id: 1, donor_id: 3 })));
    }

    type Fixture<'a> = (u64, &'a str, &'a str, Vec<(EntityType, &'a str)>);

    fn pool_fixture(captions: &[Fixture<'_>]) -> (Corpus, Annotations, EntityPool) {
        let corpus = Corpus::from_records(captions.iter().map(|(id, t, c, _)| rec(*id, t, c)).collect()).unwrap();
        let acs = captions
            .iter()
            .map(|(id, _, c, ents)| AnnotatedCaption {
                record_id: *id,
                entities: ents.iter().map(|(e, s)| span(c, *e, s)).collect(),
            })
            .collect();
        let ann = Annotations::from_captions(&corpus, acs).unwrap();
        let idx = TopicIndex::build(&corpus);
        let pool = EntityPool::build(&corpus, &ann, &idx);
        (corpus, ann, pool)
    }

    #[test]
    fn pool_counts_multiset() {
        let (_, _, pool) = pool_fixture(&[
            (1, "t", "Alice ran", vec![(Person, "Alice")]),
            (2, "t", "Bob ran", vec![(Person, "Bob")]),
            (3, "t", "Alice won", vec![(Person, "Alice")]),
            (4, "u", "Carl", vec![(Person, "Carl")]),
        ]);
        let b = pool.bucket("t", Person).unwrap();
        assert_eq!(b.count("Alice"), 2);
        assert_eq!(b.count("Bob"), 1);
        assert_eq!(b.len(), 3);
        assert_eq!(pool.size("t", Date), 0);
    }

    #[test]
    fn random_swap_examples() {
        let (corpus, ann, pool) = pool_fixture(&[
            (1, "t", "Alice visited Paris", vec![(Person, "Alice"), (Gpe, "Paris")]),
            (2, "t", "Bob in Berlin", vec![(Person, "Bob"), (Gpe, "Berlin")]),
        ]);
        let a = corpus.get(1).unwrap();
        let r = random_swap(a, ann.entities(1), &pool, 99).unwrap();
        assert_eq!(r.falsified_caption, "Bob visited Berlin");
        assert_eq!(r, random_swap(a, ann.entities(1), &pool, 99).unwrap());
        assert!(r.replacements.iter().all(|x| x.new_source_id == 2));
    }

    #[test]
    fn random_swap_without_alternative_fails() {
        let (corpus, ann, pool) = pool_fixture(&[
            (1, "t", "Alice spoke", vec![(Person, "Alice")]),
            (2, "t", "Alice again", vec![(Person, "Alice")]),
        ]);
        let a = corpus.get(1).unwrap();
        assert!(matches!(random_swap(a, ann.entities(1), &pool, 1), Err(Error::NoAdmissibleReplacement(1))));
    }

    #[test]
    fn draw_is_uniform_over_admissible() {
        // Own surface dominates, so the fallback path is exercised too.
        let mut bucket = PoolBucket::default();
        for (i, s) in ["A", "A", "A", "A", "A", "A", "A", "A", "B", "C", "C"].iter().enumerate() {
            bucket.entries.push(PoolEntry { surface: s.to_string(), source_id: i as u64 });
            *bucket.counts.entry(s.to_string()).or_default() += 1;
        }
        let mut counts: HashMap<String, usize> = HashMap::new();
        for seed in 0..6000 {
            let mut rng = rng_from_seed(seed);
            let e = bucket.draw_excluding("A", &mut rng).unwrap();
            *counts.entry(e.surface.clone()).or_default() += 1;
        }
        assert!(!counts.contains_key("A"));
        let b = counts["B"] as f64 / 6000.0;
        assert!((b - 1.0 / 3.0).abs() < 0.03, "B frequency {b}");
    }
}
