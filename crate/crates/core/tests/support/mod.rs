//! Independent oracles shared by the integration suites. Nothing here calls
//! the search, swap or splice code it is used to check.

#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use misinfo_forge::annotation::{Annotations, EntitySpan, EntityType};
use misinfo_forge::corpus::{Corpus, NewsRecord};
use misinfo_forge::embedding::{EmbeddingStore, Modality};

/// Plain sequential f64 cosine over unit vectors.
pub fn oracle_cosine(u: &[f32], v: &[f32]) -> f64 {
    let mut s = 0.0f64;
    for i in 0..u.len() {
        s += u[i] as f64 * v[i] as f64;
    }
    s
}

/// Every admissible in-topic candidate for `query`, best first, scanning
/// the whole corpus.
pub fn brute_force_ranking(
    corpus: &Corpus,
    query_store: &EmbeddingStore,
    candidate_store: &EmbeddingStore,
    candidate_space: Modality,
    query: &NewsRecord,
    extra: &dyn Fn(u64) -> bool,
) -> Vec<(u64, f64)> {
    let q = query_store.vector(query.id).unwrap();
    let mut out: Vec<(u64, f64)> = corpus
        .iter()
        .filter(|c| c.id != query.id && c.topic == query.topic)
        .filter(|c| match candidate_space {
            Modality::Text => c.caption != query.caption,
            Modality::Image => c.image_ref != query.image_ref,
        })
        .filter(|c| extra(c.id))
        .map(|c| (c.id, oracle_cosine(q, candidate_store.vector(c.id).unwrap())))
        .collect();
    out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    out
}

/// Rebuilds `caption` with each `(start, end, text)` segment replaced,
/// walking chars left to right.
pub fn splice_by_segments(caption: &str, edits: &[(usize, usize, String)]) -> String {
    let chars: Vec<char> = caption.chars().collect();
    let mut out = String::new();
    let mut at = 0;
    for (start, end, text) in edits {
        out.extend(&chars[at..*start]);
        out.push_str(text);
        at = *end;
    }
    out.extend(&chars[at..]);
    out
}

/// Same-topic, same-type surfaces, collected by direct scan.
pub struct SurfaceIndex {
    by_topic_type: HashMap<(String, EntityType), HashSet<String>>,
}

impl SurfaceIndex {
    pub fn scan(corpus: &Corpus, annotations: &Annotations) -> Self {
        let mut by_topic_type: HashMap<(String, EntityType), HashSet<String>> = HashMap::new();
        for r in corpus.iter() {
            for s in annotations.entities(r.id) {
                by_topic_type.entry((r.topic.clone(), s.etype)).or_default().insert(s.surface.clone());
            }
        }
        Self { by_topic_type }
    }

    pub fn contains(&self, topic: &str, etype: EntityType, surface: &str) -> bool {
        self.by_topic_type.get(&(topic.to_string(), etype)).is_some_and(|s| s.contains(surface))
    }

    /// Whether some same-topic, same-type surface differs from `surface`.
    pub fn has_alternative(&self, topic: &str, etype: EntityType, surface: &str) -> bool {
        self.by_topic_type.get(&(topic.to_string(), etype)).is_some_and(|s| s.iter().any(|x| x != surface))
    }
}

/// Splits a falsified caption along the source's entity spans using a regex
/// built from the untouched text between spans. Returns the text now
/// occupying each span, or `None` when the off-span text was altered.
pub fn recover_span_texts(original: &str, spans: &[EntitySpan], falsified: &str) -> Option<Vec<String>> {
    let chars: Vec<char> = original.chars().collect();
    let mut pattern = String::from("^");
    let mut at = 0;
    for s in spans {
        let lit: String = chars[at..s.start].iter().collect();
        pattern.push_str(&regex::escape(&lit));
        pattern.push_str("(.+?)");
        at = s.end;
    }
    let tail: String = chars[at..].iter().collect();
    pattern.push_str(&regex::escape(&tail));
    pattern.push('$');
    let re = regex::Regex::new(&pattern).unwrap();
    let caps = re.captures(falsified)?;
    Some((1..=spans.len()).map(|i| caps[i].to_string()).collect())
}

/// Where replacement surfaces are allowed to come from.
pub enum SwapSource<'a> {
    /// Any same-topic surface of the span's type.
    Pool(&'a SurfaceIndex),
    /// Surfaces of one donor record.
    Donor(&'a NewsRecord, &'a [EntitySpan]),
}

/// Checks an entity-swapped caption: it differs from the original, text
/// outside spans is unchanged, every changed span holds a surface of the
/// same type from the allowed source, and a donor shares an entity type.
pub fn check_swap(
    record: &NewsRecord,
    spans: &[EntitySpan],
    falsified: &str,
    source: &SwapSource<'_>,
) -> std::result::Result<(), String> {
    if spans.is_empty() {
        return Err("source has no entities".into());
    }
    if falsified == record.caption {
        return Err("caption unchanged".into());
    }
    let texts = recover_span_texts(&record.caption, spans, falsified)
        .ok_or_else(|| format!("off-span text altered: {:?} -> {:?}", record.caption, falsified))?;
    if let SwapSource::Donor(donor, donor_spans) = source {
        if donor.topic != record.topic {
            return Err(format!("donor {} is off-topic", donor.id));
        }
        let types: HashSet<EntityType> = donor_spans.iter().map(|s| s.etype).collect();
        if !spans.iter().any(|s| types.contains(&s.etype)) {
            return Err(format!("donor {} shares no entity type", donor.id));
        }
    }
    for (span, text) in spans.iter().zip(&texts) {
        if *text == span.surface {
            continue;
        }
        let ok = match source {
            SwapSource::Pool(index) => index.contains(&record.topic, span.etype, text),
            SwapSource::Donor(_, donor_spans) => {
                donor_spans.iter().any(|d| d.etype == span.etype && d.surface == *text)
            }
        };
        if !ok {
            return Err(format!("{:?} replaced by {text:?}, not an allowed {:?} surface", span.surface, span.etype));
        }
    }
    Ok(())
}

/// The caption the pairwise rule should produce, or `None` when the pair is
/// inadmissible.
pub fn expected_pairwise(record: &NewsRecord, spans: &[EntitySpan], donor_spans: &[EntitySpan]) -> Option<String> {
    let mut edits = Vec::new();
    let mut used: HashMap<EntityType, usize> = HashMap::new();
    for s in spans {
        let of_type: Vec<&EntitySpan> = donor_spans.iter().filter(|d| d.etype == s.etype).collect();
        if of_type.is_empty() {
            continue;
        }
        let i = used.entry(s.etype).or_insert(0);
        let pick = of_type[*i % of_type.len()];
        *i += 1;
        edits.push((s.start, s.end, pick.surface.clone()));
    }
    let out = splice_by_segments(&record.caption, &edits);
    (out != record.caption).then_some(out)
}
