//! Typed entity spans over captions.
//!
//! Offsets count Unicode scalar values, so `start..end` indexes
//! `caption.chars()`, never raw bytes.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{for_each_line, parse_object_line, Corpus};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EntityType {
    Person,
    Gpe,
    Loc,
    Org,
    Date,
    Time,
    Event,
    Norp,
    Fac,
}

impl EntityType {
    pub const ALL: [EntityType; 9] = [
        EntityType::Person,
        EntityType::Gpe,
        EntityType::Loc,
        EntityType::Org,
        EntityType::Date,
        EntityType::Time,
        EntityType::Event,
        EntityType::Norp,
        EntityType::Fac,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityType::Person => "PERSON",
            EntityType::Gpe => "GPE",
            EntityType::Loc => "LOC",
            EntityType::Org => "ORG",
            EntityType::Date => "DATE",
            EntityType::Time => "TIME",
            EntityType::Event => "EVENT",
            EntityType::Norp => "NORP",
            EntityType::Fac => "FAC",
        }
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EntityType::ALL.into_iter().find(|t| t.as_str() == s).ok_or_else(|| Error::UnknownLabel(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntitySpan {
    #[serde(rename = "label")]
    pub etype: EntityType,
    pub start: usize,
    pub end: usize,
    #[serde(rename = "text")]
    pub surface: String,
}

impl EntitySpan {
    pub fn new(etype: EntityType, start: usize, end: usize, surface: impl Into<String>) -> Self {
        Self { etype, start, end, surface: surface.into() }
    }
}

impl fmt::Display for EntitySpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}..{}]={:?}", self.etype, self.start, self.end, self.surface)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedCaption {
    #[serde(rename = "id")]
    pub record_id: u64,
    pub entities: Vec<EntitySpan>,
}

/// Substring of `s` between two char offsets, or `None` if out of range.
pub fn char_slice(s: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut indices = s.char_indices().map(|(b, _)| b).chain(std::iter::once(s.len()));
    let begin = indices.nth(start)?;
    let finish = if end == start { begin } else { indices.nth(end - start - 1)? };
    Some(&s[begin..finish])
}

/// Checks that spans are ordered, non-overlapping and slice-exact.
pub fn validate_spans(record_id: u64, caption: &str, spans: &[EntitySpan]) -> Result<()> {
    let mut prev_end = 0;
    for span in spans {
        let mismatch = || Error::SpanMismatch { id: record_id, span: span.to_string() };
        if span.start >= span.end || span.start < prev_end {
            return Err(mismatch());
        }
        match char_slice(caption, span.start, span.end) {
            Some(slice) if slice == span.surface => {}
            _ => return Err(mismatch()),
        }
        prev_end = span.end;
    }
    Ok(())
}

/// Validated entity annotations for a corpus. Records without an entry
/// have no entities.
#[derive(Clone, Debug, Default)]
pub struct Annotations {
    by_id: HashMap<u64, Vec<EntitySpan>>,
}

impl Annotations {
    pub fn from_captions(corpus: &Corpus, captions: Vec<AnnotatedCaption>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(captions.len());
        for ac in captions {
            insert_checked(&mut by_id, corpus, ac)?;
        }
        Ok(Self { by_id })
    }

    /// Entities for `record_id`, empty when unannotated.
    pub fn entities(&self, record_id: u64) -> &[EntitySpan] {
        self.by_id.get(&record_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn has_entities(&self, record_id: u64) -> bool {
        !self.entities(record_id).is_empty()
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }

    /// Writes one line per annotated record, ascending by id.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let mut ids: Vec<u64> = self.by_id.keys().copied().collect();
        ids.sort_unstable();
        for id in ids {
            let line = AnnotatedCaption { record_id: id, entities: self.by_id[&id].clone() };
            serde_json::to_writer(&mut out, &line).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(fs::File::create(path)?))
    }
}

fn insert_checked(by_id: &mut HashMap<u64, Vec<EntitySpan>>, corpus: &Corpus, ac: AnnotatedCaption) -> Result<()> {
    let record = corpus.get(ac.record_id).ok_or(Error::UnknownRecord(ac.record_id))?;
    validate_spans(ac.record_id, &record.caption, &ac.entities)?;
    if by_id.insert(ac.record_id, ac.entities).is_some() {
        return Err(Error::DuplicateId(ac.record_id));
    }
    Ok(())
}

pub fn load_annotations(path: impl AsRef<Path>, corpus: &Corpus) -> Result<Annotations> {
    let mut by_id = HashMap::new();
    for_each_line(path.as_ref(), |line, text| {
        let ac: AnnotatedCaption = parse_object_line(text, line, &["id", "entities"])?;
        insert_checked(&mut by_id, corpus, ac)
    })?;
    Ok(Annotations { by_id })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{NewsRecord, Split};

    fn corpus() -> Corpus {
        let records = [(1, "Alice visited Paris"), (2, "Zoë met Ingrid in Köln"), (3, "A quiet morning")]
            .into_iter()
            .map(|(id, caption)| NewsRecord {
                id,
                image_ref: id.to_string(),
                caption: caption.into(),
                topic: "world".into(),
                source: "bbc".into(),
                split: Split::Train,
            })
            .collect();
        Corpus::from_records(records).unwrap()
    }

    fn load(body: &str) -> Result<Annotations> {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        load_annotations(f.path(), &corpus())
    }

    #[test]
    fn aligned_span_accepted() {
        let a = load(r#"{"id":1,"entities":[{"label":"PERSON","start":0,"end":5,"text":"Alice"}]}"#).unwrap();
        assert_eq!(a.entities(1).len(), 1);
        assert!(a.entities(3).is_empty());
    }

    #[test]
    fn offsets_count_scalar_values() {
        let body = r#"{"id":2,"entities":[{"label":"PERSON","start":0,"end":3,"text":"Zoë"},{"label":"GPE","start":18,"end":22,"text":"Köln"}]}"#;
        let a = load(body).unwrap();
        assert_eq!(a.entities(2)[1].surface, "Köln");
    }

    #[test]
    fn wrong_surface_is_span_mismatch() {
        let r = load(r#"{"id":1,"entities":[{"label":"PERSON","start":0,"end":5,"text":"Bob"}]}"#);
        assert!(matches!(r, Err(Error::SpanMismatch { id: 1, .. })));
    }

    #[test]
    fn overlapping_spans_rejected() {
        let r = load(
            r#"{"id":1,"entities":[{"label":"PERSON","start":0,"end":5,"text":"Alice"},{"label":"PERSON","start":4,"end":6,"text":"e "}]}"#,
        );
        assert!(matches!(r, Err(Error::SpanMismatch { .. })));
    }

    #[test]
    fn unknown_record_rejected() {
        let r = load(r#"{"id":99,"entities":[]}"#);
        assert!(matches!(r, Err(Error::UnknownRecord(99))));
    }

    #[test]
    fn unknown_entity_label_is_malformed() {
        let r = load(r#"{"id":1,"entities":[{"label":"ANIMAL","start":0,"end":5,"text":"Alice"}]}"#);
        assert!(matches!(r, Err(Error::MalformedRecord { line: 1, .. })));
    }

    #[test]
    fn char_slice_bounds() {
        assert_eq!(char_slice("héllo", 1, 3), Some("él"));
        assert_eq!(char_slice("héllo", 0, 5), Some("héllo"));
        assert_eq!(char_slice("héllo", 5, 5), Some(""));
        assert_eq!(char_slice("héllo", 4, 6), None);
        assert_eq!(char_slice("héllo", 3, 2), None);
    }
}
