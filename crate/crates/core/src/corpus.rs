//! Truthful news records and their newline-delimited JSON file format.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidArgument(format!("unknown split `{other}`"))),
        }
    }
}

/// One truthful image-caption pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewsRecord {
    pub id: u64,
    pub image_ref: String,
    pub caption: String,
    pub topic: String,
    pub source: String,
    pub split: Split,
}

const REQUIRED_FIELDS: [&str; 6] = ["id", "image_ref", "caption", "topic", "source", "split"];

/// An indexed, validated collection of [`NewsRecord`]s. Records keep the
/// order in which they were supplied.
#[derive(Clone, Debug, Default)]
pub struct Corpus {
    records: Vec<NewsRecord>,
    by_id: HashMap<u64, usize>,
}

impl Corpus {
    /// Validates and indexes `records`. Errors carry the 1-based position of
    /// the offending record as its line number.
    pub fn from_records(records: Vec<NewsRecord>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(records.len());
        for (i, record) in records.iter().enumerate() {
            validate_record(record, i + 1)?;
            if by_id.insert(record.id, i).is_some() {
                return Err(Error::DuplicateId(record.id));
            }
        }
        Ok(Self { records, by_id })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&NewsRecord> {
        self.by_id.get(&id).map(|&i| &self.records[i])
    }

    pub fn contains(&self, id: u64) -> bool {
        self.by_id.contains_key(&id)
    }

    pub fn records(&self) -> &[NewsRecord] {
        &self.records
    }

    pub fn iter(&self) -> impl Iterator<Item = &NewsRecord> {
        self.records.iter()
    }

    /// All record ids in ascending order.
    pub fn sorted_ids(&self) -> Vec<u64> {
        let mut ids: Vec<u64> = self.records.iter().map(|r| r.id).collect();
        ids.sort_unstable();
        ids
    }

    /// Records belonging to one split, in original order.
    pub fn subset(&self, split: Split) -> Corpus {
        let records: Vec<NewsRecord> = self.records.iter().filter(|r| r.split == split).cloned().collect();
        let by_id = records.iter().enumerate().map(|(i, r)| (r.id, i)).collect();
        Corpus { records, by_id }
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        for record in &self.records {
            serde_json::to_writer(&mut out, record).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = fs::File::create(path)?;
        self.write_to(BufWriter::new(file))
    }
}

fn validate_record(record: &NewsRecord, line: usize) -> Result<()> {
    if record.caption.trim().is_empty() {
        return Err(Error::MalformedRecord { line, reason: format!("record {} has an empty caption", record.id) });
    }
    if record.topic.is_empty() {
        return Err(Error::MalformedRecord { line, reason: format!("record {} has an empty topic", record.id) });
    }
    Ok(())
}

/// Parses one JSON object line, reporting absent fields by name before
/// attempting typed deserialization.
pub(crate) fn parse_object_line<T: serde::de::DeserializeOwned>(
    text: &str,
    line: usize,
    required: &[&str],
) -> Result<T> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| Error::MalformedRecord { line, reason: e.to_string() })?;
    let object =
        value.as_object().ok_or_else(|| Error::MalformedRecord { line, reason: "expected a JSON object".into() })?;
    if let Some(name) = required.iter().find(|name| !object.contains_key(**name)) {
        return Err(Error::MissingField { line, name: (*name).to_string() });
    }
    serde_json::from_value(value).map_err(|e| Error::MalformedRecord { line, reason: e.to_string() })
}

/// Iterates the non-blank lines of a newline-delimited file as
/// `(1-based line number, text)`.
pub(crate) fn for_each_line(path: &Path, mut f: impl FnMut(usize, &str) -> Result<()>) -> Result<()> {
    let reader = BufReader::new(fs::File::open(path)?);
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        f(i + 1, &line)?;
    }
    Ok(())
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let mut records = Vec::new();
    let mut by_id = HashMap::new();
    for_each_line(path.as_ref(), |line, text| {
        let record: NewsRecord = parse_object_line(text, line, &REQUIRED_FIELDS)?;
        validate_record(&record, line)?;
        if by_id.insert(record.id, records.len()).is_some() {
            return Err(Error::DuplicateId(record.id));
        }
        records.push(record);
        Ok(())
    })?;
    Ok(Corpus { records, by_id })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn line(id: u64, caption: &str, topic: &str) -> String {
        format!(
            r#"{{"id":{id},"image_ref":"img/{id}.jpg","caption":"{caption}","topic":"{topic}","source":"guardian","split":"train"}}"#
        )
    }

    #[test]
    fn loads_well_formed_file() {
        let body = [line(1, "A", "world"), line(2, "B", "world"), line(3, "C", "sport")].join("\n");
        let f = write_temp(&body);
        let corpus = load_corpus(f.path()).unwrap();
        assert_eq!(corpus.len(), 3);
        assert_eq!(corpus.get(3).unwrap().topic, "sport");
    }

    #[test]
    fn duplicate_id_rejected() {
        let body = [line(7, "A", "world"), line(7, "B", "world")].join("\n");
        let f = write_temp(&body);
        assert!(matches!(load_corpus(f.path()), Err(Error::DuplicateId(7))));
    }

    #[test]
    fn empty_caption_rejected_with_line() {
        let body = [line(1, "ok", "world"), line(2, "   ", "world")].join("\n");
        let f = write_temp(&body);
        match load_corpus(f.path()) {
            Err(Error::MalformedRecord { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_field_named() {
        let f = write_temp(r#"{"id":1,"image_ref":"x","caption":"c","source":"s","split":"train"}"#);
        match load_corpus(f.path()) {
            Err(Error::MissingField { line, name }) => {
                assert_eq!(line, 1);
                assert_eq!(name, "topic");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn garbage_line_is_malformed() {
        let f = write_temp("not json\n");
        assert!(matches!(load_corpus(f.path()), Err(Error::MalformedRecord { line: 1, .. })));
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let body = [line(5, "Alice visited Paris", "world"), line(2, "Caf\u{e9} opens", "food")].join("\n");
        let f = write_temp(&body);
        let corpus = load_corpus(f.path()).unwrap();
        let mut first = Vec::new();
        corpus.write_to(&mut first).unwrap();
        let g = write_temp(std::str::from_utf8(&first).unwrap());
        let mut second = Vec::new();
        load_corpus(g.path()).unwrap().write_to(&mut second).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn subset_keeps_only_split() {
        let mut records = Vec::new();
        for (id, split) in [(1, Split::Train), (2, Split::Val), (3, Split::Train)] {
            records.push(NewsRecord {
                id,
                image_ref: format!("{id}"),
                caption: "c".into(),
                topic: "t".into(),
                source: "s".into(),
                split,
            });
        }
        let corpus = Corpus::from_records(records).unwrap();
        let train = corpus.subset(Split::Train);
        assert_eq!(train.sorted_ids(), vec![1, 3]);
        assert!(!train.contains(2));
    }
}
