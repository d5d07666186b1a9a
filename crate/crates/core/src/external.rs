//! Adapters for externally published datasets.
//!
//! NewsCLIPings and MEIR become labelled training pairs; the COSMOS test set
//! becomes single-caption evaluation items. COSMOS's second caption is never
//! read into an item.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::corpus::{for_each_line, parse_object_line, Corpus};
use crate::error::{Error, Result};
use crate::eval::{BinaryLabel, EvalItem};
use crate::strategy::{GeneratedPair, Label, Provenance};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExternalFormat {
    NewsClippings,
    Meir,
    CosmosTest,
}

impl ExternalFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            ExternalFormat::NewsClippings => "newsclippings",
            ExternalFormat::Meir => "meir",
            ExternalFormat::CosmosTest => "cosmos-test",
        }
    }

    /// Provenance strategy string for imported pairs.
    pub fn source_name(self) -> &'static str {
        match self {
            ExternalFormat::NewsClippings => "NewsCLIPings",
            ExternalFormat::Meir => "MEIR",
            ExternalFormat::CosmosTest => "COSMOS",
        }
    }
}

impl fmt::Display for ExternalFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExternalFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "newsclippings" | "nc" => Ok(ExternalFormat::NewsClippings),
            "meir" => Ok(ExternalFormat::Meir),
            "cosmos-test" | "cosmos" => Ok(ExternalFormat::CosmosTest),
            _ => Err(Error::UnsupportedFormat(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Imported {
    Pairs(Vec<GeneratedPair>),
    Items(Vec<EvalItem>),
}

impl Imported {
    pub fn len(&self) -> usize {
        match self {
            Imported::Pairs(p) => p.len(),
            Imported::Items(i) => i.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Reads an external file. NewsCLIPings stores ids only, so captions are
/// resolved through `corpus` when one is given and left empty otherwise.
pub fn import_external(format: ExternalFormat, path: impl AsRef<Path>, corpus: Option<&Corpus>) -> Result<Imported> {
    let path = path.as_ref();
    match format {
        ExternalFormat::NewsClippings => import_newsclippings(path, corpus).map(Imported::Pairs),
        ExternalFormat::Meir => import_meir(path).map(Imported::Pairs),
        ExternalFormat::CosmosTest => import_cosmos_test(path).map(Imported::Items),
    }
}

#[derive(Deserialize)]
struct NcFile {
    annotations: Vec<NcAnnotation>,
}

#[derive(Deserialize)]
struct NcAnnotation {
    id: u64,
    image_id: u64,
    falsified: bool,
}

fn import_newsclippings(path: &Path, corpus: Option<&Corpus>) -> Result<Vec<GeneratedPair>> {
    let text = fs::read_to_string(path)?;
    let file: NcFile =
        serde_json::from_str(&text).map_err(|e| Error::MalformedRecord { line: e.line(), reason: e.to_string() })?;
    file.annotations
        .into_iter()
        .map(|a| {
            let caption = match corpus {
                Some(c) => c.get(a.id).ok_or(Error::UnknownRecord(a.id))?.caption.clone(),
                None => String::new(),
            };
            Ok(GeneratedPair {
                image_id: a.image_id,
                caption,
                label: if a.falsified { Label::Ooc } else { Label::Truthful },
                provenance: Provenance {
                    strategy: ExternalFormat::NewsClippings.source_name().to_string(),
                    source_id: a.id,
                    donor_id: (a.image_id != a.id).then_some(a.image_id),
                    seed: None,
                },
            })
        })
        .collect()
}

#[derive(Deserialize)]
struct MeirRow {
    id: u64,
    image_id: u64,
    caption: String,
    manipulated: bool,
}

fn import_meir(path: &Path) -> Result<Vec<GeneratedPair>> {
    let mut pairs = Vec::new();
    for_each_line(path, |line, text| {
        let row: MeirRow = parse_object_line(text, line, &["id", "image_id", "caption", "manipulated"])?;
        pairs.push(GeneratedPair {
            image_id: row.image_id,
            caption: row.caption,
            label: if row.manipulated { Label::Nei } else { Label::Truthful },
            provenance: Provenance {
                strategy: ExternalFormat::Meir.source_name().to_string(),
                source_id: row.id,
                donor_id: None,
                seed: None,
            },
        });
        Ok(())
    })?;
    Ok(pairs)
}

#[derive(Deserialize)]
struct CosmosRow {
    img_local_path: String,
    caption1: String,
    context_label: u8,
}

fn import_cosmos_test(path: &Path) -> Result<Vec<EvalItem>> {
    let mut items = Vec::new();
    for_each_line(path, |line, text| {
        let row: CosmosRow = parse_object_line(text, line, &["img_local_path", "caption1", "context_label"])?;
        let true_label = match row.context_label {
            0 => BinaryLabel::Truthful,
            1 => BinaryLabel::Falsified,
            other => {
                return Err(Error::MalformedRecord {
                    line,
                    reason: format!("context_label must be 0 or 1, got {other}"),
                })
            }
        };
        items.push(EvalItem {
            id: items.len() as u64,
            image_id: row.img_local_path,
            caption: row.caption1,
            true_label,
        });
        Ok(())
    })?;
    Ok(items)
}
