//! Misinformer kinds, labels and generated training pairs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embedding::Modality;
use crate::error::{Error, Result};
use crate::seed::fnv1a64;

pub const DEFAULT_RETRY_BUDGET: u32 = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StrategyKind {
    RsC,
    RstC,
    RstI,
    RstAlt,
    CstC,
    CstI,
    CstAlt,
    RNest,
    ClipNestC,
    ClipNestI,
    ClipNestAlt,
}

/// Which modality a falsification substitutes (or, for entity swaps, which
/// similarity space selects the donor).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Caption,
    Image,
    Alternating,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 11] = [
        StrategyKind::RsC,
        StrategyKind::RstC,
        StrategyKind::RstI,
        StrategyKind::RstAlt,
        StrategyKind::CstC,
        StrategyKind::CstI,
        StrategyKind::CstAlt,
        StrategyKind::RNest,
        StrategyKind::ClipNestC,
        StrategyKind::ClipNestI,
        StrategyKind::ClipNestAlt,
    ];

    /// Display name, e.g. `CLIP-NESt-alt`.
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::RsC => "RS-C",
            StrategyKind::RstC => "RSt-C",
            StrategyKind::RstI => "RSt-I",
            StrategyKind::RstAlt => "RSt-alt",
            StrategyKind::CstC => "CSt-C",
            StrategyKind::CstI => "CSt-I",
            StrategyKind::CstAlt => "CSt-alt",
            StrategyKind::RNest => "R-NESt",
            StrategyKind::ClipNestC => "CLIP-NESt-C",
            StrategyKind::ClipNestI => "CLIP-NESt-I",
            StrategyKind::ClipNestAlt => "CLIP-NESt-alt",
        }
    }

    /// Lower-case command-line spelling, e.g. `clip-nest-alt`.
    pub fn cli_name(self) -> String {
        self.name().to_ascii_lowercase()
    }

    /// Stable per-kind word mixed into every per-record seed.
    pub fn tag(self) -> u64 {
        fnv1a64(self.name().as_bytes())
    }

    pub fn falsified_label(self) -> Label {
        if self.is_entity_swap() {
            Label::Nei
        } else {
            Label::Ooc
        }
    }

    pub fn is_entity_swap(self) -> bool {
        matches!(
            self,
            StrategyKind::RNest | StrategyKind::ClipNestC | StrategyKind::ClipNestI | StrategyKind::ClipNestAlt
        )
    }

    pub fn variant(self) -> Variant {
        match self {
            StrategyKind::RsC | StrategyKind::RstC | StrategyKind::CstC | StrategyKind::ClipNestC => Variant::Caption,
            StrategyKind::RstI | StrategyKind::CstI | StrategyKind::ClipNestI => Variant::Image,
            StrategyKind::RstAlt | StrategyKind::CstAlt | StrategyKind::ClipNestAlt => Variant::Alternating,
            StrategyKind::RNest => Variant::Caption,
        }
    }

    /// Embedding spaces a run may query.
    pub fn required_spaces(self) -> &'static [Modality] {
        match self {
            StrategyKind::CstC | StrategyKind::ClipNestC => &[Modality::Text],
            StrategyKind::CstI | StrategyKind::ClipNestI => &[Modality::Image],
            StrategyKind::CstAlt | StrategyKind::ClipNestAlt => &[Modality::Image, Modality::Text],
            _ => &[],
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.to_ascii_lowercase();
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.cli_name() == wanted)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown strategy `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Strategy {
    pub kind: StrategyKind,
    pub seed: u64,
    pub retry_budget: u32,
}

impl Strategy {
    pub fn new(kind: StrategyKind, seed: u64) -> Self {
        Self { kind, seed, retry_budget: DEFAULT_RETRY_BUDGET }
    }

    pub fn with_retry_budget(mut self, retry_budget: u32) -> Self {
        self.retry_budget = retry_budget;
        self
    }
}

/// Training label. Ordering is the emission order within a source record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Truthful,
    Ooc,
    Nei,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Truthful => "truthful",
            Label::Ooc => "ooc",
            Label::Nei => "nei",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "truthful" => Ok(Label::Truthful),
            "ooc" => Ok(Label::Ooc),
            "nei" => Ok(Label::Nei),
            _ => Err(Error::UnknownLabel(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub strategy: String,
    pub source_id: u64,
    pub donor_id: Option<u64>,
    pub seed: Option<u64>,
}

/// One training example. `image_id` names the record whose image is shown.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GeneratedPair {
    pub image_id: u64,
    pub caption: String,
    pub label: Label,
    pub provenance: Provenance,
}

impl GeneratedPair {
    pub fn truthful(strategy: &str, record_id: u64, caption: &str) -> Self {
        Self {
            image_id: record_id,
            caption: caption.to_string(),
            label: Label::Truthful,
            provenance: Provenance { strategy: strategy.to_string(), source_id: record_id, donor_id: None, seed: None },
        }
    }

    /// Canonical dataset order: source id, then label, then content.
    pub fn sort_key(&self) -> (u64, Label, u64, &str) {
        (self.provenance.source_id, self.label, self.image_id, &self.caption)
    }
}
