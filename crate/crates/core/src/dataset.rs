//! Dataset files, manifests, class statistics and hybrid combination.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{for_each_line, parse_object_line, Split};
use crate::error::{Error, Result};
use crate::seed::{fnv1a64, mix, rng_from_seed};
use crate::strategy::{GeneratedPair, Label};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub truthful: usize,
    pub ooc: usize,
    pub nei: usize,
}

impl ClassCounts {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = &'a GeneratedPair>) -> Self {
        let mut c = Self::default();
        for p in pairs {
            c.add(p.label);
        }
        c
    }

    pub fn add(&mut self, label: Label) {
        match label {
            Label::Truthful => self.truthful += 1,
            Label::Ooc => self.ooc += 1,
            Label::Nei => self.nei += 1,
        }
    }

    pub fn get(&self, label: Label) -> usize {
        match label {
            Label::Truthful => self.truthful,
            Label::Ooc => self.ooc,
            Label::Nei => self.nei,
        }
    }

    pub fn falsified(&self) -> usize {
        self.ooc + self.nei
    }

    pub fn total(&self) -> usize {
        self.truthful + self.ooc + self.nei
    }
}

/// Run description recorded next to every emitted dataset.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub strategy: String,
    pub split: Option<Split>,
    pub seed: Option<u64>,
    pub retry_budget: Option<u32>,
    pub balance: String,
    pub skipped: usize,
    pub config: Option<serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub strategy: String,
    pub split: Option<Split>,
    pub seed: Option<u64>,
    pub retry_budget: Option<u32>,
    pub balance: String,
    pub counts: ClassCounts,
    pub records: usize,
    pub skipped: usize,
    /// Hex SHA-256 of the dataset file bytes.
    pub checksum: String,
    pub config: Option<serde_json::Value>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::MalformedRecord { line: e.line(), reason: e.to_string() })
    }
}

/// `<dataset>.manifest.json`
pub fn manifest_path(dataset: &Path) -> PathBuf {
    let mut name = dataset.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

pub fn sort_canonical(pairs: &mut [GeneratedPair]) {
    pairs.sort_by(|a, b| {
        a.sort_key().cmp(&b.sort_key()).then_with(|| a.provenance.strategy.cmp(&b.provenance.strategy))
    });
}

/// Serializes pairs in canonical order.
pub fn dataset_bytes(pairs: &mut [GeneratedPair]) -> Vec<u8> {
    sort_canonical(pairs);
    let mut out = Vec::new();
    for p in pairs.iter() {
        serde_json::to_writer(&mut out, p).expect("pair serializes");
        out.push(b'\n');
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `pairs` as newline-delimited JSON in canonical order, and the
/// manifest describing the file to [`manifest_path`].
pub fn emit_dataset(mut pairs: Vec<GeneratedPair>, out_path: impl AsRef<Path>, meta: DatasetMeta) -> Result<Manifest> {
    let out_path = out_path.as_ref();
    let bytes = dataset_bytes(&mut pairs);
    fs::write(out_path, &bytes)?;
    let manifest = Manifest {
        strategy: meta.strategy,
        split: meta.split,
        seed: meta.seed,
        retry_budget: meta.retry_budget,
        balance: meta.balance,
        counts: ClassCounts::from_pairs(&pairs),
        records: pairs.len(),
        skipped: meta.skipped,
        checksum: sha256_hex(&bytes),
        config: meta.config,
    };
    manifest.save(manifest_path(out_path))?;
    Ok(manifest)
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<GeneratedPair>> {
    let mut pairs = Vec::new();
    for_each_line(path.as_ref(), |line, text| {
        pairs.push(parse_object_line(text, line, &["image_id", "caption", "label", "provenance"])?);
        Ok(())
    })?;
    Ok(pairs)
}

pub fn dataset_stats(path: impl AsRef<Path>) -> Result<ClassCounts> {
    let mut counts = ClassCounts::default();
    for_each_line(path.as_ref(), |line, text| {
        let pair: GeneratedPair = parse_object_line(text, line, &["image_id", "caption", "label", "provenance"])?;
        counts.add(pair.label);
        Ok(())
    })?;
    Ok(counts)
}

/// `1007744` -> `1,007,744`
pub fn thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

fn count_cell(n: usize) -> String {
    if n == 0 {
        "-".to_string()
    } else {
        thousands(n)
    }
}

/// Per-class instance counts, one row per named dataset. Absent classes
/// print as `-`.
pub fn render_stats_table(rows: &[(String, ClassCounts)]) -> String {
    let header = ["Synthetic Misinformer", "Truthful", "OOC", "NEI"];
    let body: Vec<[String; 4]> = rows
        .iter()
        .map(|(name, c)| [name.clone(), count_cell(c.truthful), count_cell(c.ooc), count_cell(c.nei)])
        .collect();
    let mut widths = header.map(str::len);
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let fmt_row = |cells: [&str; 4]| {
        let mut line = format!("{:<w$}", cells[0], w = widths[0]);
        for (cell, w) in cells[1..].iter().zip(&widths[1..]) {
            line.push_str(&format!("  {cell:>w$}"));
        }
        line.trim_end().to_string()
    };
    let mut out = fmt_row(header);
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 6));
    out.push('\n');
    for row in &body {
        out.push_str(&fmt_row([&row[0], &row[1], &row[2], &row[3]]));
        out.push('\n');
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum HybridBalance {
    #[default]
    None,
    Downsample,
}

impl fmt::Display for HybridBalance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HybridBalance::None => "none",
            HybridBalance::Downsample => "downsample",
        })
    }
}

impl FromStr for HybridBalance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(HybridBalance::None),
            "downsample" => Ok(HybridBalance::Downsample),
            other => Err(Error::InvalidArgument(format!("unknown hybrid balance `{other}`"))),
        }
    }
}

/// A three-class dataset built from one OOC and one NEI source. Sources are
/// named by strategy (`CSt-alt`) or external dataset (`NC/I-T`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HybridSpec {
    pub ooc_source: String,
    pub nei_source: String,
    pub balance: HybridBalance,
    pub seed: u64,
}

impl HybridSpec {
    /// E.g. `CLIP-NESt-alt + CSt-alt`.
    pub fn name(&self) -> String {
        format!("{} + {}", self.nei_source, self.ooc_source)
    }
}

fn check_labels(pairs: &[GeneratedPair], allowed: Label, context: &str) -> Result<()> {
    match pairs.iter().find(|p| p.label != Label::Truthful && p.label != allowed) {
        Some(p) => Err(Error::LabelMismatch { label: p.label.to_string(), context: context.to_string() }),
        None => Ok(()),
    }
}

/// Merges an OOC dataset and an NEI dataset into three classes. Truthful
/// pairs are deduplicated by `(image_id, caption)`; with
/// [`HybridBalance::Downsample`] every class is sampled without replacement
/// down to the smallest class size.
pub fn combine_hybrid(
    spec: &HybridSpec,
    ooc_pairs: Vec<GeneratedPair>,
    nei_pairs: Vec<GeneratedPair>,
) -> Result<Vec<GeneratedPair>> {
    check_labels(&ooc_pairs, Label::Ooc, "OOC")?;
    check_labels(&nei_pairs, Label::Nei, "NEI")?;

    let mut classes: [Vec<GeneratedPair>; 3] = Default::default();
    for p in ooc_pairs.into_iter().chain(nei_pairs) {
        let slot = match p.label {
            Label::Truthful => 0,
            Label::Ooc => 1,
            Label::Nei => 2,
        };
        classes[slot].push(p);
    }
    for class in classes.iter_mut() {
        sort_canonical(class);
    }
    let mut seen = HashSet::new();
    classes[0].retain(|p| seen.insert((p.image_id, p.caption.clone())));

    for (class, label) in classes.iter().zip([Label::Truthful, Label::Ooc, Label::Nei]) {
        if class.is_empty() {
            return Err(Error::EmptyClass(label.to_string()));
        }
    }

    if spec.balance == HybridBalance::Downsample {
        let target = classes.iter().map(Vec::len).min().unwrap_or(0);
        for (class, label) in classes.iter_mut().zip([Label::Truthful, Label::Ooc, Label::Nei]) {
            if class.len() > target {
                let mut rng = rng_from_seed(mix(spec.seed, fnv1a64(label.as_str().as_bytes())));
                let mut keep = sample(&mut rng, class.len(), target).into_vec();
                keep.sort_unstable();
                let taken = std::mem::take(class);
                let mut keep = keep.into_iter().peekable();
                for (i, p) in taken.into_iter().enumerate() {
                    if keep.peek() == Some(&i) {
                        keep.next();
                        class.push(p);
                    }
                }
            }
        }
    }

    let mut out: Vec<GeneratedPair> = classes.into_iter().flatten().collect();
    sort_canonical(&mut out);
    Ok(out)
}
