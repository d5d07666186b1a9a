//! Single-caption evaluation: binary scoring of detector predictions and
//! table rendering.
//!
//! Benchmark items carry exactly one caption. Three-class predictions
//! collapse to the binary task with OOC and NEI both counted as falsified.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{for_each_line, parse_object_line};
use crate::error::{Error, Result};
use crate::strategy::Label;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryLabel {
    Truthful,
    Falsified,
}

/// A detector output in either the binary or the three-class vocabulary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictedLabel {
    Truthful,
    Ooc,
    Nei,
    Falsified,
}

impl FromStr for PredictedLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "truthful" => Ok(PredictedLabel::Truthful),
            "ooc" => Ok(PredictedLabel::Ooc),
            "nei" => Ok(PredictedLabel::Nei),
            "falsified" => Ok(PredictedLabel::Falsified),
            _ => Err(Error::UnknownLabel(s.to_string())),
        }
    }
}

impl From<Label> for PredictedLabel {
    fn from(label: Label) -> Self {
        match label {
            Label::Truthful => PredictedLabel::Truthful,
            Label::Ooc => PredictedLabel::Ooc,
            Label::Nei => PredictedLabel::Nei,
        }
    }
}

pub fn binarize(label: Label) -> BinaryLabel {
    binarize_prediction(label.into())
}

pub fn binarize_prediction(label: PredictedLabel) -> BinaryLabel {
    match label {
        PredictedLabel::Truthful => BinaryLabel::Truthful,
        PredictedLabel::Ooc | PredictedLabel::Nei | PredictedLabel::Falsified => BinaryLabel::Falsified,
    }
}

pub fn binarize_str(label: &str) -> Result<BinaryLabel> {
    label.parse::<PredictedLabel>().map(binarize_prediction)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalItem {
    pub id: u64,
    pub image_id: String,
    pub caption: String,
    pub true_label: BinaryLabel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pred_label: Option<PredictedLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<BTreeMap<String, f64>>,
}

impl Prediction {
    pub fn labeled(id: u64, label: PredictedLabel) -> Self {
        Self { id, pred_label: Some(label), scores: None }
    }

    /// The explicit label, else the argmax of `scores` (first key wins ties
    /// in key order).
    pub fn resolve(&self) -> Result<PredictedLabel> {
        if let Some(label) = self.pred_label {
            return Ok(label);
        }
        let scores = self.scores.as_ref().filter(|s| !s.is_empty()).ok_or_else(|| Error::MalformedRecord {
            line: 0,
            reason: format!("prediction {} has neither pred_label nor scores", self.id),
        })?;
        let mut best: Option<(&String, f64)> = None;
        for (k, &v) in scores {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite score for prediction {}", self.id)));
            }
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((k, v));
            }
        }
        best.unwrap().0.parse()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorModality {
    ImageOnly,
    TextOnly,
    Multimodal,
}

impl DetectorModality {
    pub fn as_str(self) -> &'static str {
        match self {
            DetectorModality::ImageOnly => "image-only",
            DetectorModality::TextOnly => "text-only",
            DetectorModality::Multimodal => "multimodal",
        }
    }
}

impl fmt::Display for DetectorModality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DetectorModality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "image-only" => Ok(DetectorModality::ImageOnly),
            "text-only" => Ok(DetectorModality::TextOnly),
            "multimodal" => Ok(DetectorModality::Multimodal),
            other => Err(Error::InvalidArgument(format!("unknown detector modality `{other}`"))),
        }
    }
}

/// Binary confusion counts, first letter the truth and second the
/// prediction: `tf` is a truthful item predicted falsified.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tt: usize,
    pub tf: usize,
    pub ft: usize,
    pub ff: usize,
}

impl ConfusionCounts {
    pub fn n(&self) -> usize {
        self.tt + self.tf + self.ft + self.ff
    }

    pub fn record(&mut self, truth: BinaryLabel, predicted: BinaryLabel) {
        match (truth, predicted) {
            (BinaryLabel::Truthful, BinaryLabel::Truthful) => self.tt += 1,
            (BinaryLabel::Truthful, BinaryLabel::Falsified) => self.tf += 1,
            (BinaryLabel::Falsified, BinaryLabel::Truthful) => self.ft += 1,
            (BinaryLabel::Falsified, BinaryLabel::Falsified) => self.ff += 1,
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub strategy: String,
    pub modality: DetectorModality,
    pub n: usize,
    pub counts: ConfusionCounts,
    pub accuracy: f64,
    /// Truthful hit rate.
    pub specificity: f64,
    /// Falsified hit rate.
    pub sensitivity: f64,
}

impl EvalReport {
    /// Rates derived from counts; a rate over an empty class is 0.
    pub fn from_counts(strategy: impl Into<String>, modality: DetectorModality, counts: ConfusionCounts) -> Self {
        let n = counts.n();
        Self {
            strategy: strategy.into(),
            modality,
            n,
            counts,
            accuracy: ratio(counts.tt + counts.ff, n),
            specificity: ratio(counts.tt, counts.tt + counts.tf),
            sensitivity: ratio(counts.ff, counts.ff + counts.ft),
        }
    }

    fn pct(num: usize, den: usize) -> f64 {
        if den == 0 {
            0.0
        } else {
            num as f64 * 100.0 / den as f64
        }
    }

    pub fn accuracy_pct(&self) -> f64 {
        Self::pct(self.counts.tt + self.counts.ff, self.n)
    }

    pub fn specificity_pct(&self) -> f64 {
        Self::pct(self.counts.tt, self.counts.tt + self.counts.tf)
    }

    pub fn sensitivity_pct(&self) -> f64 {
        Self::pct(self.counts.ff, self.counts.ff + self.counts.ft)
    }
}

/// Scores predictions against a benchmark. Every benchmark id needs exactly
/// one prediction and no prediction may name an unknown id.
pub fn score(
    benchmark: &[EvalItem],
    predictions: &[Prediction],
    strategy: &str,
    modality: DetectorModality,
) -> Result<EvalReport> {
    let truth: HashMap<u64, BinaryLabel> = benchmark.iter().map(|i| (i.id, i.true_label)).collect();
    let mut seen = HashSet::with_capacity(predictions.len());
    let mut counts = ConfusionCounts::default();
    for p in predictions {
        if !seen.insert(p.id) {
            return Err(Error::DuplicatePrediction(p.id));
        }
        let t = *truth.get(&p.id).ok_or(Error::UnknownPrediction(p.id))?;
        counts.record(t, binarize_prediction(p.resolve()?));
    }
    let mut missing: Vec<u64> = truth.keys().filter(|id| !seen.contains(id)).copied().collect();
    if !missing.is_empty() {
        missing.sort_unstable();
        return Err(Error::MissingPrediction(missing));
    }
    Ok(EvalReport::from_counts(strategy, modality, counts))
}

pub fn load_benchmark(path: impl AsRef<Path>) -> Result<Vec<EvalItem>> {
    let mut items = Vec::new();
    let mut ids = HashSet::new();
    for_each_line(path.as_ref(), |line, text| {
        let item: EvalItem = parse_object_line(text, line, &["id", "image_id", "caption", "true_label"])?;
        if !ids.insert(item.id) {
            return Err(Error::DuplicateId(item.id));
        }
        items.push(item);
        Ok(())
    })?;
    Ok(items)
}

pub fn save_benchmark(items: &[EvalItem], path: impl AsRef<Path>) -> Result<()> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).map_err(std::io::Error::from)?;
        out.push(b'\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<Prediction>> {
    let mut preds = Vec::new();
    for_each_line(path.as_ref(), |line, text| {
        let p: Prediction = parse_object_line(text, line, &["id"])?;
        p.resolve().map_err(|e| match e {
            Error::MalformedRecord { reason, .. } => Error::MalformedRecord { line, reason },
            other => other,
        })?;
        preds.push(p);
        Ok(())
    })?;
    Ok(preds)
}

pub fn save_report(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, report).map_err(std::io::Error::from)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn load_report(path: impl AsRef<Path>) -> Result<EvalReport> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::MalformedRecord { line: e.line(), reason: e.to_string() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportLayout {
    /// Accuracy / Truthful / Falsified at two decimals.
    Table2,
    /// Type / Misinformer / Image-only / Text-only / Multimodal / Truthful /
    /// Falsified at one decimal, one row per strategy.
    Table3,
}

impl FromStr for ReportLayout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table2" => Ok(ReportLayout::Table2),
            "table3" => Ok(ReportLayout::Table3),
            other => Err(Error::InvalidArgument(format!("unknown layout `{other}`"))),
        }
    }
}

/// `OOC`, `NEI` or `Hybrid` for a misinformer name.
pub fn misinformer_type(strategy: &str) -> &'static str {
    if strategy.contains(" + ") {
        "Hybrid"
    } else if strategy.contains("NESt") || strategy.eq_ignore_ascii_case("meir") {
        "NEI"
    } else {
        "OOC"
    }
}

/// Row cells for the two-decimal layout: accuracy, truthful, falsified.
pub fn table2_cells(report: &EvalReport) -> [String; 3] {
    [
        format!("{:.2}", report.accuracy_pct()),
        format!("{:.2}", report.specificity_pct()),
        format!("{:.2}", report.sensitivity_pct()),
    ]
}

/// Row cells for the one-decimal layout, built from the reports sharing one
/// strategy. Missing modalities print as `-`.
pub fn table3_cells(strategy: &str, reports: &[&EvalReport]) -> [String; 7] {
    let find = |m: DetectorModality| reports.iter().find(|r| r.modality == m);
    let acc = |m| find(m).map_or("-".to_string(), |r| format!("{:.1}", r.accuracy_pct()));
    let multi = find(DetectorModality::Multimodal);
    [
        misinformer_type(strategy).to_string(),
        strategy.to_string(),
        acc(DetectorModality::ImageOnly),
        acc(DetectorModality::TextOnly),
        acc(DetectorModality::Multimodal),
        multi.map_or("-".to_string(), |r| format!("{:.1}", r.specificity_pct())),
        multi.map_or("-".to_string(), |r| format!("{:.1}", r.sensitivity_pct())),
    ]
}

fn align(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let parts: Vec<String> =
            cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, w))| {
                    if i == 0 || c.parse::<f64>().is_err() && c != "-" {
                        format!("{c:<w$}")
                    } else {
                        format!("{c:>w$}")
                    }
                })
                .collect();
        parts.join("  ").trim_end().to_string()
    };
    let mut out = line(&header.iter().map(|h| h.to_string()).collect::<Vec<_>>());
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}

pub fn render_report(reports: &[EvalReport], layout: ReportLayout) -> String {
    match layout {
        ReportLayout::Table2 => {
            let rows: Vec<Vec<String>> = reports
                .iter()
                .map(|r| {
                    let mut row = vec![r.strategy.clone()];
                    row.extend(table2_cells(r));
                    row
                })
                .collect();
            align(&["Synthetic Misinformer", "Accuracy", "Truthful", "Falsified"], &rows)
        }
        ReportLayout::Table3 => {
            let mut order: Vec<&str> = Vec::new();
            for r in reports {
                if !order.contains(&r.strategy.as_str()) {
                    order.push(&r.strategy);
                }
            }
            let rows: Vec<Vec<String>> = order
                .iter()
                .map(|s| {
                    let group: Vec<&EvalReport> = reports.iter().filter(|r| r.strategy == *s).collect();
                    table3_cells(s, &group).to_vec()
                })
                .collect();
            align(
                &["Type", "Synthetic Misinformer", "Image-only", "Text-only", "Multimodal", "Truthful", "Falsified"],
                &rows,
            )
        }
    }
}
