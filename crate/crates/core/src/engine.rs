//! Falsified-pair generation for every misinformer kind.
//!
//! Each source record is processed independently with its own RNG seeded by
//! [`record_seed`], so output never depends on worker count or scheduling.
//! Per record the generator emits a truthful twin and attempts one falsified
//! pair; failures are collected with a reason instead of aborting the run.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::annotation::Annotations;
use crate::cache::TopKCache;
use crate::corpus::{Corpus, NewsRecord};
use crate::embedding::Modality;
use crate::error::{Error, Result};
use crate::index::{top_k, CandidateFilter, Stores, TopicIndex};
use crate::seed::{record_seed, rng_from_seed};
use crate::strategy::{GeneratedPair, Label, Provenance, Strategy, StrategyKind, Variant};
use crate::swap::{pairwise_swap, random_swap, EntityPool};

/// What to do with the truthful twin of a record that could not be
/// falsified.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BalanceMode {
    /// Every source record contributes a truthful pair.
    #[default]
    KeepAll,
    /// Truthful twins of unfalsifiable records are dropped, giving exactly
    /// one falsified pair per truthful pair.
    Balanced,
}

impl BalanceMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BalanceMode::KeepAll => "keep-all",
            BalanceMode::Balanced => "balanced",
        }
    }
}

impl fmt::Display for BalanceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BalanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "keep-all" => Ok(BalanceMode::KeepAll),
            "balanced" => Ok(BalanceMode::Balanced),
            other => Err(Error::InvalidArgument(format!("unknown balance mode `{other}`"))),
        }
    }
}

#[derive(Clone, Copy)]
pub struct GenerationInputs<'a> {
    pub corpus: &'a Corpus,
    pub stores: Stores<'a>,
    pub annotations: Option<&'a Annotations>,
    pub topic_index: &'a TopicIndex,
    pub cache: Option<&'a TopKCache>,
}

impl<'a> GenerationInputs<'a> {
    pub fn new(corpus: &'a Corpus, topic_index: &'a TopicIndex) -> Self {
        Self { corpus, stores: Stores::default(), annotations: None, topic_index, cache: None }
    }

    pub fn with_stores(mut self, stores: Stores<'a>) -> Self {
        self.stores = stores;
        self
    }

    pub fn with_annotations(mut self, annotations: &'a Annotations) -> Self {
        self.annotations = Some(annotations);
        self
    }

    pub fn with_cache(mut self, cache: &'a TopKCache) -> Self {
        self.cache = Some(cache);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Failure {
    pub source_id: u64,
    pub reason: String,
}

#[derive(Clone, Debug, Default)]
pub struct Generation {
    /// Truthful and falsified pairs, ascending by source id then label.
    pub pairs: Vec<GeneratedPair>,
    pub failures: Vec<Failure>,
}

impl Generation {
    pub fn count(&self, label: Label) -> usize {
        self.pairs.iter().filter(|p| p.label == label).count()
    }
}

struct Context<'a> {
    inputs: GenerationInputs<'a>,
    strategy: Strategy,
    annotations: &'a Annotations,
    pool: Option<EntityPool>,
    all_ids: Vec<u64>,
}

fn missing(kind: StrategyKind, input: &str) -> Error {
    Error::MissingInput { kind: kind.name().to_string(), input: input.to_string() }
}

fn check_inputs(inputs: &GenerationInputs<'_>, kind: StrategyKind) -> Result<()> {
    for &space in kind.required_spaces() {
        let present = match space {
            Modality::Image => inputs.stores.image.is_some(),
            Modality::Text => inputs.stores.text.is_some(),
        };
        if !present {
            return Err(missing(kind, &format!("{space} embeddings")));
        }
    }
    if kind.is_entity_swap() && inputs.annotations.is_none() {
        return Err(missing(kind, "entity annotations"));
    }
    if let Some(cache) = inputs.cache {
        cache.check_inputs(inputs.corpus, &inputs.stores)?;
    }
    Ok(())
}

/// Generates one dataset on the current rayon pool.
pub fn generate(inputs: GenerationInputs<'_>, strategy: Strategy, balance: BalanceMode) -> Result<Generation> {
    let kind = strategy.kind;
    check_inputs(&inputs, kind)?;
    let empty = Annotations::default();
    let annotations = inputs.annotations.unwrap_or(&empty);
    let pool = (kind == StrategyKind::RNest).then(|| EntityPool::build(inputs.corpus, annotations, inputs.topic_index));
    let ctx = Context { inputs, strategy, annotations, pool, all_ids: inputs.corpus.sorted_ids() };

    let mut sources: Vec<&NewsRecord> = inputs.corpus.iter().collect();
    sources.sort_unstable_by_key(|r| r.id);
    let outcomes: Vec<Result<GeneratedPair>> = sources.par_iter().map(|r| ctx.falsify(r)).collect();

    let strategy_name = kind.name();
    let mut out = Generation::default();
    for (record, outcome) in sources.into_iter().zip(outcomes) {
        match outcome {
            Ok(pair) => {
                out.pairs.push(GeneratedPair::truthful(strategy_name, record.id, &record.caption));
                out.pairs.push(pair);
            }
            Err(e) => {
                log::debug!("{strategy_name}: record {} not falsified: {e}", record.id);
                if balance == BalanceMode::KeepAll {
                    out.pairs.push(GeneratedPair::truthful(strategy_name, record.id, &record.caption));
                }
                out.failures.push(Failure { source_id: record.id, reason: e.to_string() });
            }
        }
    }
    log::info!(
        "{strategy_name}: {} truthful, {} falsified, {} sources skipped",
        out.count(Label::Truthful),
        out.count(kind.falsified_label()),
        out.failures.len()
    );
    Ok(out)
}

/// [`generate`] on a dedicated pool of `workers` threads.
pub fn generate_with_workers(
    inputs: GenerationInputs<'_>,
    strategy: Strategy,
    balance: BalanceMode,
    workers: usize,
) -> Result<Generation> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| generate(inputs, strategy, balance))
}

/// Uniform draw over `candidates` admitted by `admits`.
fn draw_uniform(rng: &mut ChaCha8Rng, candidates: &[u64], admits: impl Fn(u64) -> bool) -> Option<u64> {
    if candidates.is_empty() {
        return None;
    }
    for _ in 0..32 {
        let c = candidates[rng.gen_range(0..candidates.len())];
        if admits(c) {
            return Some(c);
        }
    }
    let admissible: Vec<u64> = candidates.iter().copied().filter(|&c| admits(c)).collect();
    if admissible.is_empty() {
        None
    } else {
        Some(admissible[rng.gen_range(0..admissible.len())])
    }
}

impl Context<'_> {
    fn corpus(&self) -> &Corpus {
        self.inputs.corpus
    }

    fn record(&self, id: u64) -> Result<&NewsRecord> {
        self.corpus().get(id).ok_or(Error::UnknownId(id))
    }

    fn falsify(&self, record: &NewsRecord) -> Result<GeneratedPair> {
        let kind = self.strategy.kind;
        let seed = record_seed(self.strategy.seed, record.id, kind.tag());
        let mut rng = rng_from_seed(seed);
        // The coin is always the first draw of the record's stream.
        let space = match kind.variant() {
            Variant::Caption => Modality::Text,
            Variant::Image => Modality::Image,
            Variant::Alternating => {
                if rng.gen::<bool>() {
                    Modality::Text
                } else {
                    Modality::Image
                }
            }
        };
        let provenance = |donor_id| Provenance {
            strategy: kind.name().to_string(),
            source_id: record.id,
            donor_id,
            seed: Some(seed),
        };
        match kind {
            StrategyKind::RsC | StrategyKind::RstC | StrategyKind::RstI | StrategyKind::RstAlt => {
                let candidates = if kind == StrategyKind::RsC {
                    self.all_ids.as_slice()
                } else {
                    self.inputs.topic_index.bucket_of(record.id).ok_or(Error::UnknownId(record.id))?
                };
                let filter = CandidateFilter::standard(record, space, self.corpus());
                let donor =
                    draw_uniform(&mut rng, candidates, |id| filter.admits(id)).ok_or(Error::NoCandidate(record.id))?;
                self.ooc_pair(record, space, donor, provenance(Some(donor)))
            }
            StrategyKind::CstC | StrategyKind::CstI | StrategyKind::CstAlt => {
                let donor =
                    self.ranked(record, space, 1, false)?.first().copied().ok_or(Error::NoCandidate(record.id))?;
                self.ooc_pair(record, space, donor, provenance(Some(donor)))
            }
            StrategyKind::RNest => {
                let spans = self.annotations.entities(record.id);
                if spans.is_empty() {
                    return Err(Error::NoAdmissibleReplacement(record.id));
                }
                let pool = self.pool.as_ref().expect("pool built for R-NESt");
                let swap = random_swap(record, spans, pool, seed)?;
                Ok(GeneratedPair {
                    image_id: record.id,
                    caption: swap.falsified_caption,
                    label: Label::Nei,
                    provenance: provenance(None),
                })
            }
            StrategyKind::ClipNestC | StrategyKind::ClipNestI | StrategyKind::ClipNestAlt => {
                let spans = self.annotations.entities(record.id);
                if spans.is_empty() {
                    return Err(Error::NoAdmissibleReplacement(record.id));
                }
                let budget = self.strategy.retry_budget as usize + 1;
                for donor_id in self.ranked(record, space, budget, true)? {
                    let donor = self.record(donor_id)?;
                    match pairwise_swap(record, spans, donor, self.annotations.entities(donor_id)) {
                        Ok(swap) => {
                            return Ok(GeneratedPair {
                                image_id: record.id,
                                caption: swap.falsified_caption,
                                label: Label::Nei,
                                provenance: provenance(Some(donor_id)),
                            })
                        }
                        Err(Error::InadmissiblePair { .. }) => continue,
                        Err(e) => return Err(e),
                    }
                }
                Err(Error::NoCandidate(record.id))
            }
        }
    }

    /// The best `needed` in-topic neighbours in `space`, from the cache when
    /// it can answer exactly.
    fn ranked(&self, record: &NewsRecord, space: Modality, needed: usize, need_entities: bool) -> Result<Vec<u64>> {
        let annotations = self.annotations;
        let extra = |id: u64| !need_entities || annotations.has_entities(id);
        if let Some(cache) = self.inputs.cache {
            if let Some(list) = cache.lookup(space, space, record.id, needed, extra) {
                return Ok(list);
            }
        }
        let filter = CandidateFilter::standard(record, space, self.corpus()).with_predicate(extra);
        match top_k(record.id, space, space, self.inputs.topic_index, &self.inputs.stores, &filter, needed) {
            Err(Error::NoCandidate(_)) => Ok(Vec::new()),
            other => other,
        }
    }

    fn ooc_pair(
        &self,
        record: &NewsRecord,
        space: Modality,
        donor_id: u64,
        provenance: Provenance,
    ) -> Result<GeneratedPair> {
        let (image_id, caption) = match space {
            Modality::Text => (record.id, self.record(donor_id)?.caption.clone()),
            Modality::Image => (donor_id, record.caption.clone()),
        };
        Ok(GeneratedPair { image_id, caption, label: Label::Ooc, provenance })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::mock_embed;
    use crate::synth::SyntheticCorpus;

    #[test]
    fn missing_inputs_reported() {
        let synth = SyntheticCorpus::generate(20, 2, 1);
        let index = TopicIndex::build(&synth.corpus);
        let inputs = GenerationInputs::new(&synth.corpus, &index);
        let r = generate(inputs, Strategy::new(StrategyKind::CstC, 1), BalanceMode::KeepAll);
        assert!(matches!(r, Err(Error::MissingInput { .. })));
        let r = generate(inputs, Strategy::new(StrategyKind::RNest, 1), BalanceMode::KeepAll);
        assert!(matches!(r, Err(Error::MissingInput { .. })));
        assert!(generate(inputs, Strategy::new(StrategyKind::RstAlt, 1), BalanceMode::KeepAll).is_ok());
    }

    #[test]
    fn rst_c_stays_in_topic() {
        let synth = SyntheticCorpus::generate(300, 5, 2);
        let index = TopicIndex::build(&synth.corpus);
        let inputs = GenerationInputs::new(&synth.corpus, &index);
        let g = generate(inputs, Strategy::new(StrategyKind::RstC, 9), BalanceMode::KeepAll).unwrap();
        assert_eq!(g.count(Label::Truthful), 300);
        assert_eq!(g.count(Label::Ooc), 300);
        for p in g.pairs.iter().filter(|p| p.label == Label::Ooc) {
            let src = synth.corpus.get(p.provenance.source_id).unwrap();
            let donor = synth.corpus.get(p.provenance.donor_id.unwrap()).unwrap();
            assert_eq!(src.topic, donor.topic);
            assert_eq!(p.image_id, src.id);
            assert_ne!(p.caption, src.caption);
        }
    }

    #[test]
    fn balanced_mode_drops_unmatched_twins() {
        let synth = SyntheticCorpus::generate(400, 4, 3);
        let index = TopicIndex::build(&synth.corpus);
        let text = mock_embed(&synth.corpus, 16, Modality::Text, 1).unwrap();
        let inputs = GenerationInputs::new(&synth.corpus, &index)
            .with_stores(Stores::new(None, Some(&text)))
            .with_annotations(&synth.annotations);
        let strategy = Strategy::new(StrategyKind::ClipNestC, 4);
        let keep = generate(inputs, strategy, BalanceMode::KeepAll).unwrap();
        let bal = generate(inputs, strategy, BalanceMode::Balanced).unwrap();
        assert!(!keep.failures.is_empty());
        assert_eq!(keep.count(Label::Truthful), 400);
        assert_eq!(bal.count(Label::Truthful), bal.count(Label::Nei));
        assert_eq!(keep.count(Label::Nei), bal.count(Label::Nei));
    }

    #[test]
    fn draw_uniform_exhausts() {
        let mut rng = rng_from_seed(1);
        assert_eq!(draw_uniform(&mut rng, &[], |_| true), None);
        assert_eq!(draw_uniform(&mut rng, &[1, 2, 3], |_| false), None);
        assert_eq!(draw_uniform(&mut rng, &[1, 2, 3], |c| c == 3), Some(3));
    }
}
