use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::json;

use misinfo_forge::cache::TopKCache;
use misinfo_forge::corpus::{load_corpus, Split};
use misinfo_forge::dataset::{
    combine_hybrid, dataset_stats, emit_dataset, manifest_path, read_dataset, render_stats_table, thousands,
    DatasetMeta, HybridBalance, HybridSpec, Manifest,
};
use misinfo_forge::embedding::{load_embeddings, mock_embed as embed, EmbeddingStore, Modality};
use misinfo_forge::engine::{generate_with_workers, BalanceMode, GenerationInputs};
use misinfo_forge::eval::{
    load_benchmark, load_predictions, load_report, render_report, save_benchmark, save_report, score, DetectorModality,
    ReportLayout,
};
use misinfo_forge::external::{import_external, ExternalFormat, Imported};
use misinfo_forge::index::{Stores, TopicIndex};
use misinfo_forge::strategy::{Label, Strategy, StrategyKind, DEFAULT_RETRY_BUDGET};
use misinfo_forge::{load_annotations, GeneratedPair};

use crate::config::{parse, usage, Settings};
use crate::{CombineArgs, EvaluateArgs, GenerateArgs, ImportArgs, IndexArgs, MockEmbedArgs, ReportArgs, StatsArgs};

fn load_store(path: Option<&Path>, modality: Modality) -> Result<Option<EmbeddingStore>> {
    let Some(path) = path else {
        return Ok(None);
    };
    let store = load_embeddings(path, None).with_context(|| format!("loading {}", path.display()))?;
    if store.modality() != modality {
        return Err(usage(format!("{} holds {} embeddings, expected {modality}", path.display(), store.modality())));
    }
    Ok(Some(store))
}

fn display(path: &Option<PathBuf>) -> Option<String> {
    path.as_ref().map(|p| p.display().to_string())
}

pub fn index(args: IndexArgs, s: &Settings) -> Result<()> {
    let corpus_path = s.require_path(args.corpus, "corpus")?;
    let image_path = s.path(args.image_embeddings, "image-embeddings")?;
    let text_path = s.path(args.text_embeddings, "text-embeddings")?;
    let k: usize = s.get(args.k, "k")?.unwrap_or(32);
    let out = s.path(args.out, "out")?;

    let corpus = load_corpus(&corpus_path).with_context(|| format!("loading {}", corpus_path.display()))?;
    let index = TopicIndex::build(&corpus);
    let mut sizes: Vec<usize> = index.topics().map(|(_, b)| b.len()).collect();
    sizes.sort_unstable();
    println!(
        "{} records in {} topics (bucket sizes {}..{}, median {})",
        thousands(corpus.len()),
        index.num_topics(),
        sizes.first().copied().unwrap_or(0),
        sizes.last().copied().unwrap_or(0),
        sizes.get(sizes.len() / 2).copied().unwrap_or(0)
    );

    let Some(out) = out else {
        return Ok(());
    };
    let image = load_store(image_path.as_deref(), Modality::Image)?;
    let text = load_store(text_path.as_deref(), Modality::Text)?;
    let stores = Stores::new(image.as_ref(), text.as_ref());
    let spaces: Vec<(Modality, Modality)> = [(Modality::Image, image.is_some()), (Modality::Text, text.is_some())]
        .into_iter()
        .filter(|(_, present)| *present)
        .map(|(m, _)| (m, m))
        .collect();
    if spaces.is_empty() {
        return Err(usage("a cache needs --image-embeddings or --text-embeddings"));
    }
    if k == 0 {
        return Err(usage("--k must be at least 1"));
    }
    let cache = TopKCache::build(&corpus, &index, &stores, &spaces, k)?;
    cache.save(&out).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote top-{k} cache for {} space(s) to {}", spaces.len(), out.display());
    Ok(())
}

pub fn generate(args: GenerateArgs, s: &Settings) -> Result<()> {
    let corpus_path = s.require_path(args.corpus, "corpus")?;
    let image_path = s.path(args.image_embeddings, "image-embeddings")?;
    let text_path = s.path(args.text_embeddings, "text-embeddings")?;
    let entities_path = s.path(args.entities, "entities")?;
    let kind: StrategyKind = parse(&s.require::<String>(args.strategy, "strategy")?, "--strategy")?;
    let seed: u64 = s.require(args.seed, "seed")?;
    let retry_budget: u32 = s.get(args.retry_budget, "retry-budget")?.unwrap_or(DEFAULT_RETRY_BUDGET);
    let balance: BalanceMode = match s.get::<String>(args.balance, "balance")? {
        Some(b) => parse(&b, "--balance")?,
        None => BalanceMode::KeepAll,
    };
    let split: Option<Split> = s.get::<String>(args.split, "split")?.map(|v| parse(&v, "--split")).transpose()?;
    let cache_path = s.path(args.cache, "cache")?;
    let workers = match s.get(args.workers, "workers")? {
        Some(0) => return Err(usage("--workers must be at least 1")),
        Some(w) => w,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let out = s.require_path(args.out, "out")?;

    let config = json!({
        "subcommand": "generate",
        "corpus": corpus_path.display().to_string(),
        "image_embeddings": display(&image_path),
        "text_embeddings": display(&text_path),
        "entities": display(&entities_path),
        "cache": display(&cache_path),
        "strategy": kind.cli_name(),
        "seed": seed,
        "retry_budget": retry_budget,
        "balance": balance.as_str(),
        "split": split.map(Split::as_str),
    });

    let full = load_corpus(&corpus_path).with_context(|| format!("loading {}", corpus_path.display()))?;
    let annotations = entities_path
        .as_ref()
        .map(|p| load_annotations(p, &full).with_context(|| format!("loading {}", p.display())))
        .transpose()?;
    let corpus = match split {
        Some(split) => full.subset(split),
        None => full,
    };
    let image = load_store(image_path.as_deref(), Modality::Image)?;
    let text = load_store(text_path.as_deref(), Modality::Text)?;
    let cache = cache_path
        .as_ref()
        .map(|p| TopKCache::load(p).with_context(|| format!("loading {}", p.display())))
        .transpose()?;

    let index = TopicIndex::build(&corpus);
    let mut inputs = GenerationInputs::new(&corpus, &index).with_stores(Stores::new(image.as_ref(), text.as_ref()));
    if let Some(a) = &annotations {
        inputs = inputs.with_annotations(a);
    }
    if let Some(c) = &cache {
        inputs = inputs.with_cache(c);
    }
    let strategy = Strategy::new(kind, seed).with_retry_budget(retry_budget);
    let generation = generate_with_workers(inputs, strategy, balance, workers)?;
    let meta = DatasetMeta {
        strategy: kind.name().to_string(),
        split,
        seed: Some(seed),
        retry_budget: Some(retry_budget),
        balance: balance.as_str().to_string(),
        skipped: generation.failures.len(),
        config: Some(config),
    };
    let manifest = emit_dataset(generation.pairs, &out, meta).with_context(|| format!("writing {}", out.display()))?;
    print_manifest(&manifest, &out);
    Ok(())
}

fn print_manifest(manifest: &Manifest, out: &Path) {
    println!(
        "{}: truthful {} / ooc {} / nei {} ({} sources skipped)",
        manifest.strategy,
        thousands(manifest.counts.truthful),
        thousands(manifest.counts.ooc),
        thousands(manifest.counts.nei),
        thousands(manifest.skipped)
    );
    println!("wrote {} (sha256 {})", out.display(), manifest.checksum);
}

/// Strategy name of a dataset: from its manifest, else from its first
/// falsified pair, else from the file name.
fn dataset_name(path: &Path, pairs: Option<&[GeneratedPair]>) -> String {
    if let Ok(m) = Manifest::load(manifest_path(path)) {
        return m.strategy;
    }
    if let Some(p) = pairs.and_then(|ps| ps.iter().find(|p| p.label != Label::Truthful)) {
        return p.provenance.strategy.clone();
    }
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

pub fn combine(args: CombineArgs, s: &Settings) -> Result<()> {
    let ooc_path = s.require_path(args.ooc, "ooc")?;
    let nei_path = s.require_path(args.nei, "nei")?;
    let balance = match s.get::<String>(args.balance, "balance")?.as_deref() {
        None | Some("keep-all") => HybridBalance::None,
        Some("balanced") => HybridBalance::Downsample,
        Some(other) => parse(other, "--balance")?,
    };
    let seed: u64 = s.get(args.seed, "seed")?.unwrap_or(0);
    let out = s.require_path(args.out, "out")?;

    let ooc = read_dataset(&ooc_path).with_context(|| format!("reading {}", ooc_path.display()))?;
    let nei = read_dataset(&nei_path).with_context(|| format!("reading {}", nei_path.display()))?;
    let spec = HybridSpec {
        ooc_source: dataset_name(&ooc_path, Some(&ooc)),
        nei_source: dataset_name(&nei_path, Some(&nei)),
        balance,
        seed,
    };
    let pairs = combine_hybrid(&spec, ooc, nei)?;
    let config = json!({
        "subcommand": "combine",
        "ooc": ooc_path.display().to_string(),
        "nei": nei_path.display().to_string(),
        "balance": balance.to_string(),
        "seed": seed,
    });
    let meta = DatasetMeta {
        strategy: spec.name(),
        seed: Some(seed),
        balance: balance.to_string(),
        config: Some(config),
        ..Default::default()
    };
    let manifest = emit_dataset(pairs, &out, meta).with_context(|| format!("writing {}", out.display()))?;
    print_manifest(&manifest, &out);
    Ok(())
}

pub fn stats(args: StatsArgs, s: &Settings) -> Result<()> {
    let paths = s.paths(args.datasets, "dataset")?;
    if paths.is_empty() {
        return Err(usage("missing --dataset"));
    }
    let mut rows = Vec::new();
    for path in &paths {
        let counts = dataset_stats(path).with_context(|| format!("reading {}", path.display()))?;
        rows.push((dataset_name(path, None), counts));
    }
    print!("{}", render_stats_table(&rows));
    Ok(())
}

pub fn mock_embed(args: MockEmbedArgs, s: &Settings) -> Result<()> {
    let corpus_path = s.require_path(args.corpus, "corpus")?;
    let modality: Modality = parse(&s.require::<String>(args.modality, "modality")?, "--modality")?;
    let dim: usize = s.get(args.dim, "dim")?.unwrap_or(512);
    let seed: u64 = s.get(args.seed, "seed")?.unwrap_or(0);
    let out = s.require_path(args.out, "out")?;
    if dim < 8 {
        return Err(usage("--dim must be at least 8"));
    }
    let corpus = load_corpus(&corpus_path).with_context(|| format!("loading {}", corpus_path.display()))?;
    let store = embed(&corpus, dim, modality, seed)?;
    store.save(&out).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {} {modality} vectors of dim {dim} to {}", thousands(store.len()), out.display());
    Ok(())
}

pub fn import(args: ImportArgs, s: &Settings) -> Result<()> {
    let format: ExternalFormat = parse(&s.require::<String>(args.format, "format")?, "--format")?;
    let input = s.require_path(args.input, "input")?;
    let corpus_path = s.path(args.corpus, "corpus")?;
    let out = s.require_path(args.out, "out")?;
    let corpus =
        corpus_path.as_ref().map(|p| load_corpus(p).with_context(|| format!("loading {}", p.display()))).transpose()?;
    if format == ExternalFormat::NewsClippings && corpus.is_none() {
        log::warn!("no --corpus given; NewsCLIPings captions will be empty");
    }
    let imported =
        import_external(format, &input, corpus.as_ref()).with_context(|| format!("importing {}", input.display()))?;
    match imported {
        Imported::Pairs(pairs) => {
            let config = json!({
                "subcommand": "import",
                "format": format.as_str(),
                "input": input.display().to_string(),
                "corpus": display(&corpus_path),
            });
            let meta = DatasetMeta {
                strategy: format.source_name().to_string(),
                balance: "keep-all".into(),
                config: Some(config),
                ..Default::default()
            };
            let manifest = emit_dataset(pairs, &out, meta).with_context(|| format!("writing {}", out.display()))?;
            print_manifest(&manifest, &out);
        }
        Imported::Items(items) => {
            save_benchmark(&items, &out).with_context(|| format!("writing {}", out.display()))?;
            let truthful = items.iter().filter(|i| i.true_label == misinfo_forge::eval::BinaryLabel::Truthful).count();
            println!(
                "{}: {} items ({} truthful / {} falsified)",
                format.source_name(),
                thousands(items.len()),
                thousands(truthful),
                thousands(items.len() - truthful)
            );
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

pub fn evaluate(args: EvaluateArgs, s: &Settings) -> Result<()> {
    let benchmark_path = s.require_path(args.benchmark, "benchmark")?;
    let predictions_path = s.require_path(args.predictions, "predictions")?;
    let modality: DetectorModality = match s.get::<String>(args.modality, "modality")? {
        Some(m) => parse(&m, "--modality")?,
        None => DetectorModality::Multimodal,
    };
    let name = s
        .get::<String>(args.name, "name")?
        .unwrap_or_else(|| predictions_path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned()));
    let out = s.path(args.out, "out")?;

    let benchmark = load_benchmark(&benchmark_path).with_context(|| format!("reading {}", benchmark_path.display()))?;
    let predictions =
        load_predictions(&predictions_path).with_context(|| format!("reading {}", predictions_path.display()))?;
    let report = score(&benchmark, &predictions, &name, modality)?;
    let c = report.counts;
    println!("n = {}  TT {}  TF {}  FT {}  FF {}", report.n, c.tt, c.tf, c.ft, c.ff);
    print!("{}", render_report(std::slice::from_ref(&report), ReportLayout::Table2));
    if let Some(out) = out {
        save_report(&report, &out).with_context(|| format!("writing {}", out.display()))?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

pub fn report(args: ReportArgs, s: &Settings) -> Result<()> {
    let paths = s.paths(args.reports, "reports")?;
    if paths.is_empty() {
        return Err(usage("missing --reports"));
    }
    let layout: ReportLayout = match s.get::<String>(args.layout, "layout")? {
        Some(l) => parse(&l, "--layout")?,
        None => ReportLayout::Table2,
    };
    let out = s.path(args.out, "out")?;
    let reports = paths
        .iter()
        .map(|p| load_report(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let table = render_report(&reports, layout);
    print!("{table}");
    if let Some(out) = out {
        std::fs::write(&out, &table).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}
