//! `misinfo-forge`: build synthetic misinformation datasets from a news
//! corpus and score detectors on a single-caption benchmark.
//!
//! Exit status is 0 on success, 2 for usage errors and 1 for data errors.
//! Logging is controlled by `MISINFO_FORGE_LOG` (error, warn, info, debug).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::UsageError;

#[derive(Parser, Debug)]
#[command(name = "misinfo-forge", version, about = "Synthetic misinformation datasets and detector evaluation")]
struct Cli {
    /// TOML file supplying defaults for any flag
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the per-topic index and an optional top-k neighbour cache
    Index(IndexArgs),
    /// Generate truthful and falsified pairs with one misinformer
    Generate(GenerateArgs),
    /// Merge an OOC and an NEI dataset into a three-class hybrid
    Combine(CombineArgs),
    /// Per-class counts of one or more datasets
    Stats(StatsArgs),
    /// Deterministic stand-in embeddings for tests and dry runs
    MockEmbed(MockEmbedArgs),
    /// Convert an externally published dataset
    Import(ImportArgs),
    /// Score a prediction file against a benchmark
    Evaluate(EvaluateArgs),
    /// Render saved evaluation reports as a table
    Report(ReportArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Index(_) => "index",
            Command::Generate(_) => "generate",
            Command::Combine(_) => "combine",
            Command::Stats(_) => "stats",
            Command::MockEmbed(_) => "mock-embed",
            Command::Import(_) => "import",
            Command::Evaluate(_) => "evaluate",
            Command::Report(_) => "report",
        }
    }
}

#[derive(Args, Debug)]
pub struct IndexArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub image_embeddings: Option<PathBuf>,
    #[arg(long)]
    pub text_embeddings: Option<PathBuf>,
    /// Neighbours kept per record and space
    #[arg(long)]
    pub k: Option<usize>,
    /// Cache file; without it only topic statistics are printed
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub image_embeddings: Option<PathBuf>,
    #[arg(long)]
    pub text_embeddings: Option<PathBuf>,
    /// Entity annotations (required by the entity-swap strategies)
    #[arg(long)]
    pub entities: Option<PathBuf>,
    /// rs-c, rst-c, rst-i, rst-alt, cst-c, cst-i, cst-alt, r-nest,
    /// clip-nest-c, clip-nest-i or clip-nest-alt
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Extra donors tried after an inadmissible entity-swap pair
    #[arg(long)]
    pub retry_budget: Option<u32>,
    /// keep-all or balanced
    #[arg(long)]
    pub balance: Option<String>,
    /// Only use records of this split (train, val, test)
    #[arg(long)]
    pub split: Option<String>,
    /// Neighbour cache written by `index`
    #[arg(long)]
    pub cache: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Dataset file; the manifest is written next to it
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CombineArgs {
    /// Dataset holding truthful and OOC pairs
    #[arg(long)]
    pub ooc: Option<PathBuf>,
    /// Dataset holding truthful and NEI pairs
    #[arg(long)]
    pub nei: Option<PathBuf>,
    /// none or downsample (keep-all and balanced are accepted as aliases)
    #[arg(long)]
    pub balance: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    #[arg(long = "dataset")]
    pub datasets: Vec<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MockEmbedArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// image or text
    #[arg(long)]
    pub modality: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ImportArgs {
    /// newsclippings, meir or cosmos-test
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Corpus used to resolve NewsCLIPings caption ids
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub benchmark: Option<PathBuf>,
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Row label, usually the training data's misinformer
    #[arg(long)]
    pub name: Option<String>,
    /// image-only, text-only or multimodal
    #[arg(long)]
    pub modality: Option<String>,
    /// Report file (JSON)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(long = "reports", num_args = 1..)]
    pub reports: Vec<PathBuf>,
    /// table2 or table3
    #[arg(long)]
    pub layout: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MISINFO_FORGE_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result =
        config::Settings::load(cli.config.as_deref(), cli.command.name()).and_then(|settings| match cli.command {
            Command::Index(a) => commands::index(a, &settings),
            Command::Generate(a) => commands::generate(a, &settings),
            Command::Combine(a) => commands::combine(a, &settings),
            Command::Stats(a) => commands::stats(a, &settings),
            Command::MockEmbed(a) => commands::mock_embed(a, &settings),
            Command::Import(a) => commands::import(a, &settings),
            Command::Evaluate(a) => commands::evaluate(a, &settings),
            Command::Report(a) => commands::report(a, &settings),
        });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
