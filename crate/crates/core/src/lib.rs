//! Synthetic misinformation dataset generation and single-caption evaluation
//! for image-caption misinformation detectors.
//!
//! A corpus of truthful news records is indexed by topic and embedded in an
//! image and a text space. Misinformers derive one falsified pair per record,
//! either by substituting an image or caption (out-of-context) or by swapping
//! named entities (entity inconsistency). Runs are seeded per record so output
//! does not depend on the worker count.

pub mod annotation;
pub mod cache;
pub mod corpus;
pub mod dataset;
pub mod embedding;
pub mod engine;
pub mod error;
pub mod eval;
pub mod external;
pub mod index;
pub mod seed;
pub mod strategy;
pub mod swap;
pub mod synth;

pub use annotation::{load_annotations, AnnotatedCaption, Annotations, EntitySpan, EntityType};
pub use cache::TopKCache;
pub use corpus::{load_corpus, Corpus, NewsRecord, Split};
pub use dataset::{
    combine_hybrid, dataset_stats, emit_dataset, ClassCounts, DatasetMeta, HybridBalance, HybridSpec, Manifest,
};
pub use embedding::{load_embeddings, mock_embed, EmbeddingStore, Modality};
pub use engine::{generate, generate_with_workers, BalanceMode, Generation, GenerationInputs};
pub use error::{Error, Result};
pub use eval::{render_report, score, EvalItem, EvalReport, Prediction, ReportLayout};
pub use external::{import_external, ExternalFormat, Imported};
pub use index::{nearest_candidate, top_k, CandidateFilter, Stores, TopicIndex};
pub use strategy::{GeneratedPair, Label, Strategy, StrategyKind};
