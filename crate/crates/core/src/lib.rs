//! Translate SQuAD 2.0 style question-answering datasets into another
//! language while keeping every answer span exact.
//!
//! Scoring code is generic over [`scalar::Score`]; the aliases below fix it
//! to `f64`, with `f32` variants for memory-constrained runs.

pub mod align;
pub mod eval;
pub mod http;
pub mod model;
pub mod pipeline;
pub mod review;
pub mod scalar;
pub mod segmentation;
pub mod similarity;
pub mod text;
pub mod translation;
pub mod transliteration;

pub use model::{AnswerSpan, Article, Dataset, DatasetError, Paragraph, QaItem};
pub use pipeline::{FailureRecord, Pipeline, PipelineConfig, PipelineOutput, RunSummary, Stage};
pub use scalar::Score;
pub use similarity::{LexicalSimilarity, Similarity};
pub use translation::{DictionaryTranslator, IdentityTranslator, TranslateError, TranslationCache, Translator};

pub type AlignConfig = align::AlignConfig<f64>;
pub type AlignConfigF32 = align::AlignConfig<f32>;
pub type AlignmentResult = align::AlignmentResult<f64>;
pub type AlignmentResultF32 = align::AlignmentResult<f32>;
pub type SimilarityMatrix = align::SimilarityMatrix<f64>;
pub type EvalReport = eval::EvalReport<f64>;
pub type EvalReportF32 = eval::EvalReport<f32>;
