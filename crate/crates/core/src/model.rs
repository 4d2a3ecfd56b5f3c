//! SQuAD 2.0 object graph: parsing, serialization, span validation, counts.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::text::{char_len, slice_chars};

/// The version string SQuAD 2.0 files carry.
pub const SQUAD_V2: &str = "v2.0";

/// Unrecognized JSON members, kept so that a parse/serialize round trip is
/// lossless.
pub type Extra = Map<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerSpan {
    pub text: String,
    /// Offset in code points into the owning paragraph's context.
    pub answer_start: usize,
    #[serde(flatten)]
    pub extra: Extra,
}

impl AnswerSpan {
    pub fn new(text: impl Into<String>, answer_start: usize) -> Self {
        Self { text: text.into(), answer_start, extra: Extra::new() }
    }

    /// Exclusive end offset in code points.
    pub fn end(&self) -> usize {
        self.answer_start + char_len(&self.text)
    }

    /// Whether `context[answer_start .. end)` is exactly `text`.
    pub fn matches(&self, context: &str) -> bool {
        slice_chars(context, self.answer_start, char_len(&self.text)) == Some(self.text.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaItem {
    pub question: String,
    pub id: String,
    pub answers: Vec<AnswerSpan>,
    pub is_impossible: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plausible_answers: Option<Vec<AnswerSpan>>,
    #[serde(flatten)]
    pub extra: Extra,
}

impl QaItem {
    pub fn answerable(id: impl Into<String>, question: impl Into<String>, answers: Vec<AnswerSpan>) -> Self {
        Self {
            question: question.into(),
            id: id.into(),
            answers,
            is_impossible: false,
            plausible_answers: None,
            extra: Extra::new(),
        }
    }

    pub fn impossible(id: impl Into<String>, question: impl Into<String>) -> Self {
        Self {
            question: question.into(),
            id: id.into(),
            answers: Vec::new(),
            is_impossible: true,
            plausible_answers: None,
            extra: Extra::new(),
        }
    }

    /// Answers followed by plausible answers.
    pub fn all_spans(&self) -> impl Iterator<Item = (SpanKind, usize, &AnswerSpan)> {
        let answers = self.answers.iter().enumerate().map(|(i, a)| (SpanKind::Answer, i, a));
        let plausible = self.plausible_answers.iter().flatten().enumerate().map(|(i, a)| (SpanKind::Plausible, i, a));
        answers.chain(plausible)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paragraph {
    pub context: String,
    pub qas: Vec<QaItem>,
    #[serde(flatten)]
    pub extra: Extra,
}

impl Paragraph {
    pub fn new(context: impl Into<String>, qas: Vec<QaItem>) -> Self {
        Self { context: context.into(), qas, extra: Extra::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Article {
    pub title: String,
    pub paragraphs: Vec<Paragraph>,
    #[serde(flatten)]
    pub extra: Extra,
}

impl Article {
    pub fn new(title: impl Into<String>, paragraphs: Vec<Paragraph>) -> Self {
        Self { title: title.into(), paragraphs, extra: Extra::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub version: String,
    pub data: Vec<Article>,
    #[serde(flatten)]
    pub extra: Extra,
}

impl Default for Dataset {
    fn default() -> Self {
        Self::new(Vec::new())
    }
}

impl Dataset {
    pub fn new(data: Vec<Article>) -> Self {
        Self { version: SQUAD_V2.to_owned(), data, extra: Extra::new() }
    }

    /// Every QA with the paragraph and article that own it, in file order.
    pub fn qas(&self) -> impl Iterator<Item = (&Article, &Paragraph, &QaItem)> {
        self.data.iter().flat_map(|a| a.paragraphs.iter().flat_map(move |p| p.qas.iter().map(move |q| (a, p, q))))
    }

    pub fn qa_count(&self) -> usize {
        self.data.iter().flat_map(|a| &a.paragraphs).map(|p| p.qas.len()).sum()
    }

    fn drop_extras(&mut self) {
        self.extra.clear();
        for article in &mut self.data {
            article.extra.clear();
            for paragraph in &mut article.paragraphs {
                paragraph.extra.clear();
                for qa in &mut paragraph.qas {
                    qa.extra.clear();
                    for span in qa.answers.iter_mut().chain(qa.plausible_answers.iter_mut().flatten()) {
                        span.extra.clear();
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnknownFields {
    #[default]
    Preserve,
    Drop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseOptions {
    pub unknown_fields: UnknownFields,
    /// Keep `plausible_answers` when present. When false they are discarded
    /// at parse time.
    pub keep_plausible_answers: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self { unknown_fields: UnknownFields::Preserve, keep_plausible_answers: true }
    }
}

/// A structural problem detected after the JSON itself decoded cleanly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaIssue {
    /// JSON path of the offending node, e.g. `data[0].paragraphs[2].qas[5]`.
    pub path: String,
    pub qa_id: Option<String>,
    pub message: String,
}

impl fmt::Display for SchemaIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.qa_id {
            Some(id) => write!(f, "{} (qa {}): {}", self.path, id, self.message),
            None => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("malformed JSON at byte {byte} (line {line}, column {column}): {message}")]
    Json { byte: usize, line: usize, column: usize, message: String },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("{} invalid item(s); first: {}", .0.len(), .0[0])]
    Invalid(Vec<SchemaIssue>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn byte_position(raw: &[u8], line: usize, column: usize) -> usize {
    let mut offset = 0;
    for (n, chunk) in raw.split_inclusive(|&b| b == b'\n').enumerate() {
        if n + 1 == line {
            return (offset + column.saturating_sub(1)).min(raw.len());
        }
        offset += chunk.len();
    }
    raw.len()
}

/// Parse a SQuAD 2.0 JSON document with default options.
pub fn parse_dataset(raw: &[u8]) -> Result<Dataset, DatasetError> {
    parse_dataset_with(raw, ParseOptions::default())
}

pub fn parse_dataset_with(raw: &[u8], options: ParseOptions) -> Result<Dataset, DatasetError> {
    let mut de = serde_json::Deserializer::from_slice(raw);
    let json_error = |inner: serde_json::Error, path: String| match inner.classify() {
        serde_json::error::Category::Data => DatasetError::Schema { path, message: inner.to_string() },
        serde_json::error::Category::Io => DatasetError::Io(inner.into()),
        _ => DatasetError::Json {
            byte: byte_position(raw, inner.line(), inner.column()),
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        },
    };
    let mut dataset: Dataset = match serde_path_to_error::deserialize(&mut de) {
        Ok(d) => d,
        Err(err) => {
            let path = err.path().to_string();
            return Err(json_error(err.into_inner(), path));
        }
    };
    de.end().map_err(|e| json_error(e, ".".into()))?;

    if dataset.version != SQUAD_V2 {
        log::warn!("dataset version is {:?}, expected {:?}", dataset.version, SQUAD_V2);
    }
    if options.unknown_fields == UnknownFields::Drop {
        dataset.drop_extras();
    }
    if !options.keep_plausible_answers {
        for article in &mut dataset.data {
            for paragraph in &mut article.paragraphs {
                for qa in &mut paragraph.qas {
                    qa.plausible_answers = None;
                }
            }
        }
    }

    let issues = structural_issues(&dataset);
    if issues.is_empty() {
        Ok(dataset)
    } else {
        Err(DatasetError::Invalid(issues))
    }
}

/// Checks that hold for any well-formed file, independent of whether span
/// texts match: bounds, id uniqueness, answerability consistency, titles.
pub fn structural_issues(dataset: &Dataset) -> Vec<SchemaIssue> {
    let mut issues = Vec::new();
    let mut seen = HashSet::new();
    for (ai, article) in dataset.data.iter().enumerate() {
        if article.title.is_empty() {
            issues.push(SchemaIssue {
                path: format!("data[{ai}].title"),
                qa_id: None,
                message: "title is empty".into(),
            });
        }
        for (pi, paragraph) in article.paragraphs.iter().enumerate() {
            let context_len = char_len(&paragraph.context);
            for (qi, qa) in paragraph.qas.iter().enumerate() {
                let path = format!("data[{ai}].paragraphs[{pi}].qas[{qi}]");
                let mut issue = |message: String| {
                    issues.push(SchemaIssue { path: path.clone(), qa_id: Some(qa.id.clone()), message })
                };
                if !seen.insert(qa.id.as_str()) {
                    issue("duplicate id".into());
                }
                if qa.is_impossible && !qa.answers.is_empty() {
                    issue("is_impossible is true but answers is non-empty".into());
                }
                if !qa.is_impossible && qa.answers.is_empty() {
                    issue("is_impossible is false but answers is empty".into());
                }
                for (kind, idx, span) in qa.all_spans() {
                    if span.end() > context_len {
                        issue(format!(
                            "{kind}[{idx}] span {}..{} exceeds context length {context_len}",
                            span.answer_start,
                            span.end()
                        ));
                    }
                }
            }
        }
    }
    issues
}

pub fn serialize_dataset(dataset: &Dataset) -> Vec<u8> {
    serde_json::to_vec(dataset).expect("dataset serialization is infallible")
}

pub fn serialize_dataset_pretty(dataset: &Dataset) -> Vec<u8> {
    serde_json::to_vec_pretty(dataset).expect("dataset serialization is infallible")
}

pub fn read_dataset(path: impl AsRef<std::path::Path>) -> Result<Dataset, DatasetError> {
    parse_dataset(&std::fs::read(path)?)
}

pub fn write_dataset(path: impl AsRef<std::path::Path>, dataset: &Dataset) -> Result<(), DatasetError> {
    std::fs::write(path, serialize_dataset(dataset))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanKind {
    Answer,
    Plausible,
}

impl fmt::Display for SpanKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpanKind::Answer => "answers",
            SpanKind::Plausible => "plausible_answers",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanViolation {
    pub qa_id: String,
    pub kind: SpanKind,
    pub index: usize,
    pub expected: String,
    /// What the context actually holds at the span's offsets; `None` when
    /// the span runs past the end of the context.
    pub actual: Option<String>,
}

/// Every answer or plausible answer whose text is not the context slice at
/// its offset.
pub fn validate_spans(dataset: &Dataset) -> Vec<SpanViolation> {
    dataset
        .qas()
        .flat_map(|(_, paragraph, qa)| {
            qa.all_spans().filter_map(move |(kind, index, span)| {
                let actual = slice_chars(&paragraph.context, span.answer_start, char_len(&span.text));
                (actual != Some(span.text.as_str())).then(|| SpanViolation {
                    qa_id: qa.id.clone(),
                    kind,
                    index,
                    expected: span.text.clone(),
                    actual: actual.map(str::to_owned),
                })
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DatasetStats {
    pub article_count: usize,
    pub paragraph_count: usize,
    pub qa_count: usize,
    pub answerable_count: usize,
    pub unanswerable_count: usize,
}

pub fn dataset_stats(dataset: &Dataset) -> DatasetStats {
    let mut stats = DatasetStats { article_count: dataset.data.len(), ..Default::default() };
    for article in &dataset.data {
        stats.paragraph_count += article.paragraphs.len();
        for qa in article.paragraphs.iter().flat_map(|p| &p.qas) {
            stats.qa_count += 1;
            if qa.is_impossible {
                stats.unanswerable_count += 1;
            } else {
                stats.answerable_count += 1;
            }
        }
    }
    stats
}
