//! Manual review of gold-set candidates: a queue over the candidate
//! dataset, an append-only JSONL verdict log, and export of the reviewed
//! gold set.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::model::{AnswerSpan, Article, Dataset, Paragraph, QaItem};
use crate::text::{char_len, slice_chars};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Corrected,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewVerdict {
    pub qa_id: String,
    pub decision: Decision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrected_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrected_start: Option<usize>,
    #[serde(default)]
    pub reviewer: String,
    /// Milliseconds since the Unix epoch; filled in on submission when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

impl ReviewVerdict {
    pub fn accept(qa_id: impl Into<String>) -> Self {
        Self::new(qa_id, Decision::Accept)
    }

    pub fn reject(qa_id: impl Into<String>) -> Self {
        Self::new(qa_id, Decision::Reject)
    }

    pub fn corrected(qa_id: impl Into<String>, text: impl Into<String>, start: usize) -> Self {
        Self {
            corrected_text: Some(text.into()),
            corrected_start: Some(start),
            ..Self::new(qa_id, Decision::Corrected)
        }
    }

    fn new(qa_id: impl Into<String>, decision: Decision) -> Self {
        Self {
            qa_id: qa_id.into(),
            decision,
            corrected_text: None,
            corrected_start: None,
            reviewer: String::new(),
            timestamp: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReviewError {
    #[error("unknown question id {0:?}")]
    NotFound(String),
    #[error("corrected verdict needs both corrected_text and corrected_start")]
    MissingCorrection,
    #[error("corrected span at {start}: expected {expected:?}, context has {actual:?}")]
    InvalidSpan { start: usize, expected: String, actual: Option<String> },
    #[error("duplicate question id {0:?} in candidates")]
    DuplicateId(String),
    #[error("verdict log {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("verdict log {path} line {line} is corrupt: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
}

/// Everything a reviewer needs to judge one candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewExample {
    pub qa_id: String,
    pub title: String,
    pub context: String,
    pub question: String,
    pub is_impossible: bool,
    pub answers: Vec<AnswerSpan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plausible_answers: Option<Vec<AnswerSpan>>,
    /// Zero-based position in the queue.
    pub position: usize,
    pub total: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<ReviewVerdict>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub total: usize,
    pub reviewed: usize,
    pub unreviewed: usize,
    pub accepted: usize,
    pub corrected: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone, Copy)]
struct Location {
    article: usize,
    paragraph: usize,
    qa: usize,
}

pub struct ReviewSession {
    candidates: Dataset,
    order: Vec<String>,
    locations: HashMap<String, Location>,
    verdicts: HashMap<String, ReviewVerdict>,
    log_path: Option<PathBuf>,
    log: Option<File>,
}

impl std::fmt::Debug for ReviewSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReviewSession")
            .field("candidates", &self.order.len())
            .field("verdicts", &self.verdicts.len())
            .field("log_path", &self.log_path)
            .finish()
    }
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

impl ReviewSession {
    /// A session whose verdicts live only in memory.
    pub fn in_memory(candidates: Dataset) -> Result<Self, ReviewError> {
        let mut order = Vec::new();
        let mut locations = HashMap::new();
        for (ai, article) in candidates.data.iter().enumerate() {
            for (pi, paragraph) in article.paragraphs.iter().enumerate() {
                for (qi, qa) in paragraph.qas.iter().enumerate() {
                    let loc = Location { article: ai, paragraph: pi, qa: qi };
                    if locations.insert(qa.id.clone(), loc).is_some() {
                        return Err(ReviewError::DuplicateId(qa.id.clone()));
                    }
                    order.push(qa.id.clone());
                }
            }
        }
        Ok(Self { candidates, order, locations, verdicts: HashMap::new(), log_path: None, log: None })
    }

    /// Open a session backed by a verdict log, replaying any verdicts
    /// already in it. A truncated final line is discarded; verdicts for ids
    /// outside the candidate set are ignored.
    pub fn open(candidates: Dataset, log_path: impl AsRef<Path>) -> Result<Self, ReviewError> {
        let path = log_path.as_ref().to_path_buf();
        let io = |source| ReviewError::Io { path: path.clone(), source };
        let mut session = Self::in_memory(candidates)?;

        let mut valid_len = 0u64;
        if path.exists() {
            let mut reader = BufReader::new(File::open(&path).map_err(io)?);
            let mut line = String::new();
            let mut number = 0;
            loop {
                line.clear();
                let read = reader.read_line(&mut line).map_err(io)?;
                if read == 0 {
                    break;
                }
                number += 1;
                if line.trim().is_empty() {
                    valid_len += read as u64;
                    continue;
                }
                match serde_json::from_str::<ReviewVerdict>(&line) {
                    Ok(v) if line.ends_with('\n') => {
                        valid_len += read as u64;
                        if session.locations.contains_key(&v.qa_id) {
                            session.verdicts.insert(v.qa_id.clone(), v);
                        } else {
                            log::warn!("{}: ignoring verdict for unknown id {:?}", path.display(), v.qa_id);
                        }
                    }
                    result => {
                        let mut rest = String::new();
                        reader.read_line(&mut rest).map_err(io)?;
                        if !rest.is_empty() {
                            let message = result.err().map_or_else(|| "unterminated line".into(), |e| e.to_string());
                            return Err(ReviewError::Corrupt { path: path.clone(), line: number, message });
                        }
                        log::warn!("{}: dropping truncated final line {number}", path.display());
                        break;
                    }
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(io)?;
        file.set_len(valid_len).map_err(io)?;
        session.log = Some(file);
        session.log_path = Some(path);
        Ok(session)
    }

    pub fn total(&self) -> usize {
        self.order.len()
    }

    fn qa_at(&self, loc: Location) -> (&Article, &Paragraph, &QaItem) {
        let article = &self.candidates.data[loc.article];
        let paragraph = &article.paragraphs[loc.paragraph];
        (article, paragraph, &paragraph.qas[loc.qa])
    }

    fn example_at(&self, position: usize) -> ReviewExample {
        let id = &self.order[position];
        let (article, paragraph, qa) = self.qa_at(self.locations[id]);
        ReviewExample {
            qa_id: qa.id.clone(),
            title: article.title.clone(),
            context: paragraph.context.clone(),
            question: qa.question.clone(),
            is_impossible: qa.is_impossible,
            answers: qa.answers.clone(),
            plausible_answers: qa.plausible_answers.clone(),
            position,
            total: self.order.len(),
            verdict: self.verdicts.get(id).cloned(),
        }
    }

    /// First candidate in queue order without a verdict.
    pub fn next_unreviewed(&self) -> Option<ReviewExample> {
        let position = self.order.iter().position(|id| !self.verdicts.contains_key(id))?;
        Some(self.example_at(position))
    }

    pub fn example(&self, qa_id: &str) -> Result<ReviewExample, ReviewError> {
        let position =
            self.order.iter().position(|id| id == qa_id).ok_or_else(|| ReviewError::NotFound(qa_id.to_owned()))?;
        Ok(self.example_at(position))
    }

    pub fn verdict(&self, qa_id: &str) -> Option<&ReviewVerdict> {
        self.verdicts.get(qa_id)
    }

    /// Validate and record a verdict; the latest verdict for an id wins.
    pub fn submit(&mut self, mut verdict: ReviewVerdict) -> Result<ReviewVerdict, ReviewError> {
        let loc = *self.locations.get(&verdict.qa_id).ok_or_else(|| ReviewError::NotFound(verdict.qa_id.clone()))?;
        match verdict.decision {
            Decision::Corrected => {
                let (Some(text), Some(start)) = (&verdict.corrected_text, verdict.corrected_start) else {
                    return Err(ReviewError::MissingCorrection);
                };
                let context = &self.qa_at(loc).1.context;
                let actual = slice_chars(context, start, char_len(text));
                if text.is_empty() || actual != Some(text.as_str()) {
                    return Err(ReviewError::InvalidSpan {
                        start,
                        expected: text.clone(),
                        actual: actual.map(str::to_owned),
                    });
                }
            }
            Decision::Accept | Decision::Reject => {
                verdict.corrected_text = None;
                verdict.corrected_start = None;
            }
        }
        verdict.timestamp.get_or_insert_with(now_ms);

        if let Some(file) = &mut self.log {
            let mut line = serde_json::to_string(&verdict).expect("verdicts always serialize");
            line.push('\n');
            let path = self.log_path.clone().unwrap_or_default();
            file.write_all(line.as_bytes())
                .and_then(|_| file.flush())
                .map_err(|source| ReviewError::Io { path, source })?;
        }
        self.verdicts.insert(verdict.qa_id.clone(), verdict.clone());
        Ok(verdict)
    }

    pub fn progress(&self) -> Progress {
        let mut p = Progress { total: self.order.len(), ..Progress::default() };
        for v in self.verdicts.values() {
            match v.decision {
                Decision::Accept => p.accepted += 1,
                Decision::Corrected => p.corrected += 1,
                Decision::Reject => p.rejected += 1,
            }
        }
        p.reviewed = self.verdicts.len();
        p.unreviewed = p.total - p.reviewed;
        p
    }

    /// Accepted items verbatim, corrected items with their single corrected
    /// span; rejected and unreviewed items are left out, as are paragraphs
    /// and articles left without questions.
    pub fn export_gold(&self) -> Dataset {
        let mut data = Vec::new();
        for article in &self.candidates.data {
            let mut paragraphs = Vec::new();
            for paragraph in &article.paragraphs {
                let qas: Vec<QaItem> = paragraph
                    .qas
                    .iter()
                    .filter_map(|qa| {
                        let verdict = self.verdicts.get(&qa.id)?;
                        match verdict.decision {
                            Decision::Accept => Some(qa.clone()),
                            Decision::Reject => None,
                            Decision::Corrected => {
                                let text = verdict.corrected_text.clone()?;
                                let start = verdict.corrected_start?;
                                Some(QaItem {
                                    answers: vec![AnswerSpan::new(text, start)],
                                    is_impossible: false,
                                    plausible_answers: None,
                                    ..qa.clone()
                                })
                            }
                        }
                    })
                    .collect();
                if !qas.is_empty() {
                    paragraphs.push(Paragraph {
                        context: paragraph.context.clone(),
                        qas,
                        extra: paragraph.extra.clone(),
                    });
                }
            }
            if !paragraphs.is_empty() {
                data.push(Article { title: article.title.clone(), paragraphs, extra: article.extra.clone() });
            }
        }
        Dataset { version: self.candidates.version.clone(), data, extra: self.candidates.extra.clone() }
    }
}
