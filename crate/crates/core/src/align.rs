//! Answer re-alignment inside a translated sentence.
//!
//! The answer is translated on its own, so its surface form rarely appears
//! verbatim in the translated sentence. Alignment scores every word-boundary
//! phrase of the sentence (up to a length cap) against the translated answer,
//! takes the best one as the base phrase, then grows it one word at a time
//! while the grown phrase stays within `threshold_ratio` of the base score.

use serde::{Deserialize, Serialize};

use crate::scalar::Score;
use crate::similarity::Similarity;
use crate::text::CharCursor;
use crate::translation::TranslatedContext;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Word {
    pub text: String,
    /// Code-point offset into the sentence.
    pub start: usize,
    byte_start: usize,
    byte_end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordSequence {
    pub sentence: String,
    pub words: Vec<Word>,
}

impl WordSequence {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Sentence text from the start of word `first` to the end of word
    /// `last`, inner whitespace preserved.
    pub fn phrase(&self, first: usize, last: usize) -> &str {
        &self.sentence[self.words[first].byte_start..self.words[last].byte_end]
    }
}

/// Maximal runs of non-whitespace, with code-point offsets.
pub fn tokenize_words(sentence: &str) -> WordSequence {
    let mut words = Vec::new();
    let mut cursor = CharCursor::new(sentence);
    let mut open: Option<usize> = None;
    let mut push = |from: usize, to: usize, cursor: &mut CharCursor| {
        words.push(Word {
            text: sentence[from..to].to_owned(),
            start: cursor.advance_to(from),
            byte_start: from,
            byte_end: to,
        });
    };
    for (b, c) in sentence.char_indices() {
        match (c.is_whitespace(), open) {
            (false, None) => open = Some(b),
            (true, Some(from)) => {
                push(from, b, &mut cursor);
                open = None;
            }
            _ => {}
        }
    }
    if let Some(from) = open {
        push(from, sentence.len(), &mut cursor);
    }
    WordSequence { sentence: sentence.to_owned(), words }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignConfig<S> {
    /// Grown phrases qualify when they score at least this fraction of the
    /// base phrase's score. At exactly 1 they must strictly exceed it, which
    /// disables extension.
    pub threshold_ratio: S,
    /// Base scores below this are rejected.
    pub min_accept_floor: S,
    /// Longest phrase considered, in words. `None` derives it from the
    /// answer: `max(2 * answer_words + 3, 8)`.
    pub max_phrase_words: Option<usize>,
    /// After extension, try the phrase, and the phrase grown by one word on
    /// either side, with leading/trailing punctuation removed; the best of
    /// those replaces it when strictly higher ("sat." → "sat"). Needed
    /// because words are whitespace runs and carry attached punctuation.
    #[serde(default = "default_true")]
    pub trim_punctuation: bool,
}

fn default_true() -> bool {
    true
}

impl<S: Score> Default for AlignConfig<S> {
    fn default() -> Self {
        Self {
            threshold_ratio: S::of(0.99),
            min_accept_floor: S::of(0.35),
            max_phrase_words: None,
            trim_punctuation: true,
        }
    }
}

impl<S: Score> AlignConfig<S> {
    pub fn validate(&self) -> Result<(), AlignError> {
        let ratio_ok = self.threshold_ratio > S::zero() && self.threshold_ratio <= S::one();
        let floor_ok = self.min_accept_floor >= S::zero() && self.min_accept_floor <= S::one();
        if !ratio_ok {
            return Err(AlignError::Config(format!("threshold_ratio must be in (0, 1], got {}", self.threshold_ratio)));
        }
        if !floor_ok {
            return Err(AlignError::Config(format!(
                "min_accept_floor must be in [0, 1], got {}",
                self.min_accept_floor
            )));
        }
        if self.max_phrase_words == Some(0) {
            return Err(AlignError::Config("max_phrase_words must be at least 1".into()));
        }
        Ok(())
    }

    pub fn phrase_cap(&self, answer: &str) -> usize {
        self.max_phrase_words.unwrap_or_else(|| (2 * answer.split_whitespace().count() + 3).max(8))
    }

    fn qualifies(&self, score: S, base: S) -> bool {
        let above = if self.threshold_ratio >= S::one() { score > base } else { score >= self.threshold_ratio * base };
        above && score >= self.min_accept_floor
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AlignError {
    #[error("sentence has no words")]
    EmptySentence,
    #[error("translated answer is empty")]
    EmptyAnswer,
    #[error("invalid alignment config: {0}")]
    Config(String),
    #[error("sentence {index} out of range ({count} sentences)")]
    SentenceOutOfRange { index: usize, count: usize },
    #[error("offset {offset} out of range for sentence {index} of length {len}")]
    OffsetOutOfRange { index: usize, offset: usize, len: usize },
}

/// Scores of every phrase `(first, last)` with at most `cap` words, stored
/// row-wise by first word.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix<S> {
    rows: Vec<Vec<S>>,
    cap: usize,
}

impl<S: Score> SimilarityMatrix<S> {
    pub fn cap(&self) -> usize {
        self.cap
    }

    /// Number of stored entries.
    pub fn len(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, first: usize, last: usize) -> Option<S> {
        if last < first {
            return None;
        }
        self.rows.get(first)?.get(last - first).copied()
    }

    /// `(first, last, score)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, S)> + '_ {
        self.rows.iter().enumerate().flat_map(|(i, row)| row.iter().enumerate().map(move |(k, &s)| (i, i + k, s)))
    }

    /// Build a matrix from explicit entries. Missing cells inside a row are
    /// not representable, so each row must be a contiguous run from its
    /// first word.
    pub fn from_rows(rows: Vec<Vec<S>>, cap: usize) -> Self {
        let rows = rows.into_iter().map(|r| r.into_iter().map(clamp_unit).collect()).collect();
        Self { rows, cap }
    }
}

fn clamp_unit<S: Score>(s: S) -> S {
    if s.is_nan() {
        S::zero()
    } else {
        s.max(S::zero()).min(S::one())
    }
}

pub fn build_similarity_matrix<S: Score>(
    ws: &WordSequence,
    translated_answer: &str,
    cfg: &AlignConfig<S>,
    sim: &dyn Similarity<S>,
) -> SimilarityMatrix<S> {
    let cap = cfg.phrase_cap(translated_answer);
    let n = ws.len();
    let rows = (0..n)
        .map(|i| (i..n.min(i + cap)).map(|j| clamp_unit(sim.similarity(ws.phrase(i, j), translated_answer))).collect())
        .collect();
    SimilarityMatrix { rows, cap }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhraseScore<S> {
    pub first: usize,
    pub last: usize,
    pub score: S,
}

impl<S> PhraseScore<S> {
    pub fn word_count(&self) -> usize {
        self.last - self.first + 1
    }
}

/// Highest-scoring entry; ties go to the phrase with fewer words, then to
/// the one starting further left.
pub fn find_base_phrase<S: Score>(m: &SimilarityMatrix<S>) -> Option<PhraseScore<S>> {
    let mut best: Option<PhraseScore<S>> = None;
    for (first, last, score) in m.iter() {
        let candidate = PhraseScore { first, last, score };
        let better = match &best {
            None => true,
            Some(b) => {
                score > b.score || (score == b.score && (candidate.word_count(), first) < (b.word_count(), b.first))
            }
        };
        if better {
            best = Some(candidate);
        }
    }
    best
}

/// Grow `base` one word at a time. Each round scores the phrase extended by
/// one word on the left and on the right; among those that stay within
/// `threshold_ratio` of the base score (and above the acceptance floor) the
/// higher one is taken, the right side winning exact ties. Stops when
/// neither side qualifies, both edges are reached, or the phrase hits the
/// length cap.
pub fn extend_phrase<S: Score>(
    ws: &WordSequence,
    base: PhraseScore<S>,
    translated_answer: &str,
    cfg: &AlignConfig<S>,
    sim: &dyn Similarity<S>,
) -> PhraseScore<S> {
    let cap = cfg.phrase_cap(translated_answer);
    let reference = base.score;
    let mut current = base;
    while current.word_count() < cap {
        let score_of = |first: usize, last: usize| PhraseScore {
            first,
            last,
            score: clamp_unit(sim.similarity(ws.phrase(first, last), translated_answer)),
        };
        let left = (current.first > 0)
            .then(|| score_of(current.first - 1, current.last))
            .filter(|p| cfg.qualifies(p.score, reference));
        let right = (current.last + 1 < ws.len())
            .then(|| score_of(current.first, current.last + 1))
            .filter(|p| cfg.qualifies(p.score, reference));
        current = match (left, right) {
            (Some(l), Some(r)) => {
                if l.score > r.score {
                    l
                } else {
                    r
                }
            }
            (Some(l), None) => l,
            (None, Some(r)) => r,
            (None, None) => break,
        };
    }
    current
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignStatus {
    Aligned,
    BelowFloor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult<S> {
    pub status: AlignStatus,
    /// Empty when below the floor.
    pub answer_text: String,
    /// Code-point offset of `answer_text` in the sentence.
    pub start_in_sentence: usize,
    /// Final phrase score, or the base score when below the floor.
    pub score: S,
    pub base_score: S,
}

impl<S> AlignmentResult<S> {
    pub fn is_aligned(&self) -> bool {
        self.status == AlignStatus::Aligned
    }
}

pub fn align_answer<S: Score>(
    sentence: &str,
    translated_answer: &str,
    cfg: &AlignConfig<S>,
    sim: &dyn Similarity<S>,
) -> Result<AlignmentResult<S>, AlignError> {
    cfg.validate()?;
    if translated_answer.trim().is_empty() {
        return Err(AlignError::EmptyAnswer);
    }
    let ws = tokenize_words(sentence);
    if ws.is_empty() {
        return Err(AlignError::EmptySentence);
    }
    let matrix = build_similarity_matrix(&ws, translated_answer, cfg, sim);
    let base = find_base_phrase(&matrix).expect("non-empty sentence yields a non-empty matrix");
    // A short answer glued to punctuation ("पग,") can sit under the floor
    // only because of that punctuation.
    let rescued = cfg.trim_punctuation
        && base.score < cfg.min_accept_floor
        && punctuation_trims(ws.phrase(base.first, base.last))
            .into_iter()
            .any(|(_, t)| clamp_unit(sim.similarity(t, translated_answer)) >= cfg.min_accept_floor);
    if base.score < cfg.min_accept_floor && !rescued {
        return Ok(AlignmentResult {
            status: AlignStatus::BelowFloor,
            answer_text: String::new(),
            start_in_sentence: 0,
            score: base.score,
            base_score: base.score,
        });
    }
    let grown = if rescued { base } else { extend_phrase(&ws, base, translated_answer, cfg, sim) };
    let mut best = (grown.first, 0, ws.phrase(grown.first, grown.last), grown.score);
    if cfg.trim_punctuation {
        let cap = cfg.phrase_cap(translated_answer);
        for (left, right) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            if left > grown.first || grown.last + right >= ws.len() || grown.word_count() + left + right > cap {
                continue;
            }
            let first = grown.first - left;
            for (skip, trimmed) in punctuation_trims(ws.phrase(first, grown.last + right)) {
                let score = clamp_unit(sim.similarity(trimmed, translated_answer));
                if score > best.3 {
                    best = (first, skip, trimmed, score);
                }
            }
        }
    }
    let (first, skip, text, score) = best;
    Ok(AlignmentResult {
        status: AlignStatus::Aligned,
        answer_text: text.to_owned(),
        start_in_sentence: ws.words[first].start + skip,
        score,
        base_score: base.score,
    })
}

fn is_punctuation(c: char) -> bool {
    use unicode_general_category::{get_general_category, GeneralCategory::*};
    matches!(
        get_general_category(c),
        ConnectorPunctuation
            | DashPunctuation
            | OpenPunctuation
            | ClosePunctuation
            | InitialPunctuation
            | FinalPunctuation
            | OtherPunctuation
    )
}

/// Non-empty variants of `phrase` with its leading punctuation, trailing
/// punctuation, or both removed, paired with the number of code points
/// dropped from the front.
fn punctuation_trims(phrase: &str) -> Vec<(usize, &str)> {
    let lead = phrase.trim_start_matches(is_punctuation);
    let skip = phrase[..phrase.len() - lead.len()].chars().count();
    let trail = phrase.trim_end_matches(is_punctuation);
    let both = lead.trim_end_matches(is_punctuation);
    [(skip, lead), (0, trail), (skip, both)]
        .into_iter()
        .filter(|(_, t)| !t.is_empty() && t.len() < phrase.len())
        .collect()
}

/// Position of a sentence-relative offset in the full translated context.
pub fn compute_global_offset(
    tc: &TranslatedContext,
    sentence_index: usize,
    start_in_sentence: usize,
) -> Result<usize, AlignError> {
    let count = tc.sentence_offsets.len();
    let base = *tc
        .sentence_offsets
        .get(sentence_index)
        .ok_or(AlignError::SentenceOutOfRange { index: sentence_index, count })?;
    let len = tc.sentence_len(sentence_index);
    if start_in_sentence >= len {
        return Err(AlignError::OffsetOutOfRange { index: sentence_index, offset: start_in_sentence, len });
    }
    Ok(base + start_in_sentence)
}
