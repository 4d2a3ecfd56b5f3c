//! Sentence segmentation with code-point offsets, abbreviation handling and
//! CamelCase folding for translation input.

use std::collections::HashSet;
use std::ops::RangeInclusive;
use std::path::Path;

use crate::model::AnswerSpan;
use crate::text::{char_len, slice_chars};

const DEFAULT_ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "st", "jr", "sr", "vs", "etc", "e.g", "i.e", "u.s", "u.k", "l.a", "inc", "ltd",
    "co", "corp", "mt", "ft", "no", "vol", "approx", "cf", "al", "gen", "gov", "sen", "rev",
];

/// Capitalized words that almost always open a sentence. An abbreviation
/// followed by one of these still ends the sentence ("in L.A. He works").
const SENTENCE_STARTERS: &[&str] = &[
    "he",
    "she",
    "it",
    "they",
    "we",
    "i",
    "you",
    "the",
    "this",
    "that",
    "these",
    "those",
    "there",
    "his",
    "her",
    "its",
    "their",
    "our",
    "in",
    "on",
    "at",
    "after",
    "before",
    "but",
    "however",
    "when",
    "while",
    "then",
    "during",
    "since",
    "although",
    "today",
    "later",
    "meanwhile",
];

/// Tokens that end in a dot without ending a sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Abbreviations {
    tokens: HashSet<String>,
}

fn is_sentence_starter(word: &str) -> bool {
    let word: String =
        word.trim_start_matches(is_opener).trim_end_matches(|c: char| !c.is_alphanumeric()).to_lowercase();
    SENTENCE_STARTERS.contains(&word.as_str())
}

impl Default for Abbreviations {
    fn default() -> Self {
        Self::from_tokens(DEFAULT_ABBREVIATIONS.iter().copied())
    }
}

fn normalize_token(token: &str) -> String {
    token.trim_start_matches(is_opener).trim_end_matches('.').to_lowercase()
}

impl Abbreviations {
    pub fn empty() -> Self {
        Self { tokens: HashSet::new() }
    }

    pub fn from_tokens<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let mut out = Self::empty();
        out.extend(tokens);
        out
    }

    pub fn insert(&mut self, token: &str) -> bool {
        let token = normalize_token(token.trim());
        !token.is_empty() && self.tokens.insert(token)
    }

    pub fn extend<'a>(&mut self, tokens: impl IntoIterator<Item = &'a str>) {
        for t in tokens {
            self.insert(t);
        }
    }

    /// Adds tokens from an abbreviation file: one token per line, blank
    /// lines ignored, `#` starts a comment.
    pub fn extend_from_str(&mut self, contents: &str) {
        for line in contents.lines() {
            let line = line.split('#').next().unwrap_or_default().trim();
            if !line.is_empty() {
                self.insert(line);
            }
        }
    }

    pub fn extend_from_file(&mut self, path: impl AsRef<Path>) -> std::io::Result<()> {
        self.extend_from_str(&std::fs::read_to_string(path)?);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Whether the word preceding a full stop marks an abbreviation rather
    /// than a sentence end. Single letters and single-letter-dot chains
    /// ("L.A", "U.S") always count.
    pub fn is_abbreviation(&self, word: &str) -> bool {
        let token = normalize_token(word);
        if token.is_empty() {
            return false;
        }
        if token.split('.').all(|part| {
            let mut chars = part.chars();
            matches!((chars.next(), chars.next()), (Some(c), None) if c.is_alphabetic())
        }) {
            return true;
        }
        self.tokens.contains(&token)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub text: String,
    /// Code-point offset into the original context.
    pub start: usize,
}

impl Segment {
    pub fn char_len(&self) -> usize {
        char_len(&self.text)
    }

    /// Exclusive code-point end.
    pub fn end(&self) -> usize {
        self.start + self.char_len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentedContext {
    pub original: String,
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SegmentationError {
    #[error("answer {text:?} at {start} does not match the context")]
    SpanMismatch { text: String, start: usize },
    #[error("answer {text:?} at {start} lies outside every sentence")]
    SpanNotLocated { text: String, start: usize },
    #[error("segment range {first}..={last} is invalid for {count} segments")]
    BadRange { first: usize, last: usize, count: usize },
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '।')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '}' | '”' | '’' | '»')
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\'' | '(' | '[' | '{' | '“' | '‘' | '«')
}

fn is_uncased_letter(c: char) -> bool {
    c.is_alphabetic() && !c.is_lowercase() && !c.is_uppercase()
}

fn opens_sentence(c: char) -> bool {
    c.is_uppercase() || is_uncased_letter(c) || is_opener(c)
}

/// Split `context` at sentence-final punctuation (`. ! ? ।`, optionally
/// followed by closing quotes or brackets) when followed by whitespace and
/// an uppercase letter, an uncased letter, or an opening quote/bracket.
/// A single full stop after an abbreviation does not split unless the next
/// word is a common sentence opener.
pub fn segment_sentences(context: &str, abbreviations: &Abbreviations) -> SegmentedContext {
    let chars: Vec<char> = context.chars().collect();
    let n = chars.len();
    let mut cuts = Vec::new();

    let mut i = 0;
    while i < n {
        if !is_terminal(chars[i]) {
            i += 1;
            continue;
        }
        let run_start = i;
        let mut j = i;
        while j < n && is_terminal(chars[j]) {
            j += 1;
        }
        let run_end = j;
        while j < n && is_closer(chars[j]) {
            j += 1;
        }
        let mut k = j;
        while k < n && chars[k].is_whitespace() {
            k += 1;
        }
        if k > j && k < n && opens_sentence(chars[k]) {
            let single_stop = run_end - run_start == 1 && chars[run_start] == '.';
            let abbreviated = single_stop
                && abbreviations.is_abbreviation(&preceding_word(&chars, run_start))
                && !is_sentence_starter(&following_word(&chars, k));
            if !abbreviated {
                cuts.push(j);
            }
        }
        i = j.max(i + 1);
    }

    let mut segments = Vec::with_capacity(cuts.len() + 1);
    let mut from = 0;
    for end in cuts.into_iter().chain(std::iter::once(n)) {
        push_trimmed(&chars, from, end, &mut segments);
        from = end;
    }
    SegmentedContext { original: context.to_owned(), segments }
}

/// The whitespace-delimited word ending right before `at`, skipping
/// whitespace so that spaced-out initials ("L . A .") are seen.
fn preceding_word(chars: &[char], at: usize) -> String {
    let mut end = at;
    while end > 0 && chars[end - 1].is_whitespace() {
        end -= 1;
    }
    let mut start = end;
    while start > 0 && !chars[start - 1].is_whitespace() {
        start -= 1;
    }
    chars[start..end].iter().collect()
}

fn following_word(chars: &[char], at: usize) -> String {
    chars[at..].iter().take_while(|c| !c.is_whitespace()).collect()
}

fn push_trimmed(chars: &[char], mut from: usize, mut to: usize, out: &mut Vec<Segment>) {
    while from < to && chars[from].is_whitespace() {
        from += 1;
    }
    while to > from && chars[to - 1].is_whitespace() {
        to -= 1;
    }
    if from < to {
        out.push(Segment { text: chars[from..to].iter().collect(), start: from });
    }
}

impl SegmentedContext {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Minimal contiguous range of segments covering `span`.
    pub fn locate(&self, span: &AnswerSpan) -> Result<RangeInclusive<usize>, SegmentationError> {
        locate_answer_segments(self, span)
    }

    pub fn merge(&self, range: RangeInclusive<usize>) -> Result<SegmentedContext, SegmentationError> {
        merge_segments(self, range)
    }
}

pub fn locate_answer_segments(
    sc: &SegmentedContext,
    span: &AnswerSpan,
) -> Result<RangeInclusive<usize>, SegmentationError> {
    if !span.matches(&sc.original) {
        return Err(SegmentationError::SpanMismatch { text: span.text.clone(), start: span.answer_start });
    }
    let (start, end) = (span.answer_start, span.end());
    let mut first = None;
    let mut last = None;
    for (idx, seg) in sc.segments.iter().enumerate() {
        if seg.start >= end {
            break;
        }
        if seg.end() > start {
            first.get_or_insert(idx);
            last = Some(idx);
        }
    }
    match (first, last) {
        (Some(f), Some(l)) => Ok(f..=l),
        _ => Err(SegmentationError::SpanNotLocated { text: span.text.clone(), start }),
    }
}

/// Replace the segments in `range` with a single segment that spans them,
/// separators included.
pub fn merge_segments(
    sc: &SegmentedContext,
    range: RangeInclusive<usize>,
) -> Result<SegmentedContext, SegmentationError> {
    let (first, last) = (*range.start(), *range.end());
    if first > last || last >= sc.segments.len() {
        return Err(SegmentationError::BadRange { first, last, count: sc.segments.len() });
    }
    if first == last {
        return Ok(sc.clone());
    }
    let start = sc.segments[first].start;
    let end = sc.segments[last].end();
    let text =
        slice_chars(&sc.original, start, end - start).expect("segment offsets lie within the original").to_owned();
    let mut segments = Vec::with_capacity(sc.segments.len() - (last - first));
    segments.extend_from_slice(&sc.segments[..first]);
    segments.push(Segment { text, start });
    segments.extend_from_slice(&sc.segments[last + 1..]);
    Ok(SegmentedContext { original: sc.original.clone(), segments })
}

/// Lowercase every whitespace-delimited token that contains a lowercase
/// letter directly followed by an uppercase one ("YouTube", "iPad").
/// Characters whose lowercase form is not a single code point are left as
/// they are, so the code-point length never changes.
pub fn normalize_camel_case(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut token = String::new();
    let flush = |token: &mut String, out: &mut String| {
        if is_camel_case(token) {
            out.extend(token.chars().map(lower_single));
        } else {
            out.push_str(token);
        }
        token.clear();
    };
    for c in text.chars() {
        if c.is_whitespace() {
            flush(&mut token, &mut out);
            out.push(c);
        } else {
            token.push(c);
        }
    }
    flush(&mut token, &mut out);
    out
}

fn is_camel_case(token: &str) -> bool {
    let mut prev_lower = false;
    for c in token.chars() {
        if prev_lower && c.is_uppercase() {
            return true;
        }
        prev_lower = c.is_lowercase();
    }
    false
}

fn lower_single(c: char) -> char {
    let mut lower = c.to_lowercase();
    match (lower.next(), lower.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}
