//! Script post-processing for translated text: Devanagari digits, folding
//! of accented Latin letters, and detection or conversion of leftover Latin
//! runs.

use serde::{Deserialize, Serialize};
use unicode_normalization::char::{decompose_canonical, is_combining_mark};

use crate::http::{HttpEndpointConfig, HttpTemplateClient};
use crate::text::{char_len, find_all_chars};
use crate::translation::TranslateError;

const DEVANAGARI_ZERO: u32 = 0x0966;

/// Replace ASCII digits with Devanagari digits U+0966..=U+096F.
pub fn transliterate_digits(text: &str) -> String {
    text.chars()
        .map(|c| match c.to_digit(10) {
            Some(d) if c.is_ascii_digit() => char::from_u32(DEVANAGARI_ZERO + d).expect("valid code point"),
            _ => c,
        })
        .collect()
}

pub fn is_latin_letter(c: char) -> bool {
    c.is_ascii_alphabetic()
        || (c.is_alphabetic()
            && matches!(c, '\u{00C0}'..='\u{024F}' | '\u{0250}'..='\u{02AF}' | '\u{1E00}'..='\u{1EFF}'))
}

/// Letters without a canonical decomposition that still have an obvious
/// base letter.
fn fold_undecomposable(c: char) -> char {
    match c {
        'ø' => 'o',
        'Ø' => 'O',
        'ł' => 'l',
        'Ł' => 'L',
        'đ' => 'd',
        'Đ' => 'D',
        'ħ' => 'h',
        'Ħ' => 'H',
        'ı' => 'i',
        _ => c,
    }
}

fn is_diacritic(c: char) -> bool {
    matches!(c, '\u{0300}'..='\u{036F}' | '\u{1AB0}'..='\u{1AFF}' | '\u{1DC0}'..='\u{1DFF}' | '\u{20D0}'..='\u{20FF}' | '\u{FE20}'..='\u{FE2F}')
}

/// Strip diacritics from Latin letters (`é` → `e`). Combining diacritics
/// are removed only when they follow a Latin letter; marks of other
/// scripts, such as Devanagari vowel signs and viramas, are never touched.
pub fn fold_special_latin(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut after_latin = false;
    for c in text.chars() {
        if is_combining_mark(c) {
            if !(after_latin && is_diacritic(c)) {
                out.push(c);
            }
            continue;
        }
        if is_latin_letter(c) {
            let mut base = None;
            decompose_canonical(c, |d| {
                base.get_or_insert(d);
            });
            out.push(fold_undecomposable(base.unwrap_or(c)));
            after_latin = true;
        } else {
            out.push(c);
            after_latin = false;
        }
    }
    out
}

/// Converts a single Latin-script word to the target script.
pub trait TransliterationEngine: Send + Sync {
    fn transliterate(&self, word: &str) -> Result<String, TranslateError>;
}

impl<F> TransliterationEngine for F
where
    F: Fn(&str) -> Result<String, TranslateError> + Send + Sync,
{
    fn transliterate(&self, word: &str) -> Result<String, TranslateError> {
        self(word)
    }
}

/// Remote transliteration service. `{text}` is the word; `{tgt}` the
/// target language code.
#[derive(Debug)]
pub struct HttpTransliterator {
    client: HttpTemplateClient,
    target: String,
}

impl HttpTransliterator {
    pub fn new(config: HttpEndpointConfig, target: impl Into<String>) -> Result<Self, TranslateError> {
        Ok(Self { client: HttpTemplateClient::new(config)?, target: target.into() })
    }
}

impl TransliterationEngine for HttpTransliterator {
    fn transliterate(&self, word: &str) -> Result<String, TranslateError> {
        self.client.call(&[("text", word), ("src", "en"), ("tgt", &self.target)])
    }
}

/// A maximal run of Latin letters left in the output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatinRun {
    pub text: String,
    /// Code-point offset in the returned text.
    pub start: usize,
}

/// Send every Latin run to `engine` and splice in the result. Runs the
/// engine cannot convert, and every run when there is no engine, are left
/// in place and reported.
pub fn transliterate_residue(text: &str, engine: Option<&dyn TransliterationEngine>) -> (String, Vec<LatinRun>) {
    let mut out = String::with_capacity(text.len());
    let mut flags = Vec::new();
    let mut out_len = 0;
    let mut run = String::new();

    let mut flush = |run: &mut String, out: &mut String, out_len: &mut usize| {
        if run.is_empty() {
            return;
        }
        let replaced = engine.and_then(|e| match e.transliterate(run) {
            Ok(t) if !t.is_empty() => Some(t),
            Ok(_) => None,
            Err(err) => {
                log::debug!("transliteration of {run:?} failed: {err}");
                None
            }
        });
        match replaced {
            Some(t) => {
                *out_len += char_len(&t);
                out.push_str(&t);
            }
            None => {
                flags.push(LatinRun { text: run.clone(), start: *out_len });
                *out_len += char_len(run);
                out.push_str(run);
            }
        }
        run.clear();
    };

    for c in text.chars() {
        if is_latin_letter(c) {
            run.push(c);
        } else {
            flush(&mut run, &mut out, &mut out_len);
            out.push(c);
            out_len += 1;
        }
    }
    flush(&mut run, &mut out, &mut out_len);
    (out, flags)
}

/// Which post-processing passes to apply, in order: Latin folding, digit
/// mapping, residue transliteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptPasses {
    pub fold_latin: bool,
    pub digits: bool,
}

impl Default for ScriptPasses {
    fn default() -> Self {
        Self { fold_latin: true, digits: true }
    }
}

pub fn apply_passes(
    text: &str,
    passes: ScriptPasses,
    engine: Option<&dyn TransliterationEngine>,
) -> (String, Vec<LatinRun>) {
    let mut s = if passes.fold_latin { fold_special_latin(text) } else { text.to_owned() };
    if passes.digits {
        s = transliterate_digits(&s);
    }
    transliterate_residue(&s, engine)
}

/// Offset of the occurrence of `answer` in `context` closest to
/// `predicted` (ties to the earlier one).
pub fn relocate(context: &str, answer: &str, predicted: usize) -> Option<usize> {
    find_all_chars(context, answer).into_iter().min_by_key(|&pos| (pos.abs_diff(predicted), pos))
}
