//! Question-answering metrics: exact match and token F1 with a
//! has-answer/no-answer breakdown, plus corpus BLEU-1 and BLEU-2.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use unicode_general_category::{get_general_category, GeneralCategory as G};
use unicode_normalization::UnicodeNormalization;

use crate::model::Dataset;
use crate::scalar::Score;

fn is_punctuation(c: char) -> bool {
    matches!(
        get_general_category(c),
        G::ConnectorPunctuation
            | G::DashPunctuation
            | G::OpenPunctuation
            | G::ClosePunctuation
            | G::InitialPunctuation
            | G::FinalPunctuation
            | G::OtherPunctuation
    )
}

/// NFC, lowercase, punctuation removed, whitespace collapsed and trimmed.
/// English articles are kept.
pub fn normalize_answer(text: &str) -> String {
    let cleaned: String = text.nfc().flat_map(char::to_lowercase).filter(|c| !is_punctuation(*c)).collect();
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn tokens(text: &str) -> Vec<String> {
    normalize_answer(text).split(' ').filter(|t| !t.is_empty()).map(str::to_owned).collect()
}

/// 1 when the normalized prediction equals some normalized gold. With no
/// golds the question is unanswerable and only an empty prediction scores.
pub fn exact_match<S: Score>(pred: &str, golds: &[impl AsRef<str>]) -> S {
    let p = normalize_answer(pred);
    let hit = if golds.is_empty() { p.is_empty() } else { golds.iter().any(|g| normalize_answer(g.as_ref()) == p) };
    if hit {
        S::one()
    } else {
        S::zero()
    }
}

fn f1_single<S: Score>(pred: &[String], gold: &[String]) -> S {
    if pred.is_empty() || gold.is_empty() {
        return if pred.is_empty() && gold.is_empty() { S::one() } else { S::zero() };
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in gold {
        *counts.entry(t).or_insert(0) += 1;
    }
    let mut overlap = 0usize;
    for t in pred {
        if let Some(c) = counts.get_mut(t.as_str()).filter(|c| **c > 0) {
            *c -= 1;
            overlap += 1;
        }
    }
    if overlap == 0 {
        return S::zero();
    }
    let precision = S::ratio(overlap, pred.len());
    let recall = S::ratio(overlap, gold.len());
    S::of(2.0) * precision * recall / (precision + recall)
}

/// Token-overlap F1, maximized over golds. With no golds it behaves as a
/// single empty gold.
pub fn f1<S: Score>(pred: &str, golds: &[impl AsRef<str>]) -> S {
    let p = tokens(pred);
    if golds.is_empty() {
        return f1_single(&p, &[]);
    }
    golds.iter().map(|g| f1_single::<S>(&p, &tokens(g.as_ref()))).fold(S::zero(), S::max)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BleuError {
    #[error("{predictions} predictions but {references} references")]
    LengthMismatch { predictions: usize, references: usize },
    #[error("max_n must be 1 or 2, got {0}")]
    Order(usize),
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Corpus BLEU without smoothing. Pairs where both sides normalize to
/// nothing are skipped; a corpus with no remaining pairs scores 1. Any
/// order with zero matches, or with no predicted n-grams at all, makes the
/// score 0.
pub fn bleu<S: Score>(
    predictions: &[impl AsRef<str>],
    references: &[impl AsRef<str>],
    max_n: usize,
) -> Result<S, BleuError> {
    if predictions.len() != references.len() {
        return Err(BleuError::LengthMismatch { predictions: predictions.len(), references: references.len() });
    }
    if !(1..=2).contains(&max_n) {
        return Err(BleuError::Order(max_n));
    }
    let pairs: Vec<(Vec<String>, Vec<String>)> = predictions
        .iter()
        .zip(references)
        .map(|(p, r)| (tokens(p.as_ref()), tokens(r.as_ref())))
        .filter(|(p, r)| !(p.is_empty() && r.is_empty()))
        .collect();
    if pairs.is_empty() {
        return Ok(S::one());
    }

    let mut matched = vec![0usize; max_n];
    let mut total = vec![0usize; max_n];
    let (mut c, mut r) = (0usize, 0usize);
    for (pred, reference) in &pairs {
        c += pred.len();
        r += reference.len();
        for n in 1..=max_n {
            let ref_counts = ngram_counts(reference, n);
            for (gram, count) in ngram_counts(pred, n) {
                matched[n - 1] += count.min(ref_counts.get(gram).copied().unwrap_or(0));
                total[n - 1] += count;
            }
        }
    }
    if matched.iter().zip(&total).any(|(&m, &t)| m == 0 || t == 0) {
        return Ok(S::zero());
    }
    let log_mean = matched.iter().zip(&total).map(|(&m, &t)| S::ratio(m, t).ln()).fold(S::zero(), |a, b| a + b)
        / S::of(max_n as f64);
    let brevity = (S::one() - S::ratio(r, c)).min(S::zero()).exp();
    Ok(brevity * log_mean.exp())
}

/// All scores are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport<S> {
    pub em: S,
    pub f1: S,
    pub em_has_ans: S,
    pub f1_has_ans: S,
    pub em_no_ans: S,
    pub f1_no_ans: S,
    pub bleu1: S,
    pub bleu2: S,
    pub total: usize,
    pub has_ans_count: usize,
    pub no_ans_count: usize,
    /// Gold ids with no prediction; scored 0.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing: Vec<String>,
}

/// Question id → predicted answer; the empty string predicts no answer.
pub type Predictions = BTreeMap<String, String>;

pub fn evaluate<S: Score>(predictions: &Predictions, gold: &Dataset) -> EvalReport<S> {
    let mut sums = [[S::zero(); 2]; 2]; // [has, no] × [em, f1]
    let mut counts = [0usize; 2];
    let mut missing = Vec::new();
    let mut preds = Vec::new();
    let mut refs = Vec::new();

    for (_, _, qa) in gold.qas() {
        let golds: Vec<&str> = qa.answers.iter().map(|a| a.text.as_str()).collect();
        let group = usize::from(qa.is_impossible);
        counts[group] += 1;
        let pred = match predictions.get(&qa.id) {
            Some(p) => {
                sums[group][0] = sums[group][0] + exact_match::<S>(p, &golds);
                sums[group][1] = sums[group][1] + f1::<S>(p, &golds);
                p.as_str()
            }
            None => {
                missing.push(qa.id.clone());
                ""
            }
        };
        preds.push(pred);
        refs.push(golds.first().copied().unwrap_or(""));
    }

    let total = counts[0] + counts[1];
    let pct = |sum: S, n: usize| if n == 0 { S::zero() } else { S::hundred() * sum / S::of(n as f64) };
    let bleu_pct = |n| S::hundred() * bleu::<S>(&preds, &refs, n).expect("equal lengths, valid order");
    EvalReport {
        em: pct(sums[0][0] + sums[1][0], total),
        f1: pct(sums[0][1] + sums[1][1], total),
        em_has_ans: pct(sums[0][0], counts[0]),
        f1_has_ans: pct(sums[0][1], counts[0]),
        em_no_ans: pct(sums[1][0], counts[1]),
        f1_no_ans: pct(sums[1][1], counts[1]),
        bleu1: bleu_pct(1),
        bleu2: bleu_pct(2),
        total,
        has_ans_count: counts[0],
        no_ans_count: counts[1],
        missing,
    }
}
