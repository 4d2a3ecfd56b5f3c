//! Seeded synthetic corpora, counting backends and reference scorers shared
//! by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spanshift::segmentation::Abbreviations;
use spanshift::{AnswerSpan, Article, Dataset, Paragraph, QaItem, TranslateError, Translator};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy)]
pub struct CorpusOptions {
    /// Sprinkle numbers such as "1947" into sentences.
    pub digits: bool,
    /// Sprinkle CamelCase words such as "YouTube".
    pub camel: bool,
    /// Put commas after some words.
    pub commas: bool,
    /// Every n-th question is unanswerable, with a plausible answer; 0 for
    /// none.
    pub impossible_every: usize,
    pub max_answer_words: usize,
    pub questions_per_paragraph: usize,
    pub vocabulary: usize,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        Self {
            digits: false,
            camel: false,
            commas: true,
            impossible_every: 4,
            max_answer_words: 5,
            questions_per_paragraph: 4,
            vocabulary: 3000,
        }
    }
}

const LETTERS: &[u8] = b"abcdefghijklmnopqrstuvwxyz";

fn random_word(rng: &mut ChaCha8Rng, alphabet: &[u8], len: std::ops::RangeInclusive<usize>) -> String {
    let n = rng.random_range(len);
    (0..n).map(|_| *alphabet.choose(rng).unwrap() as char).collect()
}

/// Distinct lowercase words of 3..=9 letters, none of which is a default
/// abbreviation.
pub fn vocabulary(rng: &mut ChaCha8Rng, size: usize, alphabet: &[u8]) -> Vec<String> {
    let abbreviations = Abbreviations::default();
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(size);
    while out.len() < size {
        let w = random_word(rng, alphabet, 3..=9);
        if w.chars().next().unwrap().is_ascii_alphabetic()
            && !abbreviations.is_abbreviation(&w)
            && seen.insert(w.clone())
        {
            out.push(w);
        }
    }
    out
}

pub fn capitalize(w: &str) -> String {
    let mut chars = w.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// A generated sentence: its words and the text they form.
#[derive(Debug, Clone)]
pub struct Sentence {
    pub text: String,
    /// (code-point start, word with any trailing punctuation stripped)
    pub words: Vec<(usize, String)>,
}

pub struct Generator {
    pub rng: ChaCha8Rng,
    pub vocab: Vec<String>,
    pub opts: CorpusOptions,
}

impl Generator {
    pub fn new(seed: u64, opts: CorpusOptions) -> Self {
        let mut rng = rng(seed);
        let vocab = vocabulary(&mut rng, opts.vocabulary, LETTERS);
        Self { rng, vocab, opts }
    }

    pub fn with_vocab(seed: u64, opts: CorpusOptions, vocab: Vec<String>) -> Self {
        Self { rng: rng(seed), vocab, opts }
    }

    fn word(&mut self) -> String {
        let roll: f64 = self.rng.random();
        if self.opts.digits && roll < 0.08 {
            return self.rng.random_range(1..=2100u32).to_string();
        }
        if self.opts.camel && roll > 0.95 {
            let a = self.vocab.choose(&mut self.rng).unwrap().clone();
            let b = self.vocab.choose(&mut self.rng).unwrap().clone();
            return capitalize(&a) + &capitalize(&b);
        }
        self.vocab.choose(&mut self.rng).unwrap().clone()
    }

    pub fn sentence(&mut self) -> Sentence {
        let n = self.rng.random_range(4..=14);
        let mut text = String::new();
        let mut words = Vec::with_capacity(n);
        for i in 0..n {
            let w = if i == 0 { capitalize(self.vocab.choose(&mut self.rng).unwrap()) } else { self.word() };
            if i > 0 {
                text.push(' ');
            }
            words.push((text.chars().count(), w.clone()));
            text.push_str(&w);
            if i + 1 < n && self.opts.commas && self.rng.random_bool(0.1) {
                text.push(',');
            }
        }
        text.push(*['.', '.', '.', '?', '!'].choose(&mut self.rng).unwrap());
        Sentence { text, words }
    }

    /// Sentences joined by single spaces, plus each sentence's offset.
    pub fn paragraph(&mut self, sentences: usize) -> (String, Vec<(usize, Sentence)>) {
        let mut context = String::new();
        let mut parts = Vec::with_capacity(sentences);
        for i in 0..sentences {
            if i > 0 {
                context.push(' ');
            }
            let s = self.sentence();
            parts.push((context.chars().count(), s.clone()));
            context.push_str(&s.text);
        }
        (context, parts)
    }

    /// A word-aligned answer inside one sentence, without trailing
    /// punctuation.
    pub fn answer(&mut self, parts: &[(usize, Sentence)]) -> AnswerSpan {
        let (offset, sentence) = parts.choose(&mut self.rng).unwrap();
        let len = self.rng.random_range(1..=self.opts.max_answer_words.min(sentence.words.len()));
        let first = self.rng.random_range(0..=sentence.words.len() - len);
        let start = sentence.words[first].0;
        let (last_start, last_word) = &sentence.words[first + len - 1];
        let end = last_start + last_word.chars().count();
        let text: String = sentence.text.chars().skip(start).take(end - start).collect();
        AnswerSpan::new(text, offset + start)
    }

    pub fn question(&mut self) -> String {
        let n = self.rng.random_range(3..=8);
        let words: Vec<String> = (0..n).map(|_| self.vocab.choose(&mut self.rng).unwrap().clone()).collect();
        format!("{}?", capitalize(&words.join(" ")))
    }

    pub fn dataset(&mut self, qa_count: usize) -> Dataset {
        let mut articles = Vec::new();
        let mut made = 0;
        while made < qa_count {
            let mut paragraphs = Vec::new();
            for _ in 0..self.rng.random_range(1..=5) {
                if made == qa_count {
                    break;
                }
                let sentences = self.rng.random_range(2..=7);
                let (context, parts) = self.paragraph(sentences);
                let mut qas = Vec::new();
                for _ in 0..self.rng.random_range(1..=self.opts.questions_per_paragraph) {
                    if made == qa_count {
                        break;
                    }
                    let id = format!("q{made:06}");
                    let question = self.question();
                    let qa = if self.opts.impossible_every > 0 && made % self.opts.impossible_every == 0 {
                        let mut qa = QaItem::impossible(id, question);
                        qa.plausible_answers = Some(vec![self.answer(&parts)]);
                        qa
                    } else {
                        QaItem::answerable(id, question, vec![self.answer(&parts)])
                    };
                    qas.push(qa);
                    made += 1;
                }
                paragraphs.push(Paragraph::new(context, qas));
            }
            let title = capitalize(&format!("{} {}", self.vocab.choose(&mut self.rng).unwrap(), articles.len()));
            articles.push(Article::new(title, paragraphs));
        }
        Dataset::new(articles)
    }
}

pub fn synthetic(seed: u64, qa_count: usize, opts: CorpusOptions) -> Dataset {
    Generator::new(seed, opts).dataset(qa_count)
}

/// Wraps a backend and counts the calls that reach it.
pub struct Counting<T> {
    pub inner: T,
    pub calls: AtomicUsize,
}

impl<T> Counting<T> {
    pub fn new(inner: T) -> Self {
        Self { inner, calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<T: Translator> Translator for Counting<T> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn translate(&self, text: &str, src: &str, tgt: &str) -> Result<String, TranslateError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.translate(text, src, tgt)
    }
}

/// Reference scorers written without reference to the library code.
pub mod oracle {
    const PUNCT: &[char] = &['.', ',', '!', '?', ';', ':', '"', '\'', '(', ')', '-', '।'];

    pub fn normalize(s: &str) -> String {
        let lowered: String = s.to_lowercase().chars().filter(|c| !PUNCT.contains(c)).collect();
        lowered.split_whitespace().collect::<Vec<_>>().join(" ")
    }

    pub fn tokens(s: &str) -> Vec<String> {
        normalize(s).split_whitespace().map(String::from).collect()
    }

    pub fn em(pred: &str, golds: &[String]) -> f64 {
        let p = normalize(pred);
        let hit = if golds.is_empty() { p.is_empty() } else { golds.iter().any(|g| normalize(g) == p) };
        if hit {
            1.0
        } else {
            0.0
        }
    }

    fn count(tokens: &[String], t: &String) -> usize {
        tokens.iter().filter(|x| *x == t).count()
    }

    fn f1_one(pred: &[String], gold: &[String]) -> f64 {
        if pred.is_empty() && gold.is_empty() {
            return 1.0;
        }
        if pred.is_empty() || gold.is_empty() {
            return 0.0;
        }
        let mut distinct: Vec<&String> = pred.iter().collect();
        distinct.sort();
        distinct.dedup();
        let common: usize = distinct.iter().map(|t| count(pred, t).min(count(gold, t))).sum();
        if common == 0 {
            return 0.0;
        }
        let p = common as f64 / pred.len() as f64;
        let r = common as f64 / gold.len() as f64;
        2.0 * p * r / (p + r)
    }

    pub fn f1(pred: &str, golds: &[String]) -> f64 {
        let p = tokens(pred);
        if golds.is_empty() {
            return f1_one(&p, &[]);
        }
        golds.iter().map(|g| f1_one(&p, &tokens(g))).fold(0.0, f64::max)
    }

    fn grams(tokens: &[String], n: usize) -> Vec<Vec<String>> {
        if tokens.len() < n {
            return vec![];
        }
        (0..=tokens.len() - n).map(|i| tokens[i..i + n].to_vec()).collect()
    }

    pub fn bleu(preds: &[String], refs: &[String], max_n: usize) -> f64 {
        let mut matched = vec![0usize; max_n + 1];
        let mut total = vec![0usize; max_n + 1];
        let (mut c, mut r) = (0usize, 0usize);
        let mut any = false;
        for (p, g) in preds.iter().zip(refs) {
            let (pt, gt) = (tokens(p), tokens(g));
            if pt.is_empty() && gt.is_empty() {
                continue;
            }
            any = true;
            c += pt.len();
            r += gt.len();
            for n in 1..=max_n {
                let pg = grams(&pt, n);
                let gg = grams(&gt, n);
                let mut used = vec![false; gg.len()];
                for gram in &pg {
                    total[n] += 1;
                    if let Some(k) = (0..gg.len()).find(|&k| !used[k] && gg[k] == *gram) {
                        used[k] = true;
                        matched[n] += 1;
                    }
                }
            }
        }
        if !any {
            return 1.0;
        }
        let mut product = 1.0;
        for n in 1..=max_n {
            if total[n] == 0 || matched[n] == 0 {
                return 0.0;
            }
            product *= matched[n] as f64 / total[n] as f64;
        }
        let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
        bp * product.powf(1.0 / max_n as f64)
    }
}
