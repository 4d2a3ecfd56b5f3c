//! End-to-end dataset translation.
//!
//! Per paragraph: segment the context, merge sentences that an answer
//! straddles, translate each sentence through the cache and rebuild the
//! translated context. Per question: translate the question, and for each
//! answer translate it alone, align it inside its translated sentence and
//! lift the offset into the translated context. Script post-processing runs
//! last on every text field, after which answers are re-located so their
//! spans stay exact.
//!
//! Every input question ends up either in the output dataset or in the
//! failure report, never both.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::ops::RangeInclusive;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::{align_answer, compute_global_offset, AlignConfig};
use crate::model::{AnswerSpan, Article, Dataset, Paragraph, QaItem};
use crate::segmentation::{normalize_camel_case, segment_sentences, Abbreviations, SegmentedContext};
use crate::similarity::{LexicalSimilarity, Similarity};
use crate::text::{char_len, slice_chars};
use crate::translation::{build_translated_context, TranslateError, TranslatedContext, TranslationCache, Translator};
use crate::transliteration::{apply_passes, relocate, ScriptPasses, TransliterationEngine};

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub src_lang: String,
    pub tgt_lang: String,
    pub align: AlignConfig<f64>,
    /// Align plausible answers of unanswerable questions; otherwise they are
    /// dropped from the output.
    pub align_plausible: bool,
    /// Worker threads; at least 1.
    pub jobs: usize,
    pub seed: u64,
    /// Lowercase CamelCase tokens in translation input.
    pub fold_camel_case: bool,
    pub script: ScriptPasses,
    pub abbreviations: Abbreviations,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            src_lang: "en".into(),
            tgt_lang: "mr".into(),
            align: AlignConfig::default(),
            align_plausible: true,
            jobs: 1,
            seed: 0,
            fold_camel_case: true,
            script: ScriptPasses::default(),
            abbreviations: Abbreviations::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Translation,
    Alignment,
    Transliteration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub qa_id: String,
    pub stage: Stage,
    pub reason: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_score: Option<f64>,
}

impl FailureRecord {
    fn new(qa_id: &str, stage: Stage, reason: impl Into<String>) -> Self {
        Self { qa_id: qa_id.to_owned(), stage, reason: reason.into(), base_score: None }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub segmentation_ms: f64,
    pub translation_ms: f64,
    pub alignment_ms: f64,
    pub transliteration_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub input_qas: usize,
    pub output_qas: usize,
    pub failed_qas: usize,
    pub failures_by_stage: BTreeMap<Stage, usize>,
    pub cache_hits: usize,
    pub backend_calls: usize,
    /// Latin runs still present in output text after transliteration.
    pub latin_runs_flagged: usize,
    pub timings: StageTimings,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub dataset: Dataset,
    pub failures: Vec<FailureRecord>,
    pub summary: RunSummary,
}

/// One translated question with its translated surroundings.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslatedExample {
    pub title: String,
    pub context: String,
    pub qa: QaItem,
}

#[derive(Default)]
struct Clock {
    segmentation: Duration,
    translation: Duration,
    alignment: Duration,
    transliteration: Duration,
}

impl Clock {
    fn time<T>(slot: &mut Duration, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        *slot += start.elapsed();
        out
    }

    fn add(&mut self, other: &Clock) {
        self.segmentation += other.segmentation;
        self.translation += other.translation;
        self.alignment += other.alignment;
        self.transliteration += other.transliteration;
    }
}

struct ParagraphOutcome {
    paragraph: Option<Paragraph>,
    failures: Vec<FailureRecord>,
    flags: usize,
    clock: Clock,
}

/// Memoizes engine answers so that a word is sent at most once per run.
struct MemoEngine<'a> {
    inner: &'a dyn TransliterationEngine,
    memo: Mutex<HashMap<String, Result<String, TranslateError>>>,
}

impl TransliterationEngine for MemoEngine<'_> {
    fn transliterate(&self, word: &str) -> Result<String, TranslateError> {
        if let Some(hit) = self.memo.lock().expect("memo poisoned").get(word) {
            return hit.clone();
        }
        let result = self.inner.transliterate(word);
        self.memo.lock().expect("memo poisoned").insert(word.to_owned(), result.clone());
        result
    }
}

pub struct Pipeline<'a> {
    config: PipelineConfig,
    translator: &'a dyn Translator,
    cache: &'a TranslationCache,
    similarity: &'a dyn Similarity<f64>,
    engine: Option<MemoEngine<'a>>,
}

enum QaFailure {
    Fatal(TranslateError),
    Item(FailureRecord),
}

impl QaFailure {
    fn from_translate(qa_id: &str, what: &str, e: TranslateError) -> Self {
        if e.is_fatal() {
            QaFailure::Fatal(e)
        } else {
            QaFailure::Item(FailureRecord::new(qa_id, Stage::Translation, format!("{what}: {e}")))
        }
    }
}

struct Prepared {
    segmented: SegmentedContext,
    context: TranslatedContext,
}

impl<'a> Pipeline<'a> {
    pub fn new(config: PipelineConfig, translator: &'a dyn Translator, cache: &'a TranslationCache) -> Self {
        Self { config, translator, cache, similarity: &LexicalSimilarity, engine: None }
    }

    pub fn with_similarity(mut self, similarity: &'a dyn Similarity<f64>) -> Self {
        self.similarity = similarity;
        self
    }

    pub fn with_engine(mut self, engine: &'a dyn TransliterationEngine) -> Self {
        self.engine = Some(MemoEngine { inner: engine, memo: Mutex::new(HashMap::new()) });
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    fn validate(&self) -> Result<(), PipelineError> {
        if self.config.jobs == 0 {
            return Err(PipelineError::Config("jobs must be at least 1".into()));
        }
        self.config.align.validate().map_err(|e| PipelineError::Config(e.to_string()))
    }

    fn translate(&self, text: &str) -> Result<String, TranslateError> {
        let input = if self.config.fold_camel_case { normalize_camel_case(text) } else { text.to_owned() };
        let out = self.cache.translate(self.translator, &input, &self.config.src_lang, &self.config.tgt_lang)?;
        Ok(out.trim().to_owned())
    }

    fn post(&self, text: &str) -> (String, usize) {
        let engine = self.engine.as_ref().map(|e| e as &dyn TransliterationEngine);
        let (out, flags) = apply_passes(text, self.config.script, engine);
        (out, flags.len())
    }

    fn spans_to_align<'q>(&self, qa: &'q QaItem) -> impl Iterator<Item = &'q AnswerSpan> {
        let plausible = self.config.align_plausible.then_some(qa.plausible_answers.iter().flatten());
        qa.answers.iter().chain(plausible.into_iter().flatten())
    }

    /// Segment, merge straddled boundaries, translate every sentence.
    fn prepare(&self, paragraph: &Paragraph, clock: &mut Clock) -> Result<Prepared, TranslateError> {
        let segmented = Clock::time(&mut clock.segmentation, || {
            let mut sc = segment_sentences(&paragraph.context, &self.config.abbreviations);
            let ranges: Vec<RangeInclusive<usize>> = paragraph
                .qas
                .iter()
                .flat_map(|qa| self.spans_to_align(qa))
                .filter_map(|span| sc.locate(span).ok())
                .filter(|r| r.start() < r.end())
                .collect();
            if !ranges.is_empty() {
                sc = merge_ranges(&sc, &ranges);
            }
            sc
        });
        let sentences = Clock::time(&mut clock.translation, || {
            segmented.segments.iter().map(|seg| self.translate(&seg.text)).collect::<Result<Vec<_>, _>>()
        })?;
        let context = build_translated_context(&sentences).map_err(|e| TranslateError::BadResponse(e.to_string()))?;
        Ok(Prepared { segmented, context })
    }

    fn align_span(&self, prepared: &Prepared, span: &AnswerSpan, qa_id: &str) -> Result<AnswerSpan, QaFailure> {
        let fail = |stage, reason: String| QaFailure::Item(FailureRecord::new(qa_id, stage, reason));
        let range = prepared.segmented.locate(span).map_err(|e| fail(Stage::Alignment, e.to_string()))?;
        if range.start() != range.end() {
            return Err(fail(Stage::Alignment, "answer spans several sentences".into()));
        }
        let index = *range.start();
        let answer = self.translate(&span.text).map_err(|e| QaFailure::from_translate(qa_id, "answer", e))?;
        if answer.is_empty() {
            return Err(fail(Stage::Alignment, "translated answer is empty".into()));
        }
        let result = align_answer(prepared.context.sentence(index), &answer, &self.config.align, self.similarity)
            .map_err(|e| fail(Stage::Alignment, e.to_string()))?;
        if !result.is_aligned() {
            return Err(QaFailure::Item(FailureRecord {
                base_score: Some(result.base_score),
                ..FailureRecord::new(
                    qa_id,
                    Stage::Alignment,
                    format!(
                        "best phrase scores {:.4}, below floor {}",
                        result.base_score, self.config.align.min_accept_floor
                    ),
                )
            }));
        }
        let start = compute_global_offset(&prepared.context, index, result.start_in_sentence)
            .map_err(|e| fail(Stage::Alignment, e.to_string()))?;
        Ok(AnswerSpan { text: result.answer_text, answer_start: start, extra: span.extra.clone() })
    }

    /// Align each distinct span; individual failures are returned alongside
    /// the successes, fatal errors abort.
    fn align_all(
        &self,
        prepared: &Prepared,
        spans: &[AnswerSpan],
        qa_id: &str,
        clock: &mut Clock,
    ) -> Result<(Vec<AnswerSpan>, Option<FailureRecord>), TranslateError> {
        let mut aligned = Vec::new();
        let mut first_failure = None;
        let mut seen = HashSet::new();
        for span in spans.iter().filter(|s| seen.insert((s.text.as_str(), s.answer_start))) {
            match Clock::time(&mut clock.alignment, || self.align_span(prepared, span, qa_id)) {
                Ok(a) => aligned.push(a),
                Err(QaFailure::Fatal(e)) => return Err(e),
                Err(QaFailure::Item(f)) => {
                    first_failure.get_or_insert(f);
                }
            }
        }
        Ok((aligned, first_failure))
    }

    fn translate_qa(&self, prepared: &Prepared, qa: &QaItem, clock: &mut Clock) -> Result<QaItem, QaFailure> {
        let question = Clock::time(&mut clock.translation, || self.translate(&qa.question))
            .map_err(|e| QaFailure::from_translate(&qa.id, "question", e))?;

        let (answers, failure) = self.align_all(prepared, &qa.answers, &qa.id, clock).map_err(QaFailure::Fatal)?;
        if let (true, Some(f)) = (answers.is_empty(), failure) {
            return Err(QaFailure::Item(f));
        }

        let plausible_answers = match (&qa.plausible_answers, self.config.align_plausible) {
            (Some(spans), true) => Some(self.align_all(prepared, spans, &qa.id, clock).map_err(QaFailure::Fatal)?.0),
            _ => None,
        };

        Ok(QaItem {
            question,
            id: qa.id.clone(),
            answers,
            is_impossible: qa.is_impossible,
            plausible_answers,
            extra: qa.extra.clone(),
        })
    }

    /// Apply script passes to a translated paragraph and re-derive every
    /// answer offset against the processed context.
    fn postprocess(
        &self,
        context: &str,
        qas: Vec<QaItem>,
        failures: &mut Vec<FailureRecord>,
    ) -> (String, Vec<QaItem>, usize) {
        let (new_context, mut flags) = self.post(context);
        let mut kept = Vec::with_capacity(qas.len());
        'qa: for mut qa in qas {
            let (question, question_flags) = self.post(&qa.question);
            qa.question = question;
            for span in qa.answers.iter_mut().chain(qa.plausible_answers.iter_mut().flatten()) {
                let prefix = slice_chars(context, 0, span.answer_start).expect("aligned offsets are valid");
                let predicted = char_len(&self.post(prefix).0);
                let (text, _) = self.post(&span.text);
                match relocate(&new_context, &text, predicted) {
                    Some(start) => {
                        *span = AnswerSpan { text, answer_start: start, extra: std::mem::take(&mut span.extra) }
                    }
                    None => {
                        failures.push(FailureRecord::new(
                            &qa.id,
                            Stage::Transliteration,
                            format!("answer {text:?} not found after transliteration"),
                        ));
                        continue 'qa;
                    }
                }
            }
            flags += question_flags;
            kept.push(qa);
        }
        (new_context, kept, flags)
    }

    fn run_paragraph(
        &self,
        title_ok: Result<(), &TranslateError>,
        paragraph: &Paragraph,
    ) -> Result<ParagraphOutcome, PipelineError> {
        let mut clock = Clock::default();
        let mut failures = Vec::new();
        let fail_all = |reason: String| {
            paragraph
                .qas
                .iter()
                .map(|qa| FailureRecord::new(&qa.id, Stage::Translation, reason.clone()))
                .collect::<Vec<_>>()
        };
        if let Err(e) = title_ok {
            if e.is_fatal() {
                return Err(PipelineError::Translate(e.clone()));
            }
            return Ok(ParagraphOutcome {
                paragraph: None,
                failures: fail_all(format!("title: {e}")),
                flags: 0,
                clock,
            });
        }
        let prepared = match self.prepare(paragraph, &mut clock) {
            Ok(p) => p,
            Err(e) if e.is_fatal() => return Err(e.into()),
            Err(e) => {
                return Ok(ParagraphOutcome {
                    paragraph: None,
                    failures: fail_all(format!("context: {e}")),
                    flags: 0,
                    clock,
                })
            }
        };

        let mut translated = Vec::with_capacity(paragraph.qas.len());
        for qa in &paragraph.qas {
            match self.translate_qa(&prepared, qa, &mut clock) {
                Ok(t) => translated.push(t),
                Err(QaFailure::Item(f)) => failures.push(f),
                Err(QaFailure::Fatal(e)) => return Err(e.into()),
            }
        }

        let mut flags = 0;
        let (context, qas) = Clock::time(&mut clock.transliteration, || {
            let (context, qas, f) = self.postprocess(&prepared.context.full_text, translated, &mut failures);
            flags = f;
            (context, qas)
        });
        // Restore input order of failures relative to each other.
        let order: HashMap<&str, usize> = paragraph.qas.iter().enumerate().map(|(i, q)| (q.id.as_str(), i)).collect();
        failures.sort_by_key(|f| order.get(f.qa_id.as_str()).copied().unwrap_or(usize::MAX));

        let keep = !qas.is_empty() || paragraph.qas.is_empty();
        let paragraph = keep.then(|| Paragraph { context, qas, extra: paragraph.extra.clone() });
        Ok(ParagraphOutcome { paragraph, failures, flags, clock })
    }

    /// Translate a single question of `paragraph`. The paragraph is
    /// processed as a whole so the context matches what a full run emits.
    pub fn translate_example(
        &self,
        article_title: &str,
        paragraph: &Paragraph,
        qa_id: &str,
    ) -> Result<Result<TranslatedExample, FailureRecord>, PipelineError> {
        self.validate()?;
        let title = self.translate(article_title);
        let outcome = self.run_paragraph(title.as_ref().map(|_| ()), paragraph)?;
        if let Some(f) = outcome.failures.into_iter().find(|f| f.qa_id == qa_id) {
            return Ok(Err(f));
        }
        let paragraph = outcome.paragraph.ok_or_else(|| PipelineError::Config(format!("no question {qa_id}")))?;
        let qa = paragraph
            .qas
            .into_iter()
            .find(|q| q.id == qa_id)
            .ok_or_else(|| PipelineError::Config(format!("no question {qa_id}")))?;
        let title = self.post(&title.expect("title translated")).0;
        Ok(Ok(TranslatedExample { title, context: paragraph.context, qa }))
    }

    pub fn run(&self, dataset: &Dataset) -> Result<PipelineOutput, PipelineError> {
        self.validate()?;
        let started = Instant::now();
        let before = self.cache.stats();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.jobs)
            .build()
            .map_err(|e| PipelineError::Pool(e.to_string()))?;

        let (titles, outcomes) = pool.install(|| {
            let titles: Vec<Result<String, TranslateError>> =
                dataset.data.par_iter().map(|a| self.translate(&a.title)).collect();
            let work: Vec<(usize, &Paragraph)> =
                dataset.data.iter().enumerate().flat_map(|(ai, a)| a.paragraphs.iter().map(move |p| (ai, p))).collect();
            let outcomes: Vec<Result<ParagraphOutcome, PipelineError>> =
                work.par_iter().map(|&(ai, p)| self.run_paragraph(titles[ai].as_ref().map(|_| ()), p)).collect();
            (titles, outcomes)
        });
        if let Some(e) = titles.iter().filter_map(|t| t.as_ref().err()).find(|e| e.is_fatal()) {
            return Err(PipelineError::Translate(e.clone()));
        }

        let mut outcomes = outcomes.into_iter();
        let mut data = Vec::with_capacity(dataset.data.len());
        let mut failures = Vec::new();
        let mut clock = Clock::default();
        let mut flags = 0;
        for (article, title) in dataset.data.iter().zip(titles) {
            let mut paragraphs = Vec::with_capacity(article.paragraphs.len());
            for _ in &article.paragraphs {
                let outcome = outcomes.next().expect("one outcome per paragraph")?;
                clock.add(&outcome.clock);
                flags += outcome.flags;
                failures.extend(outcome.failures);
                paragraphs.extend(outcome.paragraph);
            }
            if !paragraphs.is_empty() || article.paragraphs.is_empty() {
                let (title, title_flags) = self.post(&title.unwrap_or_default());
                flags += title_flags;
                data.push(Article { title, paragraphs, extra: article.extra.clone() });
            }
        }

        let output = Dataset { version: dataset.version.clone(), data, extra: dataset.extra.clone() };
        let after = self.cache.stats();
        let mut failures_by_stage = BTreeMap::new();
        for f in &failures {
            *failures_by_stage.entry(f.stage).or_insert(0) += 1;
        }
        let ms = |d: Duration| d.as_secs_f64() * 1e3;
        let summary = RunSummary {
            input_qas: dataset.qa_count(),
            output_qas: output.qa_count(),
            failed_qas: failures.len(),
            failures_by_stage,
            cache_hits: after.hits - before.hits,
            backend_calls: after.backend_calls - before.backend_calls,
            latin_runs_flagged: flags,
            timings: StageTimings {
                segmentation_ms: ms(clock.segmentation),
                translation_ms: ms(clock.translation),
                alignment_ms: ms(clock.alignment),
                transliteration_ms: ms(clock.transliteration),
                total_ms: ms(started.elapsed()),
            },
        };
        Ok(PipelineOutput { dataset: output, failures, summary })
    }
}

/// Merge every group of segments joined by at least one range.
fn merge_ranges(sc: &SegmentedContext, ranges: &[RangeInclusive<usize>]) -> SegmentedContext {
    let n = sc.segments.len();
    let mut joined = vec![false; n.saturating_sub(1)];
    for r in ranges {
        for flag in &mut joined[*r.start()..*r.end()] {
            *flag = true;
        }
    }
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 0..n {
        if joined.get(i) != Some(&true) {
            groups.push(start..=i);
            start = i + 1;
        }
    }
    let mut out = sc.clone();
    for group in groups.into_iter().rev().filter(|g| g.start() < g.end()) {
        out = out.merge(group).expect("groups are valid ranges");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot sample {requested} of {available} questions")]
pub struct SampleTooLarge {
    pub requested: usize,
    pub available: usize,
}

/// Uniform sample of `n` questions without replacement, returned in input
/// order with their full paragraphs and articles.
pub fn sample_gold(dataset: &Dataset, n: usize, seed: u64) -> Result<Dataset, SampleTooLarge> {
    let total = dataset.qa_count();
    if n > total {
        return Err(SampleTooLarge { requested: n, available: total });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen: HashSet<usize> = rand::seq::index::sample(&mut rng, total, n).into_iter().collect();
    let mut next = 0;
    let mut data = Vec::new();
    for article in &dataset.data {
        let mut paragraphs = Vec::new();
        for paragraph in &article.paragraphs {
            let qas: Vec<QaItem> = paragraph
                .qas
                .iter()
                .filter(|_| {
                    next += 1;
                    chosen.contains(&(next - 1))
                })
                .cloned()
                .collect();
            if !qas.is_empty() {
                paragraphs.push(Paragraph { context: paragraph.context.clone(), qas, extra: paragraph.extra.clone() });
            }
        }
        if !paragraphs.is_empty() {
            data.push(Article { title: article.title.clone(), paragraphs, extra: article.extra.clone() });
        }
    }
    Ok(Dataset { version: dataset.version.clone(), data, extra: dataset.extra.clone() })
}
