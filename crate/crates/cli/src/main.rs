use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use spanshift::eval::{evaluate, Predictions};
use spanshift::model::{dataset_stats, read_dataset, structural_issues, validate_spans, write_dataset, DatasetError};
use spanshift::pipeline::{sample_gold, Pipeline, PipelineConfig};
use spanshift::review::ReviewSession;
use spanshift::translation::HttpTranslator;
use spanshift::transliteration::HttpTransliterator;
use spanshift::{Dataset, DictionaryTranslator, IdentityTranslator, TranslationCache, Translator};

mod config;

use config::{pick, FileConfig};

#[derive(Parser, Debug)]
#[command(name = "spanshift", version, about = "Translate SQuAD 2.0 datasets with exact answer spans")]
struct Cli {
    /// TOML file whose keys mirror the flags; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Repeat for more logging.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Translate a dataset.
    Translate(TranslateArgs),
    /// Check a dataset's structure and every answer span.
    Validate(InputArgs),
    /// Print article, paragraph and question counts.
    Stats(InputArgs),
    /// Draw a seeded random sample of questions for manual review.
    SampleGold(SampleArgs),
    /// Score a predictions file against a gold dataset.
    Evaluate(EvaluateArgs),
    /// Serve the review API and UI.
    ServeReview(ServeArgs),
}

#[derive(Args, Debug)]
struct TranslateArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// JSONL translation cache; makes runs resumable.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// identity | dict:FILE | http
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    src: Option<String>,
    #[arg(long)]
    tgt: Option<String>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Alignments whose best phrase scores below this fail.
    #[arg(long)]
    min_score: Option<f64>,
    #[arg(long)]
    threshold_ratio: Option<f64>,
    #[arg(long)]
    max_phrase_words: Option<usize>,
    /// Write the run summary and failure list here as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Extra abbreviations, one per line.
    #[arg(long)]
    abbreviations: Option<PathBuf>,
    /// Drop plausible answers instead of aligning them.
    #[arg(long)]
    no_align_plausible: bool,
    #[arg(long)]
    no_camel_case: bool,
    #[arg(long)]
    no_digits: bool,
    #[arg(long)]
    no_fold_latin: bool,
    #[arg(long)]
    no_trim_punctuation: bool,
    /// Convert leftover Latin words with the `transliteration_http` service
    /// from the config file.
    #[arg(long)]
    transliterate: bool,
}

#[derive(Args, Debug)]
struct InputArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Number of questions to draw.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Gold dataset.
    #[arg(long)]
    input: Option<PathBuf>,
    /// JSON object mapping question id to predicted answer.
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ServeArgs {
    /// Candidate dataset, usually from sample-gold.
    #[arg(long)]
    input: Option<PathBuf>,
    /// JSONL verdict log; created if missing.
    #[arg(long)]
    verdicts: Option<PathBuf>,
    /// Directory with the review UI's static files.
    #[arg(long)]
    static_dir: Option<PathBuf>,
    #[arg(long)]
    addr: Option<String>,
}

enum Outcome {
    Success,
    CompletedWithFailures,
}

fn required<T>(value: Option<T>, name: &str) -> anyhow::Result<T> {
    value.ok_or_else(|| anyhow!("--{name} is required (on the command line or in the config file)"))
}

fn load(path: &Path) -> anyhow::Result<Dataset> {
    read_dataset(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(report: Option<&Path>, value: &impl Serialize) -> anyhow::Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    match report {
        Some(path) => std::fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display())),
        None => Ok(writeln!(std::io::stdout(), "{json}")?),
    }
}

fn backend(spec: &str, file: &FileConfig) -> anyhow::Result<Box<dyn Translator>> {
    Ok(match spec {
        "identity" => Box::new(IdentityTranslator),
        "http" => {
            let endpoint = file.http.clone().ok_or_else(|| anyhow!("--backend http needs an [http] config section"))?;
            Box::new(HttpTranslator::new(endpoint)?)
        }
        other => match other.strip_prefix("dict:") {
            Some(path) => Box::new(DictionaryTranslator::from_file(path)?),
            None => bail!("unknown backend {other:?}; expected identity, dict:FILE or http"),
        },
    })
}

#[derive(Serialize)]
struct TranslateReport<'a> {
    summary: &'a spanshift::RunSummary,
    failures: &'a [spanshift::FailureRecord],
}

fn translate(args: TranslateArgs, file: FileConfig) -> anyhow::Result<Outcome> {
    let input = required(pick(args.input, file.input.clone()), "input")?;
    let output = required(pick(args.output, file.output.clone()), "output")?;
    let backend_spec = pick(args.backend, file.backend.clone()).unwrap_or_else(|| "identity".into());
    let translator = backend(&backend_spec, &file)?;

    let mut config = PipelineConfig::default();
    if let Some(v) = pick(args.src, file.src.clone()) {
        config.src_lang = v;
    }
    if let Some(v) = pick(args.tgt, file.tgt.clone()) {
        config.tgt_lang = v;
    }
    config.jobs = pick(args.jobs, file.jobs).unwrap_or(1);
    config.seed = pick(args.seed, file.seed).unwrap_or(0);
    if let Some(v) = pick(args.min_score, file.min_score) {
        config.align.min_accept_floor = v;
    }
    if let Some(v) = pick(args.threshold_ratio, file.threshold_ratio) {
        config.align.threshold_ratio = v;
    }
    config.align.max_phrase_words = pick(args.max_phrase_words, file.max_phrase_words);
    let flag = |cli: bool, cfg: Option<bool>| cli || cfg.unwrap_or(false);
    config.align.trim_punctuation = !flag(args.no_trim_punctuation, file.no_trim_punctuation);
    config.align_plausible = !flag(args.no_align_plausible, file.no_align_plausible);
    config.fold_camel_case = !flag(args.no_camel_case, file.no_camel_case);
    config.script.digits = !flag(args.no_digits, file.no_digits);
    config.script.fold_latin = !flag(args.no_fold_latin, file.no_fold_latin);
    if let Some(path) = pick(args.abbreviations, file.abbreviations.clone()) {
        config.abbreviations.extend_from_file(&path).with_context(|| format!("reading {}", path.display()))?;
    }

    let engine = if flag(args.transliterate, file.transliterate) {
        let endpoint = file
            .transliteration_http
            .clone()
            .ok_or_else(|| anyhow!("--transliterate needs a [transliteration_http] config section"))?;
        Some(HttpTransliterator::new(endpoint, config.tgt_lang.clone())?)
    } else {
        None
    };

    let cache = match pick(args.cache, file.cache.clone()) {
        Some(path) => TranslationCache::open(&path)?,
        None => TranslationCache::in_memory(),
    };
    let dataset = load(&input)?;

    let mut pipeline = Pipeline::new(config, translator.as_ref(), &cache);
    if let Some(engine) = &engine {
        pipeline = pipeline.with_engine(engine);
    }
    let result = pipeline.run(&dataset)?;
    write_dataset(&output, &result.dataset).with_context(|| format!("writing {}", output.display()))?;

    let s = &result.summary;
    log::info!(
        "{} of {} questions translated, {} failed; {} backend calls, {} cache hits",
        s.output_qas,
        s.input_qas,
        s.failed_qas,
        s.backend_calls,
        s.cache_hits
    );
    let report = TranslateReport { summary: s, failures: &result.failures };
    match pick(args.report, file.report.clone()) {
        Some(path) => emit(Some(&path), &report)?,
        None => eprintln!("{}", serde_json::to_string_pretty(s)?),
    }
    Ok(if result.failures.is_empty() { Outcome::Success } else { Outcome::CompletedWithFailures })
}

#[derive(Serialize)]
struct ValidationReport {
    structural: Vec<String>,
    spans: Vec<spanshift::model::SpanViolation>,
}

fn validate(args: InputArgs, file: FileConfig) -> anyhow::Result<Outcome> {
    let input = required(pick(args.input, file.input.clone()), "input")?;
    let raw = std::fs::read(&input).with_context(|| format!("reading {}", input.display()))?;
    // Structural problems are reported rather than treated as fatal.
    let dataset = match spanshift::model::parse_dataset(&raw) {
        Ok(d) => d,
        Err(DatasetError::Invalid(issues)) => {
            let report =
                ValidationReport { structural: issues.iter().map(ToString::to_string).collect(), spans: vec![] };
            emit(pick(args.report, file.report).as_deref(), &report)?;
            return Ok(Outcome::CompletedWithFailures);
        }
        Err(e) => return Err(e).with_context(|| format!("parsing {}", input.display())),
    };
    let report = ValidationReport {
        structural: structural_issues(&dataset).iter().map(ToString::to_string).collect(),
        spans: validate_spans(&dataset),
    };
    let clean = report.structural.is_empty() && report.spans.is_empty();
    emit(pick(args.report, file.report).as_deref(), &report)?;
    Ok(if clean { Outcome::Success } else { Outcome::CompletedWithFailures })
}

fn stats(args: InputArgs, file: FileConfig) -> anyhow::Result<Outcome> {
    let input = required(pick(args.input, file.input.clone()), "input")?;
    emit(pick(args.report, file.report).as_deref(), &dataset_stats(&load(&input)?))?;
    Ok(Outcome::Success)
}

fn sample(args: SampleArgs, file: FileConfig) -> anyhow::Result<Outcome> {
    let input = required(pick(args.input, file.input.clone()), "input")?;
    let output = required(pick(args.output, file.output.clone()), "output")?;
    let n = required(pick(args.n, file.n), "n")?;
    let sampled = sample_gold(&load(&input)?, n, pick(args.seed, file.seed).unwrap_or(0))?;
    write_dataset(&output, &sampled).with_context(|| format!("writing {}", output.display()))?;
    Ok(Outcome::Success)
}

fn eval(args: EvaluateArgs, file: FileConfig) -> anyhow::Result<Outcome> {
    let input = required(pick(args.input, file.input.clone()), "input")?;
    let predictions_path = required(pick(args.predictions, file.predictions.clone()), "predictions")?;
    let raw = std::fs::read(&predictions_path).with_context(|| format!("reading {}", predictions_path.display()))?;
    let predictions: Predictions =
        serde_json::from_slice(&raw).with_context(|| format!("parsing {}", predictions_path.display()))?;
    let report = evaluate::<f64>(&predictions, &load(&input)?);
    if !report.missing.is_empty() {
        log::warn!("{} gold questions have no prediction", report.missing.len());
    }
    emit(pick(args.report, file.report).as_deref(), &report)?;
    Ok(if report.missing.is_empty() { Outcome::Success } else { Outcome::CompletedWithFailures })
}

fn serve(args: ServeArgs, file: FileConfig) -> anyhow::Result<Outcome> {
    let input = required(pick(args.input, file.input.clone()), "input")?;
    let verdicts = required(pick(args.verdicts, file.verdicts.clone()), "verdicts")?;
    let addr: SocketAddr = pick(args.addr, file.addr.clone())
        .unwrap_or_else(|| "127.0.0.1:8080".into())
        .parse()
        .context("parsing --addr")?;
    let session = ReviewSession::open(load(&input)?, &verdicts)?;
    let static_dir = pick(args.static_dir, file.static_dir.clone());
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(spanshift_review::serve(addr, session, static_dir))?;
    Ok(Outcome::Success)
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Translate(a) => translate(a, file),
        Command::Validate(a) => validate(a, file),
        Command::Stats(a) => stats(a, file),
        Command::SampleGold(a) => sample(a, file),
        Command::Evaluate(a) => eval(a, file),
        Command::ServeReview(a) => serve(a, file),
    }
}

fn main() -> ExitCode {
    // clap would exit with 2 on bad usage, which here means "completed with
    // failures"
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::CompletedWithFailures) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
