//! Optional TOML configuration. Every key mirrors a command-line flag of
//! the same name (with `_` for `-`); flags given on the command line win.
//!
//! ```toml
//! src = "en"
//! tgt = "mr"
//! backend = "http"
//! cache = "cache.jsonl"
//! jobs = 8
//! min_score = 0.35
//! threshold_ratio = 0.99
//!
//! [http]
//! url = "https://translate.example/v1"
//! body_template = '{"q": "{text}", "source": "{src}", "target": "{tgt}"}'
//! response_path = "translations.0.text"
//! api_key_env = "TRANSLATE_KEY"
//! headers = { Authorization = "Bearer {api_key}" }
//! requests_per_second = 5.0
//! ```

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;
use spanshift::http::HttpEndpointConfig;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub backend: Option<String>,
    pub src: Option<String>,
    pub tgt: Option<String>,
    pub jobs: Option<usize>,
    pub min_score: Option<f64>,
    pub threshold_ratio: Option<f64>,
    pub max_phrase_words: Option<usize>,
    pub report: Option<PathBuf>,
    pub seed: Option<u64>,
    pub abbreviations: Option<PathBuf>,
    pub no_align_plausible: Option<bool>,
    pub no_camel_case: Option<bool>,
    pub no_digits: Option<bool>,
    pub no_fold_latin: Option<bool>,
    pub no_trim_punctuation: Option<bool>,
    pub transliterate: Option<bool>,
    pub predictions: Option<PathBuf>,
    pub n: Option<usize>,
    pub verdicts: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
    pub addr: Option<String>,
    /// Translation service used by `--backend http`.
    pub http: Option<HttpEndpointConfig>,
    /// Transliteration service used by `--transliterate`.
    pub transliteration_http: Option<HttpEndpointConfig>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// `flag` if given, else the config value.
pub fn pick<T>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}
