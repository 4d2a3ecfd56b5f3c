//! Sentence-level translation backends, the persistent translation cache,
//! and assembly of a translated context from translated sentences.

use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex, RwLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::http::{HttpEndpointConfig, HttpTemplateClient};
use crate::text::char_len;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TranslateError {
    #[error("nothing to translate")]
    EmptyInput,
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("rate limited (retry after {retry_after:?})")]
    RateLimited { retry_after: Option<Duration> },
    #[error("service returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected response: {0}")]
    BadResponse(String),
    #[error("backend error: {0}")]
    Backend(String),
    #[error("translation cache write failed: {0}")]
    Cache(String),
}

impl TranslateError {
    pub fn is_retryable(&self) -> bool {
        match self {
            TranslateError::Transport(_) | TranslateError::RateLimited { .. } => true,
            TranslateError::Status { status, .. } => *status >= 500,
            _ => false,
        }
    }

    /// Errors that must abort a run rather than fail a single item.
    pub fn is_fatal(&self) -> bool {
        matches!(self, TranslateError::Cache(_))
    }
}

/// A machine translation backend. Must be callable from several worker
/// threads at once.
pub trait Translator: Send + Sync {
    /// Stable identifier; part of the cache key.
    fn id(&self) -> &str;

    fn translate(&self, text: &str, src: &str, tgt: &str) -> Result<String, TranslateError>;
}

/// Returns its input unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityTranslator;

impl Translator for IdentityTranslator {
    fn id(&self) -> &str {
        "identity"
    }

    fn translate(&self, text: &str, _src: &str, _tgt: &str) -> Result<String, TranslateError> {
        if text.trim().is_empty() {
            return Err(TranslateError::EmptyInput);
        }
        Ok(text.to_owned())
    }
}

/// Word-for-word substitution. Tokens are whitespace-delimited; a token
/// missing from the map is retried with surrounding punctuation stripped
/// (and the punctuation re-attached), and passed through if still unknown.
/// A word mapped to the empty string is dropped. Output tokens are joined by
/// single spaces.
#[derive(Debug, Clone, Default)]
pub struct DictionaryTranslator {
    id: String,
    map: HashMap<String, String>,
}

impl DictionaryTranslator {
    pub fn new(id: impl Into<String>, map: HashMap<String, String>) -> Self {
        Self { id: id.into(), map }
    }

    /// Parse a dictionary file: either a JSON object of `source: target`
    /// pairs, or tab-separated `source<TAB>target` lines with `#` comments.
    pub fn parse(id: impl Into<String>, contents: &str) -> Result<Self, TranslateError> {
        if contents.trim_start().starts_with('{') {
            let map: HashMap<String, String> = serde_json::from_str(contents)
                .map_err(|e| TranslateError::Backend(format!("bad dictionary JSON: {e}")))?;
            return Ok(Self::new(id, map));
        }
        let mut map = HashMap::new();
        for (n, line) in contents.lines().enumerate() {
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (source, target) = line
                .split_once('\t')
                .ok_or_else(|| TranslateError::Backend(format!("dictionary line {} has no tab separator", n + 1)))?;
            map.insert(source.trim().to_owned(), target.trim().to_owned());
        }
        Ok(Self::new(id, map))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, TranslateError> {
        let path = path.as_ref();
        let contents =
            std::fs::read_to_string(path).map_err(|e| TranslateError::Backend(format!("{}: {e}", path.display())))?;
        Self::parse(format!("dict:{}", path.display()), &contents)
    }

    fn map_token(&self, token: &str) -> Option<String> {
        if let Some(t) = self.map.get(token) {
            return Some(t.clone());
        }
        let core = token.trim_matches(|c: char| !c.is_alphanumeric());
        if core.is_empty() || core == token {
            return Some(token.to_owned());
        }
        let at = token.find(core).expect("core is a substring");
        let mapped = self.map.get(core)?;
        if mapped.is_empty() {
            return Some(String::new());
        }
        Some(format!("{}{}{}", &token[..at], mapped, &token[at + core.len()..]))
    }
}

impl Translator for DictionaryTranslator {
    fn id(&self) -> &str {
        &self.id
    }

    fn translate(&self, text: &str, _src: &str, _tgt: &str) -> Result<String, TranslateError> {
        if text.trim().is_empty() {
            return Err(TranslateError::EmptyInput);
        }
        let out: Vec<String> = text
            .split_whitespace()
            .map(|tok| self.map_token(tok).unwrap_or_else(|| tok.to_owned()))
            .filter(|t| !t.is_empty())
            .collect();
        Ok(out.join(" "))
    }
}

/// Remote translation service reached through [`HttpTemplateClient`].
#[derive(Debug)]
pub struct HttpTranslator {
    id: String,
    client: HttpTemplateClient,
}

impl HttpTranslator {
    pub fn new(config: HttpEndpointConfig) -> Result<Self, TranslateError> {
        let id = format!("http:{}", config.url);
        Ok(Self { id, client: HttpTemplateClient::new(config)? })
    }
}

impl Translator for HttpTranslator {
    fn id(&self) -> &str {
        &self.id
    }

    fn translate(&self, text: &str, src: &str, tgt: &str) -> Result<String, TranslateError> {
        if text.trim().is_empty() {
            return Err(TranslateError::EmptyInput);
        }
        self.client.call(&[("text", text), ("src", src), ("tgt", tgt)])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationRecord {
    pub source_text: String,
    pub target_text: String,
    pub src_lang: String,
    pub tgt_lang: String,
    pub backend_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    source_text: String,
    src_lang: String,
    tgt_lang: String,
    backend_id: String,
}

impl CacheKey {
    fn new(text: &str, src: &str, tgt: &str, backend: &str) -> Self {
        Self {
            source_text: text.to_owned(),
            src_lang: src.to_owned(),
            tgt_lang: tgt.to_owned(),
            backend_id: backend.to_owned(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("cache file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cache file {path} line {line} is corrupt: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub entries: usize,
    pub hits: usize,
    /// Lookups that went to the backend and succeeded.
    pub backend_calls: usize,
}

/// Append-only JSONL store of [`TranslationRecord`]s with an in-memory
/// index.
///
/// Writes are serialized through one writer and flushed per record. A
/// given key is translated by at most one worker at a time: concurrent
/// misses on the same key wait for the first and then read its result.
#[derive(Debug)]
pub struct TranslationCache {
    path: Option<PathBuf>,
    index: RwLock<HashMap<CacheKey, String>>,
    writer: Option<Mutex<BufWriter<File>>>,
    in_flight: Mutex<HashSet<CacheKey>>,
    settled: Condvar,
    hits: AtomicUsize,
    backend_calls: AtomicUsize,
}

impl TranslationCache {
    pub fn in_memory() -> Self {
        Self {
            path: None,
            index: RwLock::new(HashMap::new()),
            writer: None,
            in_flight: Mutex::new(HashSet::new()),
            settled: Condvar::new(),
            hits: AtomicUsize::new(0),
            backend_calls: AtomicUsize::new(0),
        }
    }

    /// Open (or create) a cache file. A truncated or unparsable final line,
    /// as left by a crash mid-write, is dropped with a warning; damage
    /// anywhere else is an error.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, CacheError> {
        let path = path.as_ref().to_path_buf();
        let io = |source| CacheError::Io { path: path.clone(), source };
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(&path).map_err(io)?;

        let mut index = HashMap::new();
        let mut good_len = 0u64;
        let mut bad: Option<(usize, String)> = None;
        // character devices and pipes have nothing to replay
        if file.metadata().map_err(io)?.is_file() {
            let mut reader = BufReader::new(&mut file);
            let mut line = String::new();
            let mut number = 0;
            loop {
                line.clear();
                let read = reader.read_line(&mut line).map_err(io)?;
                if read == 0 {
                    break;
                }
                number += 1;
                if let Some((bad_line, message)) = bad.take() {
                    return Err(CacheError::Corrupt { path, line: bad_line, message });
                }
                if line.trim().is_empty() {
                    good_len += read as u64;
                    continue;
                }
                let complete = line.ends_with('\n');
                match serde_json::from_str::<TranslationRecord>(line.trim_end()) {
                    Ok(rec) if complete => {
                        let key = CacheKey {
                            source_text: rec.source_text,
                            src_lang: rec.src_lang,
                            tgt_lang: rec.tgt_lang,
                            backend_id: rec.backend_id,
                        };
                        index.insert(key, rec.target_text);
                        good_len += read as u64;
                    }
                    Ok(_) => bad = Some((number, "missing line terminator".into())),
                    Err(e) => bad = Some((number, e.to_string())),
                }
            }
        }
        if let Some((line, message)) = bad {
            log::warn!("{}: dropping incomplete final line {line} ({message})", path.display());
            file.set_len(good_len).map_err(io)?;
        }
        if file.metadata().map_err(io)?.is_file() {
            file.seek(SeekFrom::End(0)).map_err(io)?;
        }

        Ok(Self {
            path: Some(path),
            index: RwLock::new(index),
            writer: Some(Mutex::new(BufWriter::new(file))),
            ..Self::in_memory()
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.index.read().expect("cache index poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            entries: self.len(),
            hits: self.hits.load(Ordering::Relaxed),
            backend_calls: self.backend_calls.load(Ordering::Relaxed),
        }
    }

    pub fn get(&self, text: &str, src: &str, tgt: &str, backend_id: &str) -> Option<String> {
        let key = CacheKey::new(text, src, tgt, backend_id);
        self.index.read().expect("cache index poisoned").get(&key).cloned()
    }

    /// Translate through the cache: a hit returns the stored target without
    /// touching the backend; a miss calls the backend and persists the
    /// record before returning. Blank input translates to itself.
    pub fn translate(
        &self,
        backend: &dyn Translator,
        text: &str,
        src: &str,
        tgt: &str,
    ) -> Result<String, TranslateError> {
        if text.trim().is_empty() {
            return Ok(text.to_owned());
        }
        let key = CacheKey::new(text, src, tgt, backend.id());
        loop {
            if let Some(hit) = self.index.read().expect("cache index poisoned").get(&key) {
                self.hits.fetch_add(1, Ordering::Relaxed);
                return Ok(hit.clone());
            }
            let mut in_flight = self.in_flight.lock().expect("in-flight set poisoned");
            if self.index.read().expect("cache index poisoned").contains_key(&key) {
                continue;
            }
            if in_flight.contains(&key) {
                drop(self.settled.wait(in_flight).expect("in-flight set poisoned"));
                continue;
            }
            in_flight.insert(key.clone());
            drop(in_flight);

            let result = backend.translate(text, src, tgt).and_then(|target| self.persist(&key, target));

            self.in_flight.lock().expect("in-flight set poisoned").remove(&key);
            self.settled.notify_all();
            return result;
        }
    }

    fn persist(&self, key: &CacheKey, target: String) -> Result<String, TranslateError> {
        self.backend_calls.fetch_add(1, Ordering::Relaxed);
        if let Some(writer) = &self.writer {
            let record = TranslationRecord {
                source_text: key.source_text.clone(),
                target_text: target.clone(),
                src_lang: key.src_lang.clone(),
                tgt_lang: key.tgt_lang.clone(),
                backend_id: key.backend_id.clone(),
            };
            let mut line = serde_json::to_string(&record).expect("records always serialize");
            line.push('\n');
            let mut w = writer.lock().expect("cache writer poisoned");
            w.write_all(line.as_bytes()).and_then(|_| w.flush()).map_err(|e| TranslateError::Cache(e.to_string()))?;
        }
        self.index.write().expect("cache index poisoned").insert(key.clone(), target.clone());
        Ok(target)
    }
}

/// Translated sentences joined by single spaces, with each sentence's
/// code-point offset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslatedContext {
    pub full_text: String,
    pub sentence_offsets: Vec<usize>,
}

impl TranslatedContext {
    pub fn sentence_count(&self) -> usize {
        self.sentence_offsets.len()
    }

    /// Code-point length of sentence `i`.
    pub fn sentence_len(&self, i: usize) -> usize {
        let end = match self.sentence_offsets.get(i + 1) {
            Some(next) => next - 1,
            None => char_len(&self.full_text),
        };
        end - self.sentence_offsets[i]
    }

    pub fn sentence(&self, i: usize) -> &str {
        crate::text::slice_chars(&self.full_text, self.sentence_offsets[i], self.sentence_len(i))
            .expect("offsets are consistent with full_text")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("translated sentence {index} is empty")]
pub struct EmptySentence {
    pub index: usize,
}

pub fn build_translated_context(sentences: &[String]) -> Result<TranslatedContext, EmptySentence> {
    let mut full_text = String::new();
    let mut sentence_offsets = Vec::with_capacity(sentences.len());
    let mut offset = 0;
    for (index, sentence) in sentences.iter().enumerate() {
        if sentence.is_empty() {
            return Err(EmptySentence { index });
        }
        if index > 0 {
            full_text.push(' ');
            offset += 1;
        }
        sentence_offsets.push(offset);
        full_text.push_str(sentence);
        offset += char_len(sentence);
    }
    Ok(TranslatedContext { full_text, sentence_offsets })
}
