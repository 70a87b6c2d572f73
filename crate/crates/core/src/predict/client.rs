//! Model client traits, response caching, and bounded-concurrency mapping.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Mutex;

use thiserror::Error;

use crate::hashing::sha256_hex;

/// A failure to reach or use a model endpoint.
#[derive(Debug, Clone, Error)]
#[error("{message}")]
pub struct TransportError {
    pub message: String,
}

impl TransportError {
    pub fn new(message: impl Into<String>) -> TransportError {
        TransportError { message: message.into() }
    }
}

/// Decoding controls passed to text model calls.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DecodingParams {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for DecodingParams {
    fn default() -> DecodingParams {
        DecodingParams { temperature: 0.0, max_tokens: 256 }
    }
}

/// A text completion endpoint.
pub trait TextModelClient: Send + Sync {
    /// Stable identifier used in cache keys and run manifests.
    fn tag(&self) -> &str;
    fn complete(&self, prompt: &str, params: &DecodingParams) -> Result<String, TransportError>;
}

/// A text embedding endpoint.
pub trait EmbeddingClient: Send + Sync {
    /// Stable identifier used in cache keys and run manifests.
    fn tag(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>, TransportError>;
}

/// Response cache keyed by client tag and prompt hash.
///
/// With an optional backing directory, entries persist across processes as
/// one file per response, so repeated benchmark runs cost nothing.
pub struct ResponseCache {
    entries: Mutex<HashMap<(String, String), String>>,
    dir: Option<PathBuf>,
}

impl ResponseCache {
    pub fn in_memory() -> ResponseCache {
        ResponseCache { entries: Mutex::new(HashMap::new()), dir: None }
    }

    /// A cache that mirrors every entry into `dir`.
    pub fn on_disk(dir: impl Into<PathBuf>) -> std::io::Result<ResponseCache> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(ResponseCache { entries: Mutex::new(HashMap::new()), dir: Some(dir) })
    }

    fn file_for(&self, tag: &str, prompt_hash: &str) -> Option<PathBuf> {
        let dir = self.dir.as_ref()?;
        let safe_tag = sha256_hex(tag.as_bytes());
        Some(dir.join(format!("{}-{prompt_hash}.txt", &safe_tag[..16])))
    }

    pub fn get(&self, tag: &str, prompt: &str) -> Option<String> {
        let prompt_hash = sha256_hex(prompt.as_bytes());
        let key = (tag.to_string(), prompt_hash.clone());
        if let Some(hit) = self.entries.lock().expect("cache lock").get(&key) {
            return Some(hit.clone());
        }
        let path = self.file_for(tag, &prompt_hash)?;
        let content = std::fs::read_to_string(path).ok()?;
        self.entries.lock().expect("cache lock").insert(key, content.clone());
        Some(content)
    }

    pub fn put(&self, tag: &str, prompt: &str, response: &str) {
        let prompt_hash = sha256_hex(prompt.as_bytes());
        if let Some(path) = self.file_for(tag, &prompt_hash) {
            // Best effort; the in-memory copy still serves this process.
            let _ = std::fs::write(path, response);
        }
        self.entries
            .lock()
            .expect("cache lock")
            .insert((tag.to_string(), prompt_hash), response.to_string());
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Wraps a client so repeated prompts are served from a [`ResponseCache`].
pub struct CachedClient<'a> {
    inner: &'a dyn TextModelClient,
    cache: &'a ResponseCache,
}

impl<'a> CachedClient<'a> {
    pub fn new(inner: &'a dyn TextModelClient, cache: &'a ResponseCache) -> CachedClient<'a> {
        CachedClient { inner, cache }
    }
}

impl TextModelClient for CachedClient<'_> {
    fn tag(&self) -> &str {
        self.inner.tag()
    }

    fn complete(&self, prompt: &str, params: &DecodingParams) -> Result<String, TransportError> {
        if let Some(hit) = self.cache.get(self.inner.tag(), prompt) {
            return Ok(hit);
        }
        let response = self.inner.complete(prompt, params)?;
        self.cache.put(self.inner.tag(), prompt, &response);
        Ok(response)
    }
}

/// Apply `f` to every item with at most `in_flight` worker threads, returning
/// results in input order. `in_flight <= 1` runs sequentially.
pub fn map_bounded<T, R, F>(items: &[T], in_flight: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    if items.is_empty() {
        return Vec::new();
    }
    if in_flight <= 1 || items.len() == 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let workers = in_flight.min(items.len());
    let (tx, rx) = std::sync::mpsc::channel::<(usize, R)>();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            let f = &f;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                tx.send((i, f(i, &items[i]))).expect("receiver outlives workers");
            });
        }
    });
    drop(tx);
    let mut results: Vec<(usize, R)> = rx.into_iter().collect();
    results.sort_by_key(|(i, _)| *i);
    results.into_iter().map(|(_, r)| r).collect()
}
