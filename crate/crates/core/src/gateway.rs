//! Completion backends: live chat-completion over HTTP, and deterministic
//! record/replay from a line-delimited JSON fixture file.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::prompting::StageId;

pub const DEFAULT_API_KEY_ENV: &str = "SISCO_API_KEY";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("invalid completion request: {0}")]
    InvalidRequest(String),
    #[error("transport failed after {attempts} attempt(s): {message}")]
    TransportError { attempts: u32, message: String },
    #[error("endpoint rejected request with status {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("malformed completion response: {0}")]
    MalformedResponse(String),
    #[error("no fixture recorded for key {key}")]
    FixtureMiss { key: String },
    #[error("credential environment variable {var} is not set")]
    AuthMissing { var: String },
    #[error("fixture store write failed: {0}")]
    StoreWriteError(String),
    #[error("fixture store read failed: {0}")]
    StoreReadError(String),
    #[error("temperature sweep needs at least one value")]
    EmptySweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub stage: StageId,
    pub template_version: String,
    pub prompt: String,
    pub temperature: f64,
    pub model_id: String,
    pub max_tokens: u32,
}

impl CompletionRequest {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.prompt.is_empty() {
            return Err(GatewayError::InvalidRequest("prompt is empty".into()));
        }
        check_temperature(self.temperature)?;
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }

    pub fn fixture_key(&self) -> String {
        fixture_key(self)
    }
}

fn check_temperature(t: f64) -> Result<(), GatewayError> {
    if !(0.0..=2.0).contains(&t) {
        return Err(GatewayError::InvalidRequest(format!("temperature {t} outside [0, 2]")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Live,
    Fixture,
    /// A deterministic stand-in responder, used to author fixture corpora.
    Scripted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub text: String,
    pub model_id: String,
    #[serde(with = "duration_ms")]
    pub latency: Duration,
    pub backend: BackendKind,
}

mod duration_ms {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

/// SHA-256 over the canonical JSON array
/// `[stage, template_version, prompt, temperature, model_id]`.
pub fn fixture_key(req: &CompletionRequest) -> String {
    let canonical = serde_json::to_string(&(
        req.stage.as_str(),
        &req.template_version,
        &req.prompt,
        req.temperature,
        &req.model_id,
    ))
    .expect("tuple of strings and f64 serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

pub trait CompletionBackend: Send + Sync {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResult, GatewayError>;
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for std::sync::Arc<B> {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResult, GatewayError> {
        (**self).complete(req)
    }
}

/// One result per temperature, in input order. Per-item failures are
/// collected rather than aborting the sweep.
pub fn sweep_temperatures(
    backend: &dyn CompletionBackend,
    base: &CompletionRequest,
    values: &[f64],
) -> Result<Vec<Result<CompletionResult, GatewayError>>, GatewayError> {
    if values.is_empty() {
        return Err(GatewayError::EmptySweep);
    }
    for &t in values {
        check_temperature(t)?;
    }
    Ok(values
        .iter()
        .map(|&temperature| {
            let req = CompletionRequest { temperature, ..base.clone() };
            backend.complete(&req)
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Fixture store

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub key: String,
    pub stage: StageId,
    pub model_id: String,
    pub temperature: f64,
    pub response_text: String,
    pub recorded_at: DateTime<Utc>,
}

/// Line-delimited JSON fixture file. Later lines win on key collision.
/// Reads go through an in-memory index; appends are serialized.
#[derive(Debug)]
pub struct FixtureStore {
    path: Option<PathBuf>,
    index: RwLock<HashMap<String, FixtureEntry>>,
    writer: Mutex<()>,
}

impl FixtureStore {
    /// Opens (or lazily creates on first write) the store at `path`.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref().to_path_buf();
        let mut index = HashMap::new();
        match File::open(&path) {
            Ok(f) => {
                for (n, line) in BufReader::new(f).lines().enumerate() {
                    let line = line.map_err(|e| GatewayError::StoreReadError(e.to_string()))?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    let entry: FixtureEntry = serde_json::from_str(&line).map_err(|e| {
                        GatewayError::StoreReadError(format!("{}:{}: {e}", path.display(), n + 1))
                    })?;
                    index.insert(entry.key.clone(), entry);
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(GatewayError::StoreReadError(e.to_string())),
        }
        Ok(Self {
            path: Some(path),
            index: RwLock::new(index),
            writer: Mutex::new(()),
        })
    }

    /// A store that never touches disk.
    pub fn in_memory() -> Self {
        Self {
            path: None,
            index: RwLock::new(HashMap::new()),
            writer: Mutex::new(()),
        }
    }

    /// Loads entries from JSONL text without a backing file.
    pub fn from_jsonl(text: &str) -> Result<Self, GatewayError> {
        let store = Self::in_memory();
        {
            let mut index = store.index.write().unwrap();
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                let entry: FixtureEntry = serde_json::from_str(line)
                    .map_err(|e| GatewayError::StoreReadError(e.to_string()))?;
                index.insert(entry.key.clone(), entry);
            }
        }
        Ok(store)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, key: &str) -> Option<FixtureEntry> {
        self.index.read().unwrap().get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.index.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn append(&self, entry: FixtureEntry) -> Result<(), GatewayError> {
        let _guard = self.writer.lock().unwrap();
        if let Some(path) = &self.path {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)
                    .map_err(|e| GatewayError::StoreWriteError(e.to_string()))?;
            }
            let mut line = serde_json::to_string(&entry)
                .map_err(|e| GatewayError::StoreWriteError(e.to_string()))?;
            line.push('\n');
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .and_then(|mut f| f.write_all(line.as_bytes()))
                .map_err(|e| GatewayError::StoreWriteError(format!("{}: {e}", path.display())))?;
        }
        self.index.write().unwrap().insert(entry.key.clone(), entry);
        Ok(())
    }

    /// Rewrites the backing file with one line per key, sorted by key.
    pub fn compact(&self) -> Result<(), GatewayError> {
        let _guard = self.writer.lock().unwrap();
        let Some(path) = &self.path else { return Ok(()) };
        let index = self.index.read().unwrap();
        let mut entries: Vec<_> = index.values().collect();
        entries.sort_by(|a, b| a.key.cmp(&b.key));
        let mut text = String::new();
        for e in entries {
            text.push_str(
                &serde_json::to_string(e).map_err(|e| GatewayError::StoreWriteError(e.to_string()))?,
            );
            text.push('\n');
        }
        std::fs::write(path, text).map_err(|e| GatewayError::StoreWriteError(e.to_string()))
    }
}

pub fn record_fixture(
    req: &CompletionRequest,
    res: &CompletionResult,
    store: &FixtureStore,
) -> Result<FixtureEntry, GatewayError> {
    if res.backend == BackendKind::Fixture {
        return Err(GatewayError::StoreWriteError(
            "refusing to re-record a replayed response".into(),
        ));
    }
    let entry = FixtureEntry {
        key: fixture_key(req),
        stage: req.stage,
        model_id: req.model_id.clone(),
        temperature: req.temperature,
        response_text: res.text.clone(),
        recorded_at: Utc::now(),
    };
    store.append(entry.clone())?;
    Ok(entry)
}

/// Replays recorded responses; never performs I/O beyond the store.
pub struct FixtureBackend {
    store: std::sync::Arc<FixtureStore>,
}

impl FixtureBackend {
    pub fn new(store: std::sync::Arc<FixtureStore>) -> Self {
        Self { store }
    }

    pub fn store(&self) -> &FixtureStore {
        &self.store
    }
}

impl CompletionBackend for FixtureBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResult, GatewayError> {
        req.validate()?;
        let key = fixture_key(req);
        let entry = self.store.get(&key).ok_or(GatewayError::FixtureMiss { key })?;
        Ok(CompletionResult {
            text: entry.response_text,
            model_id: req.model_id.clone(),
            latency: Duration::ZERO,
            backend: BackendKind::Fixture,
        })
    }
}

/// Forwards to `inner` and records every successful response.
pub struct RecordingBackend<B> {
    inner: B,
    store: std::sync::Arc<FixtureStore>,
}

impl<B: CompletionBackend> RecordingBackend<B> {
    pub fn new(inner: B, store: std::sync::Arc<FixtureStore>) -> Self {
        Self { inner, store }
    }
}

impl<B: CompletionBackend> CompletionBackend for RecordingBackend<B> {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResult, GatewayError> {
        let res = self.inner.complete(req)?;
        record_fixture(req, &res, &self.store)?;
        Ok(res)
    }
}

// ---------------------------------------------------------------------------
// Live backend

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// Minimal blocking POST used by [`LiveBackend`]. `Err` means the request
/// never produced an HTTP status (connect, DNS, timeout, ...).
pub trait HttpTransport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        bearer: &str,
        body: &str,
        timeout: Duration,
    ) -> Result<HttpResponse, String>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub backoff: Vec<Duration>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            backoff: vec![
                Duration::from_millis(500),
                Duration::from_secs(1),
                Duration::from_secs(2),
            ],
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, retry: u32) -> Duration {
        match self.backoff.get(retry as usize) {
            Some(d) => *d,
            None => self.backoff.last().copied().unwrap_or_default() * 2u32.saturating_pow(retry),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Credential {
    /// Read from this environment variable at call time.
    Env(String),
    Fixed(String),
}

impl Credential {
    fn resolve(&self) -> Result<String, GatewayError> {
        match self {
            Credential::Fixed(k) => Ok(k.clone()),
            Credential::Env(var) => match std::env::var(var) {
                Ok(v) if !v.trim().is_empty() => Ok(v),
                _ => Err(GatewayError::AuthMissing { var: var.clone() }),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ChatBody<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

/// The request body sent to a chat-completion endpoint. The whole rendered
/// envelope travels as a single user message.
pub fn chat_request_body(req: &CompletionRequest) -> String {
    serde_json::to_string(&ChatBody {
        model: &req.model_id,
        messages: [ChatMessage { role: "user", content: &req.prompt }],
        temperature: req.temperature,
        max_tokens: req.max_tokens,
    })
    .expect("chat body serializes")
}

pub fn parse_chat_response(body: &str) -> Result<String, GatewayError> {
    let v: serde_json::Value =
        serde_json::from_str(body).map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .map(str::to_string)
        .ok_or_else(|| GatewayError::MalformedResponse("missing choices[0].message.content".into()))
}

pub struct LiveBackend<T> {
    endpoint: String,
    credential: Credential,
    timeout: Duration,
    retry: RetryPolicy,
    transport: T,
    sleep: Box<dyn Fn(Duration) + Send + Sync>,
}

impl<T: HttpTransport> LiveBackend<T> {
    pub fn new(endpoint: impl Into<String>, credential: Credential, transport: T) -> Self {
        Self {
            endpoint: endpoint.into(),
            credential,
            timeout: Duration::from_secs(120),
            retry: RetryPolicy::default(),
            transport,
            sleep: Box::new(std::thread::sleep),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Replaces the backoff sleeper (tests use a recorder).
    pub fn with_sleeper(mut self, sleep: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleep = Box::new(sleep);
        self
    }
}

impl<T: HttpTransport> CompletionBackend for LiveBackend<T> {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResult, GatewayError> {
        req.validate()?;
        let key = self.credential.resolve()?;
        let body = chat_request_body(req);
        let started = Instant::now();
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            let failure = match self.transport.post_json(&self.endpoint, &key, &body, self.timeout) {
                Ok(resp) if (200..300).contains(&resp.status) => {
                    return Ok(CompletionResult {
                        text: parse_chat_response(&resp.body)?,
                        model_id: req.model_id.clone(),
                        latency: started.elapsed(),
                        backend: BackendKind::Live,
                    });
                }
                Ok(resp) if resp.status >= 500 => format!("status {}: {}", resp.status, resp.body),
                Ok(resp) => {
                    return Err(GatewayError::Rejected { status: resp.status, body: resp.body });
                }
                Err(message) => message,
            };
            if attempt > self.retry.max_retries {
                return Err(GatewayError::TransportError { attempts: attempt, message: failure });
            }
            (self.sleep)(self.retry.delay(attempt - 1));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    fn req(prompt: &str, temperature: f64) -> CompletionRequest {
        CompletionRequest {
            stage: StageId::TaskManager,
            template_version: "v1-abc".into(),
            prompt: prompt.into(),
            temperature,
            model_id: "gpt-4-turbo".into(),
            max_tokens: 512,
        }
    }

    fn scripted(text: &str) -> CompletionResult {
        CompletionResult {
            text: text.into(),
            model_id: "gpt-4-turbo".into(),
            latency: Duration::from_millis(7),
            backend: BackendKind::Scripted,
        }
    }

    /// Independent reconstruction of the key for ASCII inputs without
    /// characters needing JSON escapes.
    fn key_oracle(stage: &str, version: &str, prompt: &str, t: &str, model: &str) -> String {
        let text = format!(r#"["{stage}","{version}","{prompt}",{t},"{model}"]"#);
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    #[test]
    fn key_matches_oracle() {
        let r = req("place the rocket", 0.5);
        assert_eq!(fixture_key(&r), key_oracle("TaskManager", "v1-abc", "place the rocket", "0.5", "gpt-4-turbo"));
        let r = req("x", 0.0);
        assert_eq!(fixture_key(&r), key_oracle("TaskManager", "v1-abc", "x", "0.0", "gpt-4-turbo"));
    }

    #[test]
    fn key_ignores_max_tokens_but_not_temperature() {
        let a = req("p", 0.5);
        let mut b = a.clone();
        b.max_tokens = 9;
        assert_eq!(fixture_key(&a), fixture_key(&b));
        assert_ne!(fixture_key(&a), fixture_key(&req("p", 0.6)));
    }

    #[test]
    fn fixture_miss_reports_key() {
        let backend = FixtureBackend::new(Arc::new(FixtureStore::in_memory()));
        let r = req("unrecorded", 0.0);
        match backend.complete(&r) {
            Err(GatewayError::FixtureMiss { key }) => {
                assert_eq!(key, key_oracle("TaskManager", "v1-abc", "unrecorded", "0.0", "gpt-4-turbo"))
            }
            other => panic!("expected miss, got {other:?}"),
        }
    }

    #[test]
    fn record_replay_and_last_writer_wins() {
        let dir = std::env::temp_dir().join(format!("fixtures-{}", std::process::id()));
        let path = dir.join("store.jsonl");
        let _ = std::fs::remove_file(&path);
        let store = FixtureStore::open(&path).unwrap();
        let r = req("p", 0.2);
        record_fixture(&r, &scripted("first"), &store).unwrap();
        record_fixture(&r, &scripted("second"), &store).unwrap();
        record_fixture(&req("p", 0.3), &scripted("other"), &store).unwrap();
        assert_eq!(store.len(), 2);

        let reopened = Arc::new(FixtureStore::open(&path).unwrap());
        assert_eq!(reopened.len(), 2);
        let backend = FixtureBackend::new(reopened.clone());
        let a = backend.complete(&r).unwrap();
        let b = backend.complete(&r).unwrap();
        assert_eq!(a.text, "second");
        assert_eq!(a, b);
        assert_eq!(a.backend, BackendKind::Fixture);

        reopened.compact().unwrap();
        let lines = std::fs::read_to_string(&path).unwrap().lines().count();
        assert_eq!(lines, 2);
        assert!(record_fixture(&r, &a, &reopened).is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn sweep_preserves_order() {
        let store = Arc::new(FixtureStore::in_memory());
        for (t, text) in [(0.0, "cold"), (0.5, "warm"), (1.0, "hot")] {
            record_fixture(&req("icon", t), &scripted(text), &store).unwrap();
        }
        let backend = FixtureBackend::new(store);
        let out = sweep_temperatures(&backend, &req("icon", 0.0), &[0.0, 0.5, 1.0]).unwrap();
        let texts: Vec<_> = out.into_iter().map(|r| r.unwrap().text).collect();
        assert_eq!(texts, ["cold", "warm", "hot"]);

        let dup = sweep_temperatures(&backend, &req("icon", 0.0), &[0.5, 0.5]).unwrap();
        assert_eq!(dup[0], dup[1]);
        assert_eq!(
            sweep_temperatures(&backend, &req("icon", 0.0), &[]),
            Err(GatewayError::EmptySweep)
        );
        let partial = sweep_temperatures(&backend, &req("icon", 0.0), &[0.0, 0.7]).unwrap();
        assert!(partial[0].is_ok() && matches!(partial[1], Err(GatewayError::FixtureMiss { .. })));
        assert!(sweep_temperatures(&backend, &req("icon", 0.0), &[2.5]).is_err());
    }

    struct FakeTransport {
        statuses: Vec<Result<u16, String>>,
        calls: AtomicUsize,
    }

    impl FakeTransport {
        fn new(statuses: Vec<Result<u16, String>>) -> Self {
            Self { statuses, calls: AtomicUsize::new(0) }
        }
    }

    impl HttpTransport for Arc<FakeTransport> {
        fn post_json(&self, _url: &str, bearer: &str, body: &str, _t: Duration) -> Result<HttpResponse, String> {
            assert_eq!(bearer, "secret");
            let v: serde_json::Value = serde_json::from_str(body).unwrap();
            assert_eq!(v["messages"][0]["role"], "user");
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            let status = self.statuses[n.min(self.statuses.len() - 1)].clone()?;
            let body = if status == 200 {
                r#"{"choices":[{"message":{"role":"assistant","content":"ok"}}]}"#.to_string()
            } else {
                "err".to_string()
            };
            Ok(HttpResponse { status, body })
        }
    }

    type Sleeps = Arc<Mutex<Vec<Duration>>>;

    fn live(statuses: Vec<Result<u16, String>>) -> (LiveBackend<Arc<FakeTransport>>, Arc<FakeTransport>, Sleeps) {
        let transport = Arc::new(FakeTransport::new(statuses));
        let slept = Arc::new(Mutex::new(Vec::new()));
        let s = slept.clone();
        let backend = LiveBackend::new("http://invalid", Credential::Fixed("secret".into()), transport.clone())
            .with_sleeper(move |d| s.lock().unwrap().push(d));
        (backend, transport, slept)
    }

    #[test]
    fn retries_transient_failures_with_backoff() {
        let (backend, transport, slept) = live(vec![Err("reset".into()), Ok(503), Ok(200)]);
        let res = backend.complete(&req("p", 0.0)).unwrap();
        assert_eq!(res.text, "ok");
        assert_eq!(res.backend, BackendKind::Live);
        assert_eq!(transport.calls.load(Ordering::SeqCst), 3);
        assert_eq!(*slept.lock().unwrap(), [Duration::from_millis(500), Duration::from_secs(1)]);
    }

    #[test]
    fn gives_up_after_retries() {
        let (backend, transport, slept) = live(vec![Ok(500)]);
        let err = backend.complete(&req("p", 0.0)).unwrap_err();
        assert!(matches!(err, GatewayError::TransportError { attempts: 4, .. }));
        assert_eq!(transport.calls.load(Ordering::SeqCst), 4);
        assert_eq!(
            *slept.lock().unwrap(),
            [Duration::from_millis(500), Duration::from_secs(1), Duration::from_secs(2)]
        );
    }

    #[test]
    fn client_errors_fail_immediately() {
        let (backend, transport, slept) = live(vec![Ok(401)]);
        let err = backend.complete(&req("p", 0.0)).unwrap_err();
        assert!(matches!(err, GatewayError::Rejected { status: 401, .. }));
        assert_eq!(transport.calls.load(Ordering::SeqCst), 1);
        assert!(slept.lock().unwrap().is_empty());
    }

    #[test]
    fn missing_credential_fails_before_network() {
        let transport = Arc::new(FakeTransport::new(vec![Ok(200)]));
        let backend = LiveBackend::new(
            "http://invalid",
            Credential::Env("SIGSYNTH_TEST_SURELY_UNSET_KEY".into()),
            transport.clone(),
        );
        let err = backend.complete(&req("p", 0.0)).unwrap_err();
        assert_eq!(err, GatewayError::AuthMissing { var: "SIGSYNTH_TEST_SURELY_UNSET_KEY".into() });
        assert_eq!(transport.calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn chat_body_shape() {
        let body: serde_json::Value = serde_json::from_str(&chat_request_body(&req("hello", 0.7))).unwrap();
        assert_eq!(
            body,
            serde_json::json!({
                "model": "gpt-4-turbo",
                "messages": [{"role": "user", "content": "hello"}],
                "temperature": 0.7,
                "max_tokens": 512
            })
        );
        assert!(parse_chat_response("{}").is_err());
    }
}
