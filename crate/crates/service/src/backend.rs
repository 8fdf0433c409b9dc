//! Backend construction and the blocking HTTP transport for live calls.

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use sigsynth_core::gateway::{
    record_fixture, CompletionBackend, CompletionRequest, CompletionResult, Credential, FixtureBackend,
    FixtureStore, GatewayError, HttpResponse, HttpTransport, LiveBackend, RetryPolicy,
};
use sigsynth_core::pipeline::Synthesizer;
use sigsynth_core::prompting::TemplateSet;
use sigsynth_core::scripted::ScriptedBackend;

use crate::config::{BackendSpec, ServiceConfig};
use crate::ServiceError;

/// `HttpTransport` over a pooled ureq agent. Non-2xx statuses are returned
/// as responses so the gateway can classify them.
pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new() -> Self {
        let agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Self { agent }
    }
}

impl Default for UreqTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl HttpTransport for UreqTransport {
    fn post_json(&self, url: &str, bearer: &str, body: &str, timeout: Duration) -> Result<HttpResponse, String> {
        let mut res = self
            .agent
            .post(url)
            .config()
            .timeout_global(Some(timeout))
            .build()
            .header("Authorization", &format!("Bearer {bearer}"))
            .header("Content-Type", "application/json")
            .send(body)
            .map_err(|e| e.to_string())?;
        let status = res.status().as_u16();
        let body = res.body_mut().read_to_string().map_err(|e| e.to_string())?;
        Ok(HttpResponse { status, body })
    }
}

fn retry_policy(max_retries: u32) -> RetryPolicy {
    RetryPolicy { max_retries, ..RetryPolicy::default() }
}

pub fn live_backend(cfg: &ServiceConfig) -> LiveBackend<UreqTransport> {
    LiveBackend::new(cfg.endpoint.clone(), Credential::Env(cfg.api_key_env.clone()), UreqTransport::new())
        .with_timeout(cfg.timeout())
        .with_retry(retry_policy(cfg.max_retries))
}

/// Opens a fixture file for replay. A missing file is an error here, unlike
/// recording where it is created on first write.
pub fn open_fixtures(path: &Path) -> Result<Arc<FixtureStore>, ServiceError> {
    if !path.is_file() {
        return Err(ServiceError::Config(format!("fixture file {} not found", path.display())));
    }
    Ok(Arc::new(FixtureStore::open(path)?))
}

pub fn build_backend(spec: &BackendSpec, cfg: &ServiceConfig) -> Result<Arc<dyn CompletionBackend>, ServiceError> {
    Ok(match spec {
        BackendSpec::Live => Arc::new(live_backend(cfg)),
        BackendSpec::Scripted => Arc::new(ScriptedBackend::new(cfg.environment_config()?)),
        BackendSpec::Fixture(path) => {
            let path = path.as_deref().unwrap_or(&cfg.fixture_path);
            Arc::new(FixtureBackend::new(open_fixtures(path)?))
        }
    })
}

pub fn build_synthesizer(cfg: &ServiceConfig, backend: Arc<dyn CompletionBackend>) -> Result<Synthesizer, ServiceError> {
    let templates = TemplateSet::load_dir(&cfg.template_dir)?;
    Ok(Synthesizer::new(backend, templates, cfg.environment_config()?)
        .with_model(cfg.model_id.clone())
        .with_max_tokens(cfg.max_tokens))
}

/// Replays keys already in the store and records the rest from `inner`, so
/// re-running a recording session only pays for missing prompts.
pub struct FillingBackend<B> {
    inner: B,
    store: Arc<FixtureStore>,
    recorded: std::sync::atomic::AtomicUsize,
}

impl<B: CompletionBackend> FillingBackend<B> {
    pub fn new(inner: B, store: Arc<FixtureStore>) -> Self {
        Self { inner, store, recorded: std::sync::atomic::AtomicUsize::new(0) }
    }

    /// Number of responses recorded so far.
    pub fn recorded(&self) -> usize {
        self.recorded.load(std::sync::atomic::Ordering::Relaxed)
    }
}

impl<B: CompletionBackend> CompletionBackend for FillingBackend<B> {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResult, GatewayError> {
        if self.store.get(&req.fixture_key()).is_some() {
            return FixtureBackend::new(self.store.clone()).complete(req);
        }
        let res = self.inner.complete(req)?;
        record_fixture(req, &res, &self.store)?;
        self.recorded.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        Ok(res)
    }
}
