//! Service configuration file (TOML). Relative paths resolve against the
//! directory holding the file.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::Deserialize;
use sigsynth_core::domain::EnvironmentConfig;
use sigsynth_core::gateway::DEFAULT_API_KEY_ENV;
use sigsynth_core::pipeline::{DEFAULT_MAX_TOKENS, DEFAULT_MODEL_ID};

use crate::ServiceError;

pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";

/// Where completions come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    Live,
    /// Replay from a fixture file; `None` means the configured path.
    Fixture(Option<PathBuf>),
    /// Offline deterministic model stand-in.
    Scripted,
}

impl FromStr for BackendSpec {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "live" => Ok(Self::Live),
            "fixture" => Ok(Self::Fixture(None)),
            "scripted" => Ok(Self::Scripted),
            other => match other.strip_prefix("fixture:") {
                Some(p) if !p.is_empty() => Ok(Self::Fixture(Some(PathBuf::from(p)))),
                _ => Err(ServiceError::Config(format!(
                    "backend {other:?}: expected live, scripted, fixture or fixture:PATH"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceConfig {
    pub endpoint: String,
    pub model_id: String,
    pub template_dir: PathBuf,
    pub fixture_path: PathBuf,
    pub store_path: PathBuf,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub max_tokens: u32,
    /// live | scripted | fixture | fixture:PATH
    pub backend: String,
    /// Optional EnvironmentConfig file; defaults apply when absent.
    pub environment: Option<PathBuf>,
    /// Optional calibration file used for projector rasters.
    pub calibration: Option<PathBuf>,
    /// Test set CSV served by the testset endpoint.
    pub table: PathBuf,
    /// Static assets mounted under /ui.
    pub ui_dir: PathBuf,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            endpoint: DEFAULT_ENDPOINT.into(),
            model_id: DEFAULT_MODEL_ID.into(),
            template_dir: "templates/v1".into(),
            fixture_path: "fixtures/completions.jsonl".into(),
            store_path: "sigsynth.redb".into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            timeout_secs: 120,
            max_retries: 3,
            max_tokens: DEFAULT_MAX_TOKENS,
            backend: "fixture".into(),
            environment: None,
            calibration: None,
            table: "data/testset.csv".into(),
            ui_dir: "ui".into(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, ServiceError> {
        let mut cfg: ServiceConfig = toml::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))?;
        cfg.rebase(base);
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    fn rebase(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.template_dir);
        join(&mut self.fixture_path);
        join(&mut self.store_path);
        join(&mut self.table);
        join(&mut self.ui_dir);
        if let Some(p) = self.environment.as_mut() {
            join(p);
        }
        if let Some(p) = self.calibration.as_mut() {
            join(p);
        }
    }

    fn check(&self) -> Result<(), ServiceError> {
        if self.endpoint.trim().is_empty() || self.model_id.trim().is_empty() || self.api_key_env.trim().is_empty() {
            return Err(ServiceError::Config("endpoint, model_id and api_key_env must be non-empty".into()));
        }
        if self.timeout_secs == 0 {
            return Err(ServiceError::Config("timeout_secs must be positive".into()));
        }
        self.backend_spec()?;
        Ok(())
    }

    pub fn backend_spec(&self) -> Result<BackendSpec, ServiceError> {
        self.backend.parse()
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }

    pub fn environment_config(&self) -> Result<EnvironmentConfig, ServiceError> {
        match &self.environment {
            Some(p) => Ok(EnvironmentConfig::load(p)?),
            None => Ok(EnvironmentConfig::default()),
        }
    }
}
