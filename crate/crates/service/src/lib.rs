//! Service layer for the signal synthesizer: configuration, backend wiring,
//! a durable signal store, the HTTP JSON API and test-set tables.

pub mod api;
pub mod backend;
pub mod config;
pub mod store;
pub mod table;

use sigsynth_core::composer::ComposeError;
use sigsynth_core::domain::DomainError;
use sigsynth_core::gateway::GatewayError;
use sigsynth_core::metrics::MetricsError;
use sigsynth_core::pipeline::PipelineError;
use sigsynth_core::prompting::PromptError;
use sigsynth_core::svg::SvgError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("config: {0}")]
    Config(String),
    #[error("store: {0}")]
    Store(String),
    #[error("table: {0}")]
    Table(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error(transparent)]
    Svg(#[from] SvgError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
