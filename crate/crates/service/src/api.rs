//! HTTP JSON API. Synthesis and rendering are CPU or network bound and run
//! on the blocking pool; handlers only translate errors to status codes.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sigsynth_core::composer::{map_doc_to_display, map_to_display, nls_card, Calibration, DisplayFrame, DisplayTarget};
use sigsynth_core::domain::{EnvironmentConfig, ProblemSpec, SignalModality};
use sigsynth_core::metrics::{rating_summary, MeanSd, Rating, RatingScale, RATING_MAX, RATING_MIN};
use sigsynth_core::pipeline::{PipelineError, SignalBundle, Synthesizer, DEFAULT_TEMPERATURE};
use tower_http::services::ServeDir;

use crate::store::{BundleSummary, SignalStore};
use crate::table::{run_testset, TestSetReport};
use crate::ServiceError;

pub const DEFAULT_LIST_LIMIT: usize = 50;
pub const MAX_LIST_LIMIT: usize = 500;

pub struct AppState {
    pub synth: Arc<Synthesizer>,
    pub store: Arc<SignalStore>,
    pub table: Arc<Vec<ProblemSpec>>,
    /// Used for `target=projector`.
    pub projector: Calibration,
    /// Label reported by /healthz.
    pub backend: String,
    pub ui_dir: Option<PathBuf>,
}

impl AppState {
    /// Identity projector calibration sized to the canvas.
    pub fn identity_projector(env: &EnvironmentConfig) -> Calibration {
        Calibration::identity(DisplayTarget::Projector { width: env.canvas_width, height: env.canvas_height })
    }
}

pub fn router(state: AppState) -> Router {
    let ui_dir = state.ui_dir.clone();
    let mut app = Router::new()
        .route("/healthz", get(healthz))
        .route("/v1/signals", post(create_signal).get(list_signals))
        .route("/v1/signals/{id}", get(get_signal))
        .route("/v1/signals/{id}/raster.png", get(get_raster))
        .route("/v1/signals/{id}/ratings", post(post_rating).get(get_ratings))
        .route("/v1/testset/run", get(run_testset_handler))
        .with_state(Arc::new(state));
    if let Some(dir) = ui_dir {
        app = app.nest_service("/ui", ServeDir::new(dir).append_index_html_on_directories(true));
    }
    app
}

// ---------------------------------------------------------------------------
// Errors

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: serde_json::Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, body: json!({ "error": message.into() }) }
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("signal {id} not found"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let status = match &e {
            ServiceError::Domain(_) | ServiceError::Metrics(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Pipeline(p) => return pipeline_error(p),
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::new(e.status(), e.body_text())
    }
}

fn pipeline_error(e: &PipelineError) -> ApiError {
    match e {
        PipelineError::InvalidSpec(_) | PipelineError::InvalidOptions(_) => {
            ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string())
        }
        PipelineError::StageFailed { stage, partial, .. } => ApiError {
            status: StatusCode::BAD_GATEWAY,
            body: json!({
                "error": e.to_string(),
                "stage": stage.as_str(),
                "fixture_miss": e.is_fixture_miss(),
                "partial_id": partial.id,
            }),
        },
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(ApiError::from)
}

// ---------------------------------------------------------------------------
// Handlers

async fn healthz(State(st): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(json!({
        "status": "ok",
        "backend": st.backend,
        "model_id": st.synth.model_id(),
        "template_version": st.synth.templates().version(),
        "testset_rows": st.table.len(),
    }))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthRequest {
    pub spec: ProblemSpec,
    pub modality: SignalModality,
    pub temperature: Option<f64>,
}

/// Persists the bundle on success and the partial bundle on stage failure.
async fn create_signal(
    State(st): State<Arc<AppState>>,
    body: Result<Json<SynthRequest>, JsonRejection>,
) -> Result<Json<SignalBundle>, ApiError> {
    let Json(req) = body?;
    let bundle = blocking(move || {
        let temperature = req.temperature.unwrap_or(DEFAULT_TEMPERATURE);
        match st.synth.synthesize(req.spec, req.modality, temperature) {
            Ok(b) => {
                st.store.put_bundle(&b)?;
                Ok(b)
            }
            Err(e) => {
                if let Some(p) = e.partial() {
                    st.store.put_bundle(p)?;
                }
                Err(e.into())
            }
        }
    })
    .await?;
    Ok(Json(bundle))
}

#[derive(Debug, Deserialize)]
struct ListQuery {
    limit: Option<usize>,
}

async fn list_signals(
    State(st): State<Arc<AppState>>,
    Query(q): Query<ListQuery>,
) -> Result<Json<Vec<BundleSummary>>, ApiError> {
    let limit = q.limit.unwrap_or(DEFAULT_LIST_LIMIT).min(MAX_LIST_LIMIT);
    Ok(Json(blocking(move || st.store.list(limit)).await?))
}

async fn get_signal(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<SignalBundle>, ApiError> {
    let key = id.clone();
    blocking(move || st.store.get_bundle(&key)).await?.map(Json).ok_or_else(|| ApiError::not_found(&id))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    Monitor,
    Projector,
}

#[derive(Debug, Deserialize)]
struct RasterQuery {
    target: Option<TargetKind>,
    width: Option<u32>,
    height: Option<u32>,
}

/// Display image for a bundle. Visual bundles map their composite; NLS
/// bundles render their text card.
pub fn render_bundle(bundle: &SignalBundle, env: &EnvironmentConfig, cal: &Calibration) -> Result<DisplayFrame, ServiceError> {
    if let Some(sig) = &bundle.composite {
        return Ok(map_to_display(sig, cal)?);
    }
    if bundle.modality.is_visual() || bundle.bullets.is_empty() {
        return Err(ServiceError::Config(format!("bundle {} has nothing to render", bundle.id)));
    }
    let (doc, lines) = nls_card(&bundle.bullets, env)?;
    let mut frame = map_doc_to_display(&doc, cal)?;
    frame.lines = lines;
    Ok(frame)
}

async fn get_raster(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<RasterQuery>,
) -> Result<Response, ApiError> {
    let env = st.synth.env();
    let cal = match q.target.unwrap_or(TargetKind::Monitor) {
        TargetKind::Projector => st.projector,
        TargetKind::Monitor => Calibration::identity(DisplayTarget::Monitor {
            width: q.width.unwrap_or(env.canvas_width),
            height: q.height.unwrap_or(env.canvas_height),
        }),
    };
    cal.check().map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    let bundle = {
        let st = st.clone();
        let key = id.clone();
        blocking(move || st.store.get_bundle(&key)).await?.ok_or_else(|| ApiError::not_found(&id))?
    };
    if bundle.modality.is_visual() && bundle.composite.is_none() {
        return Err(ApiError::new(StatusCode::CONFLICT, format!("signal {id} has no composite")));
    }
    let png = blocking(move || Ok(render_bundle(&bundle, st.synth.env(), &cal)?.image.to_png()?)).await?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatingRequest {
    pub scale: RatingScale,
    pub value: i64,
    pub session_id: Option<String>,
    pub participant_label: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatingAck {
    pub signal_id: String,
    pub scale: RatingScale,
    pub value: i8,
    /// Ratings stored for this signal, including this one.
    pub count: usize,
}

async fn post_rating(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<RatingRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<RatingAck>), ApiError> {
    let Json(req) = body?;
    let rating = Rating::new(id.clone(), req.scale, req.value).map_err(|_| {
        ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("rating {} outside [{RATING_MIN}, {RATING_MAX}]", req.value),
        )
    })?;
    let ack = blocking(move || {
        if !st.store.contains(&rating.signal_id)? {
            return Ok(None);
        }
        let count = st.store.add_rating(&rating)?;
        if let Some(session) = req.session_id.as_deref().filter(|s| !s.trim().is_empty()) {
            st.store.add_session_rating(session, req.participant_label.as_deref().unwrap_or(""), &rating)?;
        }
        Ok(Some(RatingAck { signal_id: rating.signal_id, scale: rating.scale, value: rating.value, count }))
    })
    .await?
    .ok_or_else(|| ApiError::not_found(&id))?;
    Ok((StatusCode::CREATED, Json(ack)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatingsView {
    pub ratings: Vec<Rating>,
    /// Mean and sample SD per scale that has ratings.
    pub summary: BTreeMap<String, MeanSd>,
}

async fn get_ratings(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<RatingsView>, ApiError> {
    let key = id.clone();
    let ratings = blocking(move || {
        if !st.store.contains(&key)? {
            return Ok(None);
        }
        st.store.ratings(&key).map(Some)
    })
    .await?
    .ok_or_else(|| ApiError::not_found(&id))?;
    let summary = [RatingScale::Sm4, RatingScale::Sm5, RatingScale::Sm6]
        .into_iter()
        .filter_map(|s| Some((scale_name(s).to_string(), rating_summary(&ratings, s)?)))
        .collect();
    Ok(Json(RatingsView { ratings, summary }))
}

fn scale_name(s: RatingScale) -> &'static str {
    match s {
        RatingScale::Sm4 => "SM4",
        RatingScale::Sm5 => "SM5",
        RatingScale::Sm6 => "SM6",
    }
}

#[derive(Debug, Deserialize)]
struct TestSetQuery {
    modality: Option<String>,
    temperature: Option<f64>,
}

/// Runs the configured table and persists every bundle it produced.
async fn run_testset_handler(
    State(st): State<Arc<AppState>>,
    Query(q): Query<TestSetQuery>,
) -> Result<Json<TestSetReport>, ApiError> {
    let modality: SignalModality = match q.modality.as_deref() {
        Some(m) => m.parse().map_err(|e: sigsynth_core::domain::DomainError| {
            ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string())
        })?,
        None => SignalModality::VsIntPro,
    };
    let temperature = q.temperature.unwrap_or(DEFAULT_TEMPERATURE);
    let report = blocking(move || {
        let report = run_testset(&st.synth, &st.table, modality, temperature);
        for b in report.bundles() {
            st.store.put_bundle(b)?;
        }
        Ok(report)
    })
    .await?;
    Ok(Json(report))
}
