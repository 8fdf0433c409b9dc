//! End-to-end synthesis: task manager, then the three sub-stages fanned out
//! concurrently, then the compositor.

use std::sync::Arc;
#[cfg(not(target_arch = "wasm32"))]
use std::thread;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::composer::{compose_signal, ComposeError, CompositeSignal, Provenance};
use crate::domain::{validate_problem_spec, DomainError, EnvironmentConfig, ProblemSpec, SignalModality};
use crate::extraction::{
    extract_bullets, extract_instruction_plan_reported, extract_svg_block_reported, split_task_manager, ExtractionError,
    InstructionPlan,
};
use crate::gateway::{CompletionBackend, CompletionRequest, GatewayError};
use crate::metrics::Rating;
use crate::prompting::{build_task_prompt, render_envelope, PromptError, StageId, TemplateSet};
use crate::svg::{parse_svg, sanitize, SanitizePolicy, SvgDoc, SvgError};

pub const DEFAULT_MODEL_ID: &str = "gpt-4-turbo";
pub const DEFAULT_MAX_TOKENS: u32 = 2048;
pub const DEFAULT_TEMPERATURE: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PipelineStage {
    TaskManager,
    #[serde(rename = "NLSS")]
    Nlss,
    #[serde(rename = "ObjVSS")]
    ObjVss,
    #[serde(rename = "InstVSS")]
    InstVss,
    /// The compositor.
    Sigma,
}

impl PipelineStage {
    pub fn as_str(&self) -> &'static str {
        match self {
            PipelineStage::TaskManager => "TaskManager",
            PipelineStage::Nlss => "NLSS",
            PipelineStage::ObjVss => "ObjVSS",
            PipelineStage::InstVss => "InstVSS",
            PipelineStage::Sigma => "Sigma",
        }
    }
}

impl From<StageId> for PipelineStage {
    fn from(s: StageId) -> Self {
        match s {
            StageId::TaskManager => PipelineStage::TaskManager,
            StageId::Nlss => PipelineStage::Nlss,
            StageId::ObjVss => PipelineStage::ObjVss,
            StageId::InstVss => PipelineStage::InstVss,
        }
    }
}

impl std::fmt::Display for PipelineStage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StageCause {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Extraction(#[from] ExtractionError),
    #[error(transparent)]
    Svg(#[from] SvgError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("invalid problem spec: {0}")]
    InvalidSpec(#[from] DomainError),
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error("stage {stage} failed: {cause}")]
    StageFailed { stage: PipelineStage, cause: StageCause, partial: Box<SignalBundle> },
}

impl PipelineError {
    pub fn is_fixture_miss(&self) -> bool {
        matches!(self, PipelineError::StageFailed { cause: StageCause::Gateway(GatewayError::FixtureMiss { .. }), .. })
    }

    pub fn partial(&self) -> Option<&SignalBundle> {
        match self {
            PipelineError::StageFailed { partial, .. } => Some(partial),
            _ => None,
        }
    }
}

/// Recorded on bundles persisted after a failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: PipelineStage,
    pub message: String,
}

mod svg_text {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::svg::{self, parse_svg, SvgDoc};

    pub fn serialize<S: Serializer>(doc: &Option<SvgDoc>, s: S) -> Result<S::Ok, S::Error> {
        doc.as_ref().map(|d| svg::serialize(d).0).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<SvgDoc>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|text| parse_svg(&text.into()).map_err(serde::de::Error::custom))
            .transpose()
    }
}

/// A synthesis result. SVG documents serialize as SVG text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalBundle {
    pub id: String,
    pub spec: ProblemSpec,
    pub modality: SignalModality,
    pub temperature: f64,
    pub bullets: Vec<String>,
    #[serde(with = "svg_text", default)]
    pub icon: Option<SvgDoc>,
    #[serde(default)]
    pub plan: Option<InstructionPlan>,
    /// Present for visual modalities.
    #[serde(default)]
    pub composite: Option<CompositeSignal>,
    pub created_at: DateTime<Utc>,
    pub provenance: Provenance,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default)]
    pub failure: Option<StageFailure>,
}

impl SignalBundle {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
            && self.bullets.len() == 4
            && (!self.modality.is_visual() || (self.icon.is_some() && self.plan.is_some() && self.composite.is_some()))
    }
}

/// Content hash of everything that determines a synthesis on a fixed
/// backend.
pub fn bundle_id(spec: &ProblemSpec, modality: SignalModality, temperature: f64, template_version: &str) -> String {
    let canonical =
        serde_json::to_string(&(spec, modality, temperature, template_version)).expect("spec serializes");
    hex::encode(&Sha256::digest(canonical.as_bytes())[..16])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    /// Opaque; never a real name.
    pub participant_label: String,
    pub trials: Vec<crate::metrics::TrialOutcome>,
    pub ratings: Vec<Rating>,
}

pub struct Synthesizer {
    backend: Arc<dyn CompletionBackend>,
    templates: TemplateSet,
    env: EnvironmentConfig,
    model_id: String,
    max_tokens: u32,
}

type StageResult<T> = Result<T, (PipelineStage, StageCause)>;

impl Synthesizer {
    pub fn new(backend: Arc<dyn CompletionBackend>, templates: TemplateSet, env: EnvironmentConfig) -> Self {
        Self { backend, templates, env, model_id: DEFAULT_MODEL_ID.into(), max_tokens: DEFAULT_MAX_TOKENS }
    }

    pub fn with_model(mut self, model_id: impl Into<String>) -> Self {
        self.model_id = model_id.into();
        self
    }

    pub fn with_max_tokens(mut self, max_tokens: u32) -> Self {
        self.max_tokens = max_tokens;
        self
    }

    pub fn env(&self) -> &EnvironmentConfig {
        &self.env
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    fn request(&self, stage: StageId, body: &str, temperature: f64) -> Result<CompletionRequest, StageCause> {
        Ok(CompletionRequest {
            stage,
            template_version: self.templates.version().to_string(),
            prompt: render_envelope(stage, body, &self.templates)?,
            temperature,
            model_id: self.model_id.clone(),
            max_tokens: self.max_tokens,
        })
    }

    /// Runs one model call; returns the reply text and the fixture key.
    fn call(&self, stage: StageId, body: &str, temperature: f64) -> StageResult<(String, String)> {
        let fail = |c: StageCause| (PipelineStage::from(stage), c);
        let req = self.request(stage, body, temperature).map_err(fail)?;
        let key = req.fixture_key();
        let reply = self.backend.complete(&req).map_err(|e| fail(e.into()))?;
        Ok((reply.text, key))
    }

    pub fn synthesize(
        &self,
        spec: ProblemSpec,
        modality: SignalModality,
        temperature: f64,
    ) -> Result<SignalBundle, PipelineError> {
        if !(0.0..=2.0).contains(&temperature) {
            return Err(PipelineError::InvalidOptions(format!("temperature {temperature} outside [0, 2]")));
        }
        let spec = validate_problem_spec(spec, &self.env)?;
        let mut bundle = SignalBundle {
            id: bundle_id(&spec, modality, temperature, self.templates.version()),
            spec: spec.clone().into_inner(),
            modality,
            temperature,
            bullets: Vec::new(),
            icon: None,
            plan: None,
            composite: None,
            created_at: Utc::now(),
            provenance: Provenance {
                template_version: self.templates.version().to_string(),
                model_id: self.model_id.clone(),
                temperature,
                fixture_keys: Vec::new(),
            },
            warnings: Vec::new(),
            failure: None,
        };
        let failed = |mut bundle: SignalBundle, (stage, cause): (PipelineStage, StageCause)| {
            bundle.failure = Some(StageFailure { stage, message: cause.to_string() });
            PipelineError::StageFailed { stage, cause, partial: Box::new(bundle) }
        };

        let task = build_task_prompt(&spec, &self.env);
        let split = match self.call(StageId::TaskManager, &task, temperature).and_then(|(text, key)| {
            bundle.provenance.fixture_keys.push(key);
            split_task_manager(&text).map_err(|e| (PipelineStage::TaskManager, e.into()))
        }) {
            Ok(s) => s,
            Err(e) => return Err(failed(bundle, e)),
        };

        let nlss = || -> StageResult<(Vec<String>, String)> {
            let (text, key) = self.call(StageId::Nlss, &split.nlss_prompt, temperature)?;
            let bullets = extract_bullets(&text).map_err(|e| (PipelineStage::Nlss, e.into()))?;
            Ok((bullets, key))
        };
        let objvss = || -> StageResult<(SvgDoc, Vec<String>, String)> {
            let fail = |c: StageCause| (PipelineStage::ObjVss, c);
            let (text, key) = self.call(StageId::ObjVss, &split.objvss_prompt, temperature)?;
            let (source, report) = extract_svg_block_reported(&text).map_err(|e| fail(e.into()))?;
            let doc = parse_svg(&source).map_err(|e| fail(e.into()))?;
            Ok((sanitize(&doc, &SanitizePolicy::default()), report.warnings, key))
        };
        let instvss = || -> StageResult<(InstructionPlan, Vec<String>, String)> {
            let (text, key) = self.call(StageId::InstVss, &split.instvss_prompt, temperature)?;
            let (plan, report) =
                extract_instruction_plan_reported(&text, &self.env).map_err(|e| (PipelineStage::InstVss, e.into()))?;
            Ok((plan, report.warnings, key))
        };

        if !modality.is_visual() {
            return match nlss() {
                Ok((bullets, key)) => {
                    bundle.bullets = bullets;
                    bundle.provenance.fixture_keys.push(key);
                    Ok(bundle)
                }
                Err(e) => Err(failed(bundle, e)),
            };
        }

        // the three sub-stages only read the split; join before composing
        #[cfg(not(target_arch = "wasm32"))]
        let (n, o, i) = thread::scope(|s| {
            let o = s.spawn(objvss);
            let i = s.spawn(instvss);
            let n = nlss();
            (n, o.join().expect("ObjVSS worker panicked"), i.join().expect("InstVSS worker panicked"))
        });
        // no threads in the browser
        #[cfg(target_arch = "wasm32")]
        let (n, o, i) = (nlss(), objvss(), instvss());
        let mut first_err = None;
        match n {
            Ok((bullets, key)) => {
                bundle.bullets = bullets;
                bundle.provenance.fixture_keys.push(key);
            }
            Err(e) => first_err = first_err.or(Some(e)),
        }
        match o {
            Ok((icon, warnings, key)) => {
                bundle.icon = Some(icon);
                bundle.warnings.extend(warnings.into_iter().map(|w| format!("ObjVSS: {w}")));
                bundle.provenance.fixture_keys.push(key);
            }
            Err(e) => first_err = first_err.or(Some(e)),
        }
        match i {
            Ok((plan, warnings, key)) => {
                bundle.plan = Some(plan);
                bundle.warnings.extend(warnings.into_iter().map(|w| format!("InstVSS: {w}")));
                bundle.provenance.fixture_keys.push(key);
            }
            Err(e) => first_err = first_err.or(Some(e)),
        }
        if let Some(e) = first_err {
            return Err(failed(bundle, e));
        }

        let (Some(icon), Some(plan)) = (&bundle.icon, &bundle.plan) else {
            unreachable!("sub-stage results present when no error was recorded")
        };
        match compose_signal(icon, plan, &self.env) {
            Ok(mut composite) => {
                composite.provenance = bundle.provenance.clone();
                bundle.composite = Some(composite);
                Ok(bundle)
            }
            Err(e) => Err(failed(bundle, (PipelineStage::Sigma, e.into()))),
        }
    }

    /// One result per row, in input order.
    pub fn run_test_set(
        &self,
        rows: &[ProblemSpec],
        modality: SignalModality,
        temperature: f64,
    ) -> Vec<Result<SignalBundle, PipelineError>> {
        rows.iter().map(|spec| self.synthesize(spec.clone(), modality, temperature)).collect()
    }
}
