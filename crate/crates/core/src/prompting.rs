//! Prompt construction: the task prompt and the per-stage PRE/POST envelopes.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::domain::{EnvironmentConfig, ValidatedProblemSpec};

/// Between envelope parts. Never trimmed, so the body is recoverable.
pub const SEPARATOR: &str = "\n\n";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PromptError {
    #[error("template set has no envelope for stage {0}")]
    UnknownStage(StageId),
    #[error("prompt body is empty")]
    EmptyBody,
    #[error("template {path}: {reason}")]
    Template { path: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StageId {
    TaskManager,
    #[serde(rename = "NLSS")]
    Nlss,
    #[serde(rename = "ObjVSS")]
    ObjVss,
    #[serde(rename = "InstVSS")]
    InstVss,
}

impl StageId {
    pub const ALL: [StageId; 4] = [Self::TaskManager, Self::Nlss, Self::ObjVss, Self::InstVss];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::TaskManager => "TaskManager",
            Self::Nlss => "NLSS",
            Self::ObjVss => "ObjVSS",
            Self::InstVss => "InstVSS",
        }
    }

    /// File stem under a template version directory.
    pub fn file_stem(&self) -> &'static str {
        match self {
            Self::TaskManager => "task_manager",
            Self::Nlss => "nlss",
            Self::ObjVss => "objvss",
            Self::InstVss => "instvss",
        }
    }
}

impl fmt::Display for StageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptEnvelope {
    pub stage: StageId,
    pub pre: String,
    pub post: String,
}

/// All four envelopes plus a version label.
///
/// The version is `<label>-<fingerprint>`, where the fingerprint hashes every
/// envelope text, so editing any template file changes the version and
/// invalidates fixtures recorded against the old wording.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    envelopes: BTreeMap<StageId, PromptEnvelope>,
    version: String,
}

impl TemplateSet {
    pub fn new(label: &str, envelopes: Vec<PromptEnvelope>) -> Result<Self, PromptError> {
        let mut map = BTreeMap::new();
        for env in envelopes {
            if env.pre.trim().is_empty() || env.post.trim().is_empty() {
                return Err(PromptError::Template {
                    path: env.stage.to_string(),
                    reason: "pre and post must be non-empty".into(),
                });
            }
            map.insert(env.stage, env);
        }
        if let Some(missing) = StageId::ALL.iter().find(|s| !map.contains_key(s)) {
            return Err(PromptError::UnknownStage(*missing));
        }
        let mut hasher = Sha256::new();
        for env in map.values() {
            for part in [env.stage.as_str(), &env.pre, &env.post] {
                hasher.update((part.len() as u64).to_le_bytes());
                hasher.update(part.as_bytes());
            }
        }
        let digest = hex::encode(hasher.finalize());
        Ok(Self {
            envelopes: map,
            version: format!("{label}-{}", &digest[..12]),
        })
    }

    /// Loads `<dir>/<stage>.pre.txt` and `<dir>/<stage>.post.txt` for every
    /// stage; the directory name becomes the version label.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, PromptError> {
        let dir = dir.as_ref();
        let label = dir
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("templates")
            .to_string();
        let read = |role: &str, stage: StageId| -> Result<String, PromptError> {
            let path = dir.join(format!("{}.{role}.txt", stage.file_stem()));
            let text = std::fs::read_to_string(&path).map_err(|e| PromptError::Template {
                path: path.display().to_string(),
                reason: e.to_string(),
            })?;
            Ok(text.trim_end_matches(['\n', '\r']).to_string())
        };
        let envelopes = StageId::ALL
            .iter()
            .map(|&stage| {
                Ok(PromptEnvelope {
                    stage,
                    pre: read("pre", stage)?,
                    post: read("post", stage)?,
                })
            })
            .collect::<Result<Vec<_>, PromptError>>()?;
        Self::new(&label, envelopes)
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn envelope(&self, stage: StageId) -> Result<&PromptEnvelope, PromptError> {
        self.envelopes.get(&stage).ok_or(PromptError::UnknownStage(stage))
    }
}

/// The task prompt handed to the task manager stage.
pub fn build_task_prompt(spec: &ValidatedProblemSpec, env: &EnvironmentConfig) -> String {
    format!(
        "The robot is assembling the structure \"{structure}\" and cannot place an object.\n\
         Object description: {desc}\n\
         Object color: {color}\n\
         Goal position (canvas cells): [{gx}, {gy}]\n\
         Goal orientation: {orientation}\n\
         Placing instruction: {instruction}\n\
         Canvas: {cw} x {ch} cells covering a {pw} m x {ph} m tabletop. Object icons are {edge} x {edge} cells.",
        structure = spec.structure,
        desc = spec.object_description,
        color = spec.object_color,
        gx = spec.goal_position.x,
        gy = spec.goal_position.y,
        orientation = spec.goal_orientation,
        instruction = spec.instruction,
        cw = env.canvas_width,
        ch = env.canvas_height,
        pw = env.physical_width,
        ph = env.physical_height,
        edge = env.icon_edge,
    )
}

pub fn render_envelope(
    stage: StageId,
    body: &str,
    templates: &TemplateSet,
) -> Result<String, PromptError> {
    if body.trim().is_empty() {
        return Err(PromptError::EmptyBody);
    }
    let env = templates.envelope(stage)?;
    let mut out = String::with_capacity(env.pre.len() + body.len() + env.post.len() + 4);
    out.push_str(&env.pre);
    out.push_str(SEPARATOR);
    out.push_str(body);
    out.push_str(SEPARATOR);
    out.push_str(&env.post);
    Ok(out)
}

/// Inverse of [`render_envelope`].
pub fn recover_body<'a>(stage: StageId, rendered: &'a str, templates: &TemplateSet) -> Option<&'a str> {
    let env = templates.envelope(stage).ok()?;
    rendered
        .strip_prefix(env.pre.as_str())?
        .strip_prefix(SEPARATOR)?
        .strip_suffix(env.post.as_str())?
        .strip_suffix(SEPARATOR)
}

#[cfg(test)]
pub(crate) fn workspace_templates() -> TemplateSet {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../templates/v1");
    TemplateSet::load_dir(dir).expect("workspace templates")
}
