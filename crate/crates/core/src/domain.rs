//! Problem and environment types shared across the pipeline.
//!
//! Canvas coordinates are integer cells with the origin at the top-left
//! corner and `y` growing downward, the same convention SVG uses, so no flip
//! is ever needed between canvas space and generated graphics.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("field `{0}` is empty")]
    EmptyField(&'static str),
    #[error("goal {0} lies outside the canvas")]
    GoalOutOfCanvas(CanvasPoint),
    #[error("cannot interpret orientation {0:?} locally")]
    UnparseableOrientation(String),
    #[error("unknown signal modality {0:?}")]
    UnknownModality(String),
    #[error("invalid environment config: {0}")]
    InvalidEnvironment(String),
}

/// A cell on the canvas grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CanvasPoint {
    pub x: i32,
    pub y: i32,
}

impl CanvasPoint {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }
}

impl fmt::Display for CanvasPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.x, self.y)
    }
}

/// A position on the physical tabletop, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalPoint {
    pub x: f64,
    pub y: f64,
}

impl PhysicalPoint {
    pub fn distance(&self, other: &PhysicalPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Workspace geometry. The default is a 1.4 m x 0.7 m table split into a
/// 1400 x 700 grid, so one cell is one millimeter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub canvas_width: u32,
    pub canvas_height: u32,
    #[serde(rename = "physical_width_m")]
    pub physical_width: f64,
    #[serde(rename = "physical_height_m")]
    pub physical_height: f64,
    pub icon_edge: u32,
    #[serde(rename = "placement_tolerance_m")]
    pub placement_tolerance: f64,
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        Self {
            canvas_width: 1400,
            canvas_height: 700,
            physical_width: 1.4,
            physical_height: 0.7,
            icon_edge: 210,
            placement_tolerance: 0.10,
        }
    }
}

impl EnvironmentConfig {
    /// Parses the `key = value` config format and checks invariants.
    pub fn from_str_config(text: &str) -> Result<Self, DomainError> {
        let env: EnvironmentConfig =
            toml::from_str(text).map_err(|e| DomainError::InvalidEnvironment(e.to_string()))?;
        env.check()?;
        Ok(env)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DomainError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| DomainError::InvalidEnvironment(e.to_string()))?;
        Self::from_str_config(&text)
    }

    pub fn check(&self) -> Result<(), DomainError> {
        if self.canvas_width == 0 || self.canvas_height == 0 {
            return Err(DomainError::InvalidEnvironment("canvas must be non-empty".into()));
        }
        if self.icon_edge == 0 {
            return Err(DomainError::InvalidEnvironment("icon_edge must be positive".into()));
        }
        if !(self.physical_width > 0.0 && self.physical_height > 0.0) {
            return Err(DomainError::InvalidEnvironment(
                "physical dimensions must be positive".into(),
            ));
        }
        if !(self.placement_tolerance >= 0.0) {
            return Err(DomainError::InvalidEnvironment(
                "placement tolerance must be non-negative".into(),
            ));
        }
        let px = self.physical_width / f64::from(self.canvas_width);
        let py = self.physical_height / f64::from(self.canvas_height);
        if ((px - py) / px).abs() > 1e-9 {
            return Err(DomainError::InvalidEnvironment(format!(
                "cell pitch differs between axes ({px} m vs {py} m)"
            )));
        }
        Ok(())
    }

    /// Meters per canvas cell.
    pub fn pitch(&self) -> f64 {
        self.physical_width / f64::from(self.canvas_width)
    }

    pub fn contains(&self, p: CanvasPoint) -> bool {
        p.x >= 0 && p.y >= 0 && (p.x as u32) < self.canvas_width && (p.y as u32) < self.canvas_height
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SignalModality {
    /// Text directives on a monitor.
    #[serde(rename = "NLS")]
    Nls,
    /// Visual signal on a monitor.
    #[serde(rename = "VSM")]
    Vsm,
    /// Visual signal projected onto the tabletop.
    #[serde(rename = "VSIntPro")]
    VsIntPro,
}

impl SignalModality {
    pub const ALL: [SignalModality; 3] = [Self::Nls, Self::Vsm, Self::VsIntPro];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Nls => "NLS",
            Self::Vsm => "VSM",
            Self::VsIntPro => "VSIntPro",
        }
    }

    pub fn is_visual(&self) -> bool {
        !matches!(self, Self::Nls)
    }
}

impl fmt::Display for SignalModality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SignalModality {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nls" => Ok(Self::Nls),
            "vsm" => Ok(Self::Vsm),
            "vsintpro" => Ok(Self::VsIntPro),
            _ => Err(DomainError::UnknownModality(s.to_string())),
        }
    }
}

/// The six-parameter teaming problem.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProblemSpec {
    /// Structure being assembled, e.g. "Z".
    pub structure: String,
    pub object_description: String,
    pub object_color: String,
    pub goal_position: CanvasPoint,
    /// Free-form; see [`normalize_orientation`].
    pub goal_orientation: String,
    /// Free-form placing instruction, e.g. "insert from right".
    pub instruction: String,
}

/// A [`ProblemSpec`] that passed [`validate_problem_spec`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct ValidatedProblemSpec(ProblemSpec);

impl ValidatedProblemSpec {
    pub fn into_inner(self) -> ProblemSpec {
        self.0
    }
}

impl std::ops::Deref for ValidatedProblemSpec {
    type Target = ProblemSpec;

    fn deref(&self) -> &ProblemSpec {
        &self.0
    }
}

pub fn validate_problem_spec(
    spec: ProblemSpec,
    env: &EnvironmentConfig,
) -> Result<ValidatedProblemSpec, DomainError> {
    fn trimmed(value: String, name: &'static str) -> Result<String, DomainError> {
        let t = value.trim();
        if t.is_empty() {
            return Err(DomainError::EmptyField(name));
        }
        Ok(if t.len() == value.len() { value } else { t.to_string() })
    }

    let spec = ProblemSpec {
        structure: trimmed(spec.structure, "structure")?,
        object_description: trimmed(spec.object_description, "object_description")?,
        object_color: trimmed(spec.object_color, "object_color")?,
        goal_position: spec.goal_position,
        goal_orientation: trimmed(spec.goal_orientation, "goal_orientation")?,
        instruction: trimmed(spec.instruction, "instruction")?,
    };
    if !env.contains(spec.goal_position) {
        return Err(DomainError::GoalOutOfCanvas(spec.goal_position));
    }
    Ok(ValidatedProblemSpec(spec))
}

pub fn canvas_to_physical(
    p: CanvasPoint,
    env: &EnvironmentConfig,
) -> Result<PhysicalPoint, DomainError> {
    if !env.contains(p) {
        return Err(DomainError::GoalOutOfCanvas(p));
    }
    let pitch = env.pitch();
    Ok(PhysicalPoint {
        x: f64::from(p.x) * pitch,
        y: f64::from(p.y) * pitch,
    })
}

fn orientation_patterns() -> &'static (Regex, Regex) {
    static PATTERNS: OnceLock<(Regex, Regex)> = OnceLock::new();
    PATTERNS.get_or_init(|| {
        let number = r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:e[+-]?\d+)?";
        let degrees = Regex::new(&format!(
            r"^(?P<n>{number})\s*(?:°|deg|degs|degree|degrees)?$"
        ))
        .expect("degree pattern");
        // k*pi/m with optional sign, coefficient, divisor and unit suffix
        let radians = Regex::new(&format!(
            r"^(?P<sign>[+-])?\s*(?P<k>{number})?\s*\*?\s*(?:pi|π)\s*(?:/\s*(?P<m>{number}))?\s*(?:rad|rads|radians)?$"
        ))
        .expect("radian pattern");
        (degrees, radians)
    })
}

/// Best-effort local reading of an orientation string as degrees clockwise
/// from the vertical axis. Strings this cannot read must go through the LLM.
pub fn normalize_orientation(text: &str) -> Result<f64, DomainError> {
    let t = text.trim().to_lowercase();
    if matches!(t.as_str(), "same" | "no change") {
        return Ok(0.0);
    }
    let (degrees, radians) = orientation_patterns();
    if let Some(c) = degrees.captures(&t) {
        if let Ok(v) = c["n"].parse::<f64>() {
            if v.is_finite() {
                return Ok(v);
            }
        }
    }
    if let Some(c) = radians.captures(&t) {
        let k = match c.name("k") {
            Some(k) => k.as_str().parse::<f64>().ok(),
            None => Some(1.0),
        };
        let m = match c.name("m") {
            Some(m) => m.as_str().parse::<f64>().ok(),
            None => Some(1.0),
        };
        if let (Some(k), Some(m)) = (k, m) {
            let sign = if c.name("sign").map(|s| s.as_str()) == Some("-") { -1.0 } else { 1.0 };
            let deg = sign * k * 180.0 / m;
            if deg.is_finite() && m != 0.0 {
                return Ok(deg);
            }
        }
    }
    Err(DomainError::UnparseableOrientation(text.to_string()))
}

/// Canonical rendering read back exactly by [`normalize_orientation`].
pub fn format_degrees(deg: f64) -> String {
    format!("{deg} deg")
}
