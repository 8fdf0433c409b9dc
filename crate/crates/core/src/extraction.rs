//! Parsers for raw model replies. Every extractor is total: any input yields
//! a typed value or a typed error, never a panic. Nothing here repairs
//! malformed SVG; that is the SVG engine's job.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{CanvasPoint, EnvironmentConfig};
use crate::svg::{parse_svg, SvgError, SvgSource};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtractionError {
    #[error("reply is empty")]
    EmptyInput,
    #[error("section <{0}> not found")]
    MissingSection(&'static str),
    #[error("section <{0}> appears more than once")]
    DuplicateSection(&'static str),
    #[error("section <{0}> is empty")]
    EmptySection(&'static str),
    #[error("expected 4 bullets, found {0}")]
    WrongBulletCount(usize),
    #[error("no <svg> element in reply")]
    NoSvgFound,
    #[error("<svg> opened at byte {0} is never closed")]
    UnterminatedSvg(usize),
    #[error("field {0} not found")]
    MissingField(&'static str),
    #[error("field {name} has unusable value {value:?}")]
    InvalidField { name: &'static str, value: String },
    #[error("point {0} lies outside the canvas")]
    PointOutOfCanvas(CanvasPoint),
    #[error("start and goal are both {0}")]
    StartEqualsGoal(CanvasPoint),
    #[error("trajectory svg rejected: {0}")]
    TrajectoryInvalid(SvgError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskManagerSplit {
    pub nlss_prompt: String,
    pub objvss_prompt: String,
    pub instvss_prompt: String,
}

/// Parsed instruction reply. `start` is Γ, `goal` is Φ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionPlan {
    pub start: CanvasPoint,
    pub goal: CanvasPoint,
    /// Clockwise from the vertical axis.
    pub orientation_deg: f64,
    pub trajectory: SvgSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub warnings: Vec<String>,
    /// Byte range of the matched region in the source.
    pub source_span: (usize, usize),
}

const SECTIONS: [&str; 3] = ["NLSS", "OBJVSS", "INSTVSS"];

fn section_patterns() -> &'static [Regex; 3] {
    static P: OnceLock<[Regex; 3]> = OnceLock::new();
    P.get_or_init(|| {
        SECTIONS.map(|tag| Regex::new(&format!(r"(?is)<\s*{tag}\s*>(.*?)<\s*/\s*{tag}\s*>")).expect("section pattern"))
    })
}

fn non_empty(text: &str) -> Result<(), ExtractionError> {
    if text.trim().is_empty() {
        Err(ExtractionError::EmptyInput)
    } else {
        Ok(())
    }
}

pub fn split_task_manager(text: &str) -> Result<TaskManagerSplit, ExtractionError> {
    non_empty(text)?;
    let mut parts = Vec::with_capacity(3);
    for (tag, re) in SECTIONS.iter().zip(section_patterns()) {
        let mut it = re.captures_iter(text);
        let first = it.next().ok_or(ExtractionError::MissingSection(tag))?;
        if it.next().is_some() {
            return Err(ExtractionError::DuplicateSection(tag));
        }
        let body = first[1].trim();
        if body.is_empty() {
            return Err(ExtractionError::EmptySection(tag));
        }
        parts.push(body.to_string());
    }
    let instvss_prompt = parts.pop().unwrap_or_default();
    let objvss_prompt = parts.pop().unwrap_or_default();
    let nlss_prompt = parts.pop().unwrap_or_default();
    Ok(TaskManagerSplit { nlss_prompt, objvss_prompt, instvss_prompt })
}

/// Canonical tagged form read back by [`split_task_manager`].
pub fn render_task_manager(split: &TaskManagerSplit) -> String {
    format!(
        "<NLSS>\n{}\n</NLSS>\n<OBJVSS>\n{}\n</OBJVSS>\n<INSTVSS>\n{}\n</INSTVSS>\n",
        split.nlss_prompt, split.objvss_prompt, split.instvss_prompt
    )
}

fn bullet_pattern() -> &'static Regex {
    static P: OnceLock<Regex> = OnceLock::new();
    P.get_or_init(|| Regex::new(r"^\s*(?:[-*•]|\d{1,2}[.)])[ \t]+(\S.*?)\s*$").expect("bullet pattern"))
}

/// Exactly four bullet bodies. Lines without a marker are ignored.
pub fn extract_bullets(text: &str) -> Result<Vec<String>, ExtractionError> {
    non_empty(text)?;
    let bullets: Vec<String> =
        text.lines().filter_map(|l| bullet_pattern().captures(l)).map(|c| c[1].to_string()).collect();
    if bullets.len() != 4 {
        return Err(ExtractionError::WrongBulletCount(bullets.len()));
    }
    Ok(bullets)
}

/// Byte offset of the next `<svg` tag start at or after `from`.
fn find_open(lower: &[u8], from: usize) -> Option<usize> {
    let mut i = from;
    while i + 4 <= lower.len() {
        let at = i + lower[i..].windows(4).position(|w| w == b"<svg")?;
        match lower.get(at + 4) {
            Some(c) if c.is_ascii_whitespace() || *c == b'>' || *c == b'/' => return Some(at),
            _ => i = at + 4,
        }
    }
    None
}

/// End (exclusive) of the tag starting at `start`, and whether it self-closes.
fn tag_end(bytes: &[u8], start: usize) -> Option<(usize, bool)> {
    let mut quote = None;
    for (k, &c) in bytes[start..].iter().enumerate() {
        match (quote, c) {
            (Some(q), c) if c == q => quote = None,
            (Some(_), _) => {}
            (None, b'"' | b'\'') => quote = Some(c),
            (None, b'>') => return Some((start + k + 1, k > 0 && bytes[start + k - 1] == b'/')),
            _ => {}
        }
    }
    None
}

/// End (exclusive) of the element opened at `start`, matching nested
/// `<svg>` pairs.
fn block_end(lower: &[u8], start: usize) -> Result<usize, ExtractionError> {
    let mut depth = 0usize;
    let mut i = start;
    loop {
        let next_open = find_open(lower, i);
        let next_close = lower[i..].windows(6).position(|w| w == b"</svg>").map(|p| p + i);
        match (next_open, next_close) {
            (Some(o), c) if c.is_none_or(|c| o < c) => {
                let (end, self_closing) = tag_end(lower, o).ok_or(ExtractionError::UnterminatedSvg(start))?;
                if !self_closing {
                    depth += 1;
                }
                i = end;
            }
            (_, Some(c)) => {
                depth = depth.saturating_sub(1);
                i = c + 6;
                if depth == 0 {
                    return Ok(i);
                }
            }
            (_, None) => return Err(ExtractionError::UnterminatedSvg(start)),
        }
    }
}

/// First complete `<svg …>…</svg>` block, with its span and warnings.
pub fn extract_svg_block_reported(text: &str) -> Result<(SvgSource, ExtractionReport), ExtractionError> {
    non_empty(text)?;
    let lower = text.to_ascii_lowercase().into_bytes();
    let mut report = ExtractionReport::default();
    let mut from = 0;
    loop {
        let start = find_open(&lower, from).ok_or(ExtractionError::NoSvgFound)?;
        let (open_end, self_closing) = tag_end(&lower, start).ok_or(ExtractionError::UnterminatedSvg(start))?;
        if self_closing {
            report.warnings.push(format!("skipped self-closing <svg/> at byte {start}"));
            from = open_end;
            continue;
        }
        let end = block_end(&lower, start)?;
        if find_open(&lower, end).is_some() {
            report.warnings.push("reply contains more than one <svg> block; using the first".into());
        }
        report.source_span = (start, end);
        return Ok((SvgSource(text[start..end].to_string()), report));
    }
}

pub fn extract_svg_block(text: &str) -> Result<SvgSource, ExtractionError> {
    extract_svg_block_reported(text).map(|(s, _)| s)
}

struct FieldPatterns {
    start: Regex,
    goal: Regex,
    orientation: Regex,
}

fn field_patterns() -> &'static FieldPatterns {
    static P: OnceLock<FieldPatterns> = OnceLock::new();
    P.get_or_init(|| {
        let point = |label: &str| {
            Regex::new(&format!(r"(?im)\b{label}\s*[:=]\s*\[?\s*([+-]?[\d.]+)\s*,\s*([+-]?[\d.]+)\s*\]?")).expect("point pattern")
        };
        FieldPatterns {
            start: point("START"),
            goal: point("GOAL"),
            orientation: Regex::new(r"(?im)\bORIENTATION_DEG\s*[:=]\s*([+-]?[\d.]+(?:e[+-]?\d+)?)").expect("orientation pattern"),
        }
    })
}

fn point_field(
    re: &Regex,
    name: &'static str,
    text: &str,
    env: &EnvironmentConfig,
    report: &mut ExtractionReport,
) -> Result<CanvasPoint, ExtractionError> {
    let mut it = re.captures_iter(text);
    let c = it.next().ok_or(ExtractionError::MissingField(name))?;
    if it.next().is_some() {
        report.warnings.push(format!("{name} given more than once; using the first"));
    }
    let coord = |s: &str| -> Result<i32, ExtractionError> {
        let invalid = || ExtractionError::InvalidField { name, value: c[0].to_string() };
        let v: f64 = s.parse().map_err(|_| invalid())?;
        if !v.is_finite() || v.fract() != 0.0 || v.abs() > f64::from(i32::MAX) {
            return Err(invalid());
        }
        Ok(v as i32)
    };
    let p = CanvasPoint::new(coord(&c[1])?, coord(&c[2])?);
    if !env.contains(p) {
        return Err(ExtractionError::PointOutOfCanvas(p));
    }
    Ok(p)
}

pub fn extract_instruction_plan_reported(
    text: &str,
    env: &EnvironmentConfig,
) -> Result<(InstructionPlan, ExtractionReport), ExtractionError> {
    non_empty(text)?;
    let svg = extract_svg_block_reported(text);
    // labels are only read outside the graphic
    let (prose, mut report) = match &svg {
        Ok((_, r)) => (format!("{}\n{}", &text[..r.source_span.0], &text[r.source_span.1..]), r.clone()),
        Err(_) => (text.to_string(), ExtractionReport::default()),
    };
    let p = field_patterns();
    let start = point_field(&p.start, "START", &prose, env, &mut report)?;
    let goal = point_field(&p.goal, "GOAL", &prose, env, &mut report)?;
    let oc = p.orientation.captures(&prose).ok_or(ExtractionError::MissingField("ORIENTATION_DEG"))?;
    let orientation_deg: f64 = oc[1]
        .parse()
        .ok()
        .filter(|v: &f64| v.is_finite())
        .ok_or_else(|| ExtractionError::InvalidField { name: "ORIENTATION_DEG", value: oc[1].to_string() })?;
    if start == goal {
        return Err(ExtractionError::StartEqualsGoal(start));
    }
    let (trajectory, _) = svg?;
    parse_svg(&trajectory).map_err(ExtractionError::TrajectoryInvalid)?;
    Ok((InstructionPlan { start, goal, orientation_deg, trajectory }, report))
}

pub fn extract_instruction_plan(text: &str, env: &EnvironmentConfig) -> Result<InstructionPlan, ExtractionError> {
    extract_instruction_plan_reported(text, env).map(|(p, _)| p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svg::fixtures::ROBOT_ARM_ICON;
    use proptest::prelude::*;

    #[test]
    fn minimal_split() {
        let s = split_task_manager("<NLSS>a</NLSS><OBJVSS>b</OBJVSS><INSTVSS>c</INSTVSS>").unwrap();
        assert_eq!((s.nlss_prompt.as_str(), s.objvss_prompt.as_str(), s.instvss_prompt.as_str()), ("a", "b", "c"));
    }

    #[test]
    fn split_errors() {
        assert_eq!(
            split_task_manager("<NLSS>a</NLSS><OBJVSS>b</OBJVSS>"),
            Err(ExtractionError::MissingSection("INSTVSS"))
        );
        assert_eq!(
            split_task_manager("<nlss>a</nlss><NLSS>x</NLSS><OBJVSS>b</OBJVSS><INSTVSS>c</INSTVSS>"),
            Err(ExtractionError::DuplicateSection("NLSS"))
        );
        assert_eq!(
            split_task_manager("<NLSS> </NLSS><OBJVSS>b</OBJVSS><INSTVSS>c</INSTVSS>"),
            Err(ExtractionError::EmptySection("NLSS"))
        );
        assert_eq!(split_task_manager("  \n"), Err(ExtractionError::EmptyInput));
    }

    #[test]
    fn bullets_variants() {
        assert_eq!(extract_bullets("- a\n- b\n- c\n- d").unwrap(), ["a", "b", "c", "d"]);
        assert_eq!(extract_bullets("1. a\n2. b\n3. c\n4. d\nthanks!").unwrap(), ["a", "b", "c", "d"]);
        assert_eq!(extract_bullets("Sure:\n* a\n• b\n3) c\n  - d  ").unwrap(), ["a", "b", "c", "d"]);
        assert_eq!(extract_bullets("- a\n- b\n- c"), Err(ExtractionError::WrongBulletCount(3)));
        assert_eq!(extract_bullets("- a\n- b\n- c\n- "), Err(ExtractionError::WrongBulletCount(3)));
        assert_eq!(extract_bullets("**Bold** intro\n- a\n- b\n- c\n- d").unwrap().len(), 4);
    }

    #[test]
    fn svg_block_from_prose_and_fences() {
        let listing = ROBOT_ARM_ICON.trim_end();
        let prose = format!("Here is your icon:\n\n{listing}\n\nLet me know!");
        assert_eq!(extract_svg_block(&prose).unwrap().as_str(), listing);
        let fenced = format!("```svg\n{listing}\n```");
        assert_eq!(extract_svg_block(&fenced).unwrap().as_str(), listing);
        let doc = parse_svg(&extract_svg_block(&prose).unwrap()).unwrap();
        assert_eq!(doc.shapes().len(), 13);
    }

    #[test]
    fn svg_block_errors_and_warnings() {
        assert_eq!(extract_svg_block("no graphics here"), Err(ExtractionError::NoSvgFound));
        assert_eq!(extract_svg_block("<svgfoo></svgfoo>"), Err(ExtractionError::NoSvgFound));
        assert_eq!(extract_svg_block("x <svg width='1'><rect/>"), Err(ExtractionError::UnterminatedSvg(2)));
        let (s, r) = extract_svg_block_reported("<SVG a='>'><svg></svg></SVG> and <svg></svg>").unwrap();
        assert_eq!(s.as_str(), "<SVG a='>'><svg></svg></SVG>");
        assert_eq!(r.warnings.len(), 1);
        assert_eq!(r.source_span, (0, s.as_str().len()));
        let (s, r) = extract_svg_block_reported("<svg/> <svg></svg>").unwrap();
        assert_eq!(s.as_str(), "<svg></svg>");
        assert_eq!(r.source_span.0, 7);
    }

    const Z_REPLY: &str = "Plan follows.\nSTART: [496, 600]\nGOAL: [496, 100]\nORIENTATION_DEG: 35\n\
        ```svg\n<svg width=\"1400\" height=\"700\"><line x1=\"496\" y1=\"600\" x2=\"496\" y2=\"100\" stroke=\"white\"/></svg>\n```";

    #[test]
    fn plan_z_problem() {
        let plan = extract_instruction_plan(Z_REPLY, &EnvironmentConfig::default()).unwrap();
        assert_eq!(plan.goal, CanvasPoint::new(496, 100));
        assert_eq!(plan.start, CanvasPoint::new(496, 600));
        assert_eq!(plan.orientation_deg, 35.0);
        assert!(plan.trajectory.as_str().starts_with("<svg"));
    }

    #[test]
    fn plan_errors() {
        let env = EnvironmentConfig::default();
        let no_ori = Z_REPLY.replace("ORIENTATION_DEG: 35\n", "");
        assert_eq!(extract_instruction_plan(&no_ori, &env), Err(ExtractionError::MissingField("ORIENTATION_DEG")));
        let out = Z_REPLY.replace("GOAL: [496, 100]", "GOAL: [1496, 100]");
        assert_eq!(extract_instruction_plan(&out, &env), Err(ExtractionError::PointOutOfCanvas(CanvasPoint::new(1496, 100))));
        let same = Z_REPLY.replace("[496, 600]", "[496, 100]");
        assert!(matches!(extract_instruction_plan(&same, &env), Err(ExtractionError::StartEqualsGoal(_))));
        let no_svg = Z_REPLY.split("```").next().unwrap();
        assert_eq!(extract_instruction_plan(no_svg, &env), Err(ExtractionError::NoSvgFound));
        let frac = Z_REPLY.replace("[496, 600]", "[496.5, 600]");
        assert!(matches!(extract_instruction_plan(&frac, &env), Err(ExtractionError::InvalidField { name: "START", .. })));
        let script = Z_REPLY.replace("<line", "<script/><line");
        assert!(matches!(extract_instruction_plan(&script, &env), Err(ExtractionError::TrajectoryInvalid(_))));
    }

    #[test]
    fn labels_inside_svg_are_ignored() {
        let env = EnvironmentConfig::default();
        let reply = "START: [10, 10]\nORIENTATION_DEG: 0\n<svg width=\"1400\" height=\"700\"><text x=\"1\" y=\"20\">GOAL: [5, 5]</text></svg>\nGOAL: [20, 20]";
        assert_eq!(extract_instruction_plan(reply, &env).unwrap().goal, CanvasPoint::new(20, 20));
    }

    proptest! {
        #[test]
        fn split_render_identity(a in "[A-Za-z0-9 .,]{0,30}[a-z]", b in "[a-z][A-Za-z0-9 .,]{0,30}", c in "[a-z]{1,40}") {
            let s = TaskManagerSplit { nlss_prompt: a.trim().into(), objvss_prompt: b.trim().into(), instvss_prompt: c };
            prop_assert_eq!(split_task_manager(&render_task_manager(&s)).unwrap(), s);
        }

        #[test]
        fn extractors_are_total(bytes in proptest::collection::vec(any::<u8>(), 0..400)) {
            let text = String::from_utf8_lossy(&bytes);
            let _ = split_task_manager(&text);
            let _ = extract_bullets(&text);
            let _ = extract_instruction_plan(&text, &EnvironmentConfig::default());
            if let Ok(s) = extract_svg_block(&text) {
                prop_assert!(s.as_str().to_ascii_lowercase().starts_with("<svg"));
                prop_assert!(s.as_str().to_ascii_lowercase().ends_with("</svg>"));
            }
        }

        #[test]
        fn svg_tokens_soup_is_total(parts in proptest::collection::vec(
            prop_oneof![Just("<svg"), Just("</svg>"), Just(">"), Just("/>"), Just("\""), Just("'"), Just(" "), Just("x")], 0..40)
        ) {
            let text: String = parts.concat();
            if let Ok(s) = extract_svg_block(&text) {
                prop_assert!(s.as_str().starts_with("<svg") && s.as_str().ends_with("</svg>"));
            }
        }
    }
}
