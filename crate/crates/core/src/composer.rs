//! The compositor: merges the object icon and the trajectory onto one black
//! canvas, and maps the result onto a display.
//!
//! Paint order is background, start icon (half opacity), trajectory, goal
//! icon. Only the goal instance is rotated, about the goal point.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{CanvasPoint, EnvironmentConfig};
use crate::extraction::InstructionPlan;
use crate::svg::{
    self, bounds, compose, parse_svg, rasterize, sanitize, text_advance, view_transform, Element, Node, Paint,
    RasterImage, Rect, Rgba, SanitizePolicy, Shape, SvgDoc, SvgError, Transform, CAP_HEIGHT_RATIO,
};

pub const BACKGROUND_ID: &str = "sig-background";
pub const START_ICON_ID: &str = "sig-icon-start";
pub const TRAJECTORY_ID: &str = "sig-trajectory";
pub const GOAL_ICON_ID: &str = "sig-icon-goal";

pub const START_ICON_OPACITY: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComposeError {
    #[error("icon has no visible geometry")]
    IconEmpty,
    #[error("plan point {0} lies outside the canvas")]
    PlanOutOfCanvas(CanvasPoint),
    #[error("homography is singular")]
    SingularHomography,
    #[error("expected 4 non-empty bullets, found {0}")]
    WrongBulletCount(usize),
    #[error("calibration: {0}")]
    Calibration(String),
    #[error(transparent)]
    Svg(#[from] SvgError),
}

/// Where a composite came from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub template_version: String,
    pub model_id: String,
    pub temperature: f64,
    /// Fixture keys of every completion consumed, in stage order.
    pub fixture_keys: Vec<String>,
}

/// A composed canvas signal. Serializes with the document as SVG text.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeSignal {
    pub doc: SvgDoc,
    /// The icon's own viewport, in icon coordinates. Each instance group maps
    /// this square onto the canvas.
    pub icon_frame: Rect,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct CompositeWire {
    svg: String,
    icon_frame: Rect,
    provenance: Provenance,
}

impl Serialize for CompositeSignal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        CompositeWire {
            svg: svg::serialize(&self.doc).0,
            icon_frame: self.icon_frame,
            provenance: self.provenance.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CompositeSignal {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = CompositeWire::deserialize(d)?;
        let doc = parse_svg(&w.svg.into()).map_err(serde::de::Error::custom)?;
        Ok(CompositeSignal { doc, icon_frame: w.icon_frame, provenance: w.provenance })
    }
}

impl CompositeSignal {
    pub fn to_svg_string(&self) -> String {
        svg::serialize(&self.doc).0
    }

    /// Canvas bounds of the icon frame carried by the instance group `id`.
    pub fn instance_bounds(&self, id: &str) -> Option<Rect> {
        let g = self.doc.find_by_id(id)?;
        let m = compose(&g.transform);
        let f = self.icon_frame;
        let corners = [(f.x, f.y), (f.max_x(), f.y), (f.x, f.max_y()), (f.max_x(), f.max_y())].map(|(x, y)| m.apply(x, y));
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for (x, y) in corners {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        Some(Rect::from_extents(x0, y0, x1, y1))
    }

    pub fn goal_icon_center(&self) -> Option<(f64, f64)> {
        self.instance_bounds(GOAL_ICON_ID).map(|r| r.center())
    }

    pub fn start_icon_center(&self) -> Option<(f64, f64)> {
        self.instance_bounds(START_ICON_ID).map(|r| r.center())
    }
}

/// Transform list placing the icon frame as an `edge` square centered on `at`.
fn placement(frame: &Rect, edge: f64, at: CanvasPoint, rotate_deg: f64) -> Vec<Transform> {
    let (gx, gy) = (f64::from(at.x), f64::from(at.y));
    let s = edge / frame.width.max(frame.height);
    let pad = ((edge - frame.width * s) / 2.0, (edge - frame.height * s) / 2.0);
    let mut list = Vec::with_capacity(5);
    if rotate_deg != 0.0 {
        list.push(Transform::rotate(rotate_deg, gx, gy));
    }
    list.push(Transform::translate(gx - edge / 2.0, gy - edge / 2.0));
    if pad != (0.0, 0.0) {
        list.push(Transform::translate(pad.0, pad.1));
    }
    list.push(Transform::scale(s));
    if frame.x != 0.0 || frame.y != 0.0 {
        list.push(Transform::translate(-frame.x, -frame.y));
    }
    list
}

fn canvas_doc(env: &EnvironmentConfig, background: Rgba) -> SvgDoc {
    let (w, h) = (f64::from(env.canvas_width), f64::from(env.canvas_height));
    let mut doc = SvgDoc::new(w, h);
    doc.nodes.push(Node::Element(
        Element::new(Shape::Rect { x: 0.0, y: 0.0, width: w, height: h, rx: 0.0, ry: 0.0 })
            .with_id(BACKGROUND_ID)
            .with_fill(background),
    ));
    doc
}

/// Σ: superimposes the icon at start and goal and the trajectory between.
/// `icon` is expected to be sanitized already.
pub fn compose_signal(
    icon: &SvgDoc,
    plan: &InstructionPlan,
    env: &EnvironmentConfig,
) -> Result<CompositeSignal, ComposeError> {
    compose_signal_on(icon, plan, env, Rgba::BLACK)
}

pub fn compose_signal_on(
    icon: &SvgDoc,
    plan: &InstructionPlan,
    env: &EnvironmentConfig,
    background: Rgba,
) -> Result<CompositeSignal, ComposeError> {
    for p in [plan.start, plan.goal] {
        if !env.contains(p) {
            return Err(ComposeError::PlanOutOfCanvas(p));
        }
    }
    if !plan.orientation_deg.is_finite() {
        return Err(SvgError::NonFiniteParameter.into());
    }
    if bounds(icon).is_none() {
        return Err(ComposeError::IconEmpty);
    }
    let vp = icon.viewport();
    let frame = Rect { x: vp.x, y: vp.y, width: vp.width, height: vp.height };
    if !(frame.width > 0.0 && frame.height > 0.0) {
        return Err(SvgError::ViewportDegenerate.into());
    }
    let trajectory = sanitize(&parse_svg(&plan.trajectory)?, &SanitizePolicy::default());
    let edge = f64::from(env.icon_edge);

    let mut doc = canvas_doc(env, background);
    let mut start = Element::group(icon.nodes.clone())
        .with_id(START_ICON_ID)
        .with_transform(placement(&frame, edge, plan.start, 0.0));
    start.paint = Paint { opacity: Some(START_ICON_OPACITY), ..Paint::default() };
    let path = Element::group(trajectory.nodes).with_id(TRAJECTORY_ID);
    let goal = Element::group(icon.nodes.clone())
        .with_id(GOAL_ICON_ID)
        .with_transform(placement(&frame, edge, plan.goal, plan.orientation_deg));
    doc.nodes.extend([start, path, goal].map(Node::Element));
    Ok(CompositeSignal { doc, icon_frame: frame, provenance: Provenance::default() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum DisplayTarget {
    Monitor { width: u32, height: u32 },
    Projector { width: u32, height: u32 },
}

impl DisplayTarget {
    pub fn size(&self) -> (u32, u32) {
        match *self {
            DisplayTarget::Monitor { width, height } | DisplayTarget::Projector { width, height } => (width, height),
        }
    }
}

/// Canvas cells to display pixels. Monitor targets letterbox the canvas and
/// ignore the matrix; projector targets warp through it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Row-major; maps homogeneous canvas `(x, y, 1)` to display pixels.
    pub homography: [[f64; 3]; 3],
    pub target: DisplayTarget,
}

impl Calibration {
    pub const IDENTITY: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

    pub fn identity(target: DisplayTarget) -> Self {
        Self { homography: Self::IDENTITY, target }
    }

    /// Text form: nine numbers row-major, then `target monitor|projector W H`.
    /// `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ComposeError> {
        let bad = |m: String| ComposeError::Calibration(m);
        let tokens: Vec<&str> = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(|l| l.split(|c: char| c.is_whitespace() || c == ','))
            .filter(|t| !t.is_empty())
            .collect();
        if tokens.len() != 13 {
            return Err(bad(format!("expected 9 numbers and a target line, found {} tokens", tokens.len())));
        }
        let mut h = [[0.0; 3]; 3];
        for (i, t) in tokens[..9].iter().enumerate() {
            h[i / 3][i % 3] = t.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| bad(format!("bad number {t:?}")))?;
        }
        if !tokens[9].eq_ignore_ascii_case("target") {
            return Err(bad(format!("expected `target`, found {:?}", tokens[9])));
        }
        let dim = |t: &str| t.parse::<u32>().ok().filter(|v| *v > 0).ok_or_else(|| bad(format!("bad dimension {t:?}")));
        let (width, height) = (dim(tokens[11])?, dim(tokens[12])?);
        let target = match tokens[10].to_ascii_lowercase().as_str() {
            "monitor" => DisplayTarget::Monitor { width, height },
            "projector" => DisplayTarget::Projector { width, height },
            other => return Err(bad(format!("unknown target {other:?}"))),
        };
        let cal = Calibration { homography: h, target };
        cal.check()?;
        Ok(cal)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ComposeError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| ComposeError::Calibration(format!("{}: {e}", path.as_ref().display())))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let h = &self.homography;
        let (kind, (w, ht)) = match self.target {
            DisplayTarget::Monitor { .. } => ("monitor", self.target.size()),
            DisplayTarget::Projector { .. } => ("projector", self.target.size()),
        };
        let rows: Vec<String> = h.iter().map(|r| format!("{} {} {}", r[0], r[1], r[2])).collect();
        format!("{}\ntarget {kind} {w} {ht}\n", rows.join("\n"))
    }

    pub fn check(&self) -> Result<(), ComposeError> {
        let h = &self.homography;
        let det = h[0][0] * (h[1][1] * h[2][2] - h[1][2] * h[2][1]) - h[0][1] * (h[1][0] * h[2][2] - h[1][2] * h[2][0])
            + h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0]);
        let det2 = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        if det == 0.0 || det2 == 0.0 || !det.is_finite() {
            return Err(ComposeError::SingularHomography);
        }
        Ok(())
    }

    fn inverse(&self) -> Result<[[f64; 3]; 3], ComposeError> {
        self.check()?;
        let m = &self.homography;
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
        Ok([
            [cof(1, 2, 1, 2) / det, -cof(0, 2, 1, 2) / det, cof(0, 1, 1, 2) / det],
            [-cof(1, 2, 0, 2) / det, cof(0, 2, 0, 2) / det, -cof(0, 1, 0, 2) / det],
            [cof(1, 2, 0, 1) / det, -cof(0, 2, 0, 1) / det, cof(0, 1, 0, 1) / det],
        ])
    }

    /// Display position of canvas point `(x, y)`, or `None` at infinity.
    pub fn project(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let h = &self.homography;
        let w = h[2][0] * x + h[2][1] * y + h[2][2];
        if w == 0.0 {
            return None;
        }
        Some(((h[0][0] * x + h[0][1] * y + h[0][2]) / w, (h[1][0] * x + h[1][1] * y + h[1][2]) / w))
    }
}

/// A line of rendered card text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardLine {
    /// Index of the bullet this line belongs to.
    pub bullet: usize,
    pub text: String,
    pub bounds: Rect,
    pub font_size: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisplayFrame {
    pub image: RasterImage,
    pub target: DisplayTarget,
    /// Display-space rectangle covered by the canvas, for monitor targets.
    pub content: Option<Rect>,
    /// Text layout, for rendered cards.
    pub lines: Vec<CardLine>,
}

pub fn map_doc_to_display(doc: &SvgDoc, cal: &Calibration) -> Result<DisplayFrame, ComposeError> {
    let (w, h) = cal.target.size();
    match cal.target {
        DisplayTarget::Monitor { .. } => {
            let image = rasterize(doc, w, h)?;
            let v = view_transform(doc, w, h)?;
            let vp = doc.viewport();
            let (x0, y0) = v.apply(vp.x, vp.y);
            let (x1, y1) = v.apply(vp.x + vp.width, vp.y + vp.height);
            Ok(DisplayFrame { image, target: cal.target, content: Some(Rect::from_extents(x0, y0, x1, y1)), lines: Vec::new() })
        }
        DisplayTarget::Projector { .. } => {
            let inv = cal.inverse()?;
            let base = rasterize(doc, doc.width.round() as u32, doc.height.round() as u32)?;
            let mut image = RasterImage::new(w, h);
            for v in 0..h {
                for u in 0..w {
                    let (px, py) = (f64::from(u) + 0.5, f64::from(v) + 0.5);
                    let hw = inv[2][0] * px + inv[2][1] * py + inv[2][2];
                    if hw <= 0.0 {
                        continue;
                    }
                    let sx = ((inv[0][0] * px + inv[0][1] * py + inv[0][2]) / hw).floor();
                    let sy = ((inv[1][0] * px + inv[1][1] * py + inv[1][2]) / hw).floor();
                    if sx >= 0.0 && sy >= 0.0 && sx < f64::from(base.width) && sy < f64::from(base.height) {
                        image.set_pixel(u, v, base.pixel(sx as u32, sy as u32));
                    }
                }
            }
            Ok(DisplayFrame { image, target: cal.target, content: None, lines: Vec::new() })
        }
    }
}

pub fn map_to_display(sig: &CompositeSignal, cal: &Calibration) -> Result<DisplayFrame, ComposeError> {
    map_doc_to_display(&sig.doc, cal)
}

const CARD_MARGIN: f64 = 60.0;
const CARD_MAX_FONT: f64 = 40.0;
const CARD_MIN_FONT: f64 = 10.0;
const BULLET_MARK: &str = "• ";

fn wrap(text: &str, max_chars: usize) -> Vec<String> {
    let mut lines = Vec::new();
    let mut cur = String::new();
    for word in text.split_whitespace() {
        let mut word = word.to_string();
        while word.chars().count() > max_chars {
            if !cur.is_empty() {
                lines.push(std::mem::take(&mut cur));
            }
            let head: String = word.chars().take(max_chars).collect();
            word = word.chars().skip(max_chars).collect();
            lines.push(head);
        }
        if cur.is_empty() {
            cur = word;
        } else if cur.chars().count() + 1 + word.chars().count() <= max_chars {
            cur.push(' ');
            cur.push_str(&word);
        } else {
            lines.push(std::mem::replace(&mut cur, word));
        }
    }
    if !cur.is_empty() {
        lines.push(cur);
    }
    lines
}

/// Text card document for the natural-language modality: four bullets,
/// white on black, word-wrapped and shrunk to fit the canvas.
pub fn nls_card(bullets: &[String], env: &EnvironmentConfig) -> Result<(SvgDoc, Vec<CardLine>), ComposeError> {
    let filled = bullets.iter().filter(|b| !b.trim().is_empty()).count();
    if bullets.len() != 4 || filled != 4 {
        return Err(ComposeError::WrongBulletCount(filled));
    }
    let (w, h) = (f64::from(env.canvas_width), f64::from(env.canvas_height));
    let mut font = CARD_MAX_FONT;
    let layout = loop {
        let line_gap = font * 1.5;
        let bullet_gap = font;
        let indent = text_advance(BULLET_MARK, font);
        let max_chars = (((w - 2.0 * CARD_MARGIN - indent) / text_advance("M", font)).floor() as usize).max(1);
        let mut lines = Vec::new();
        let mut y = CARD_MARGIN + font * CAP_HEIGHT_RATIO;
        for (i, b) in bullets.iter().enumerate() {
            for (k, text) in wrap(b, max_chars).into_iter().enumerate() {
                let x = CARD_MARGIN + indent;
                let adv = text_advance(&text, font);
                lines.push((i, k == 0, text, x, y, adv));
                y += line_gap;
            }
            y += bullet_gap;
        }
        let bottom = y - line_gap - bullet_gap;
        if bottom <= h - CARD_MARGIN || font <= CARD_MIN_FONT {
            break lines;
        }
        font -= 2.0;
    };

    let mut doc = canvas_doc(env, Rgba::BLACK);
    let mut card = Vec::new();
    let mut children = Vec::new();
    for (bullet, first, text, x, y, adv) in layout {
        if first {
            children.push(Node::Element(
                Element::new(Shape::Text { x: CARD_MARGIN, y, font_size: font, content: BULLET_MARK.trim().into() })
                    .with_fill(Rgba::WHITE),
            ));
        }
        children.push(Node::Element(
            Element::new(Shape::Text { x, y, font_size: font, content: text.clone() }).with_fill(Rgba::WHITE),
        ));
        let cap = font * CAP_HEIGHT_RATIO;
        card.push(CardLine { bullet, text, bounds: Rect { x, y: y - cap, width: adv, height: cap }, font_size: font });
    }
    doc.nodes.push(Node::Element(Element::group(children).with_id("sig-card")));
    Ok((doc, card))
}

pub fn render_nls_card(
    bullets: &[String],
    env: &EnvironmentConfig,
    target: DisplayTarget,
) -> Result<DisplayFrame, ComposeError> {
    let (doc, lines) = nls_card(bullets, env)?;
    let mut frame = map_doc_to_display(&doc, &Calibration::identity(target))?;
    frame.lines = lines;
    Ok(frame)
}
