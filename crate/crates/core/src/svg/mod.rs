//! A strict SVG subset: parse, sanitize, transform, bound, serialize and
//! rasterize.
//!
//! Generated graphics are untrusted, so the document model can only express
//! whitelisted elements and presentation attributes. Anything outside the
//! subset is either rejected at parse time (scripts, external references,
//! raster content, unknown elements) or has no field to land in.

mod bounds;
mod color;
mod font;
mod parse;
mod path;
mod raster;
mod sanitize;
mod serialize;
mod transform;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bounds::{bounds, element_bounds, Rect};
pub use color::Rgba;
pub use font::{text_advance, CAP_HEIGHT_RATIO};
pub use parse::parse_svg;
pub use path::{PathData, PathSeg};
pub use raster::{decode_png, rasterize, rasterize_with, view_transform, RasterImage, RasterOptions};
pub use sanitize::{sanitize, SanitizePolicy};
pub use serialize::serialize;
pub use transform::{apply_transform, compose, Affine, Transform};

pub const SVG_NS: &str = "http://www.w3.org/2000/svg";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SvgError {
    #[error("malformed XML at {position}: {message}")]
    XmlMalformed { position: String, message: String },
    #[error("unsupported element <{0}>")]
    UnsupportedElement(String),
    #[error("bad attribute {0}={1:?}")]
    BadAttribute(String, String),
    #[error("transform parameter is not finite")]
    NonFiniteParameter,
    #[error("viewport or output size is degenerate")]
    ViewportDegenerate,
    #[error("png encoding failed: {0}")]
    Png(String),
}

/// Raw SVG text as produced by a model or read from disk.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SvgSource(pub String);

impl SvgSource {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SvgSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<String> for SvgSource {
    fn from(s: String) -> Self {
        Self(s)
    }
}

impl From<&str> for SvgSource {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewBox {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvgDoc {
    pub width: f64,
    pub height: f64,
    pub view_box: Option<ViewBox>,
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Element(Element),
    Comment(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub id: Option<String>,
    pub shape: Shape,
    pub paint: Paint,
    /// Applied right to left, as in the `transform` attribute.
    pub transform: Vec<Transform>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Rect { x: f64, y: f64, width: f64, height: f64, rx: f64, ry: f64 },
    Circle { cx: f64, cy: f64, r: f64 },
    Ellipse { cx: f64, cy: f64, rx: f64, ry: f64 },
    Line { x1: f64, y1: f64, x2: f64, y2: f64 },
    Polyline(Vec<(f64, f64)>),
    Polygon(Vec<(f64, f64)>),
    Path(PathData),
    Text { x: f64, y: f64, font_size: f64, content: String },
    Group(Vec<Node>),
}

impl Shape {
    pub fn tag(&self) -> &'static str {
        match self {
            Shape::Rect { .. } => "rect",
            Shape::Circle { .. } => "circle",
            Shape::Ellipse { .. } => "ellipse",
            Shape::Line { .. } => "line",
            Shape::Polyline(_) => "polyline",
            Shape::Polygon(_) => "polygon",
            Shape::Path(_) => "path",
            Shape::Text { .. } => "text",
            Shape::Group(_) => "g",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaintValue {
    None,
    Color(Rgba),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FillRule {
    NonZero,
    EvenOdd,
}

/// Presentation attributes. `None` means "not specified here", so groups can
/// pass values down to their children.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Paint {
    pub fill: Option<PaintValue>,
    pub stroke: Option<PaintValue>,
    pub stroke_width: Option<f64>,
    pub fill_rule: Option<FillRule>,
    pub opacity: Option<f64>,
    pub fill_opacity: Option<f64>,
    pub stroke_opacity: Option<f64>,
}

/// Fully resolved paint after inheritance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ResolvedPaint {
    pub fill: PaintValue,
    pub stroke: PaintValue,
    pub stroke_width: f64,
    pub fill_rule: FillRule,
    pub fill_opacity: f64,
    pub stroke_opacity: f64,
}

impl Default for ResolvedPaint {
    fn default() -> Self {
        Self {
            fill: PaintValue::Color(Rgba::BLACK),
            stroke: PaintValue::None,
            stroke_width: 1.0,
            fill_rule: FillRule::NonZero,
            fill_opacity: 1.0,
            stroke_opacity: 1.0,
        }
    }
}

impl ResolvedPaint {
    /// Inherits from `self`; `opacity` is folded into both channel opacities.
    pub(crate) fn child(&self, p: &Paint) -> ResolvedPaint {
        let group = p.opacity.unwrap_or(1.0);
        ResolvedPaint {
            fill: p.fill.unwrap_or(self.fill),
            stroke: p.stroke.unwrap_or(self.stroke),
            stroke_width: p.stroke_width.unwrap_or(self.stroke_width),
            fill_rule: p.fill_rule.unwrap_or(self.fill_rule),
            fill_opacity: p.fill_opacity.unwrap_or(self.fill_opacity) * group,
            stroke_opacity: p.stroke_opacity.unwrap_or(self.stroke_opacity) * group,
        }
    }
}

impl Element {
    pub fn new(shape: Shape) -> Self {
        Self { id: None, shape, paint: Paint::default(), transform: Vec::new() }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    pub fn with_fill(mut self, color: Rgba) -> Self {
        self.paint.fill = Some(PaintValue::Color(color));
        self
    }

    pub fn with_transform(mut self, t: Vec<Transform>) -> Self {
        self.transform = t;
        self
    }

    pub fn group(children: Vec<Node>) -> Self {
        Self::new(Shape::Group(children))
    }

    pub fn children(&self) -> Option<&[Node]> {
        match &self.shape {
            Shape::Group(c) => Some(c),
            _ => None,
        }
    }
}

impl SvgDoc {
    pub fn new(width: f64, height: f64) -> Self {
        Self { width, height, view_box: None, nodes: Vec::new() }
    }

    /// The user-space rectangle mapped onto the output.
    pub fn viewport(&self) -> ViewBox {
        self.view_box.unwrap_or(ViewBox { x: 0.0, y: 0.0, width: self.width, height: self.height })
    }

    /// Every non-group element, depth first in document order.
    pub fn shapes(&self) -> Vec<&Element> {
        fn walk<'a>(nodes: &'a [Node], out: &mut Vec<&'a Element>) {
            for n in nodes {
                if let Node::Element(e) = n {
                    match &e.shape {
                        Shape::Group(children) => walk(children, out),
                        _ => out.push(e),
                    }
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.nodes, &mut out);
        out
    }

    pub fn comments(&self) -> Vec<&str> {
        fn walk<'a>(nodes: &'a [Node], out: &mut Vec<&'a str>) {
            for n in nodes {
                match n {
                    Node::Comment(c) => out.push(c),
                    Node::Element(e) => {
                        if let Shape::Group(children) = &e.shape {
                            walk(children, out)
                        }
                    }
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.nodes, &mut out);
        out
    }

    /// Top-level or nested element with the given id.
    pub fn find_by_id(&self, id: &str) -> Option<&Element> {
        fn walk<'a>(nodes: &'a [Node], id: &str) -> Option<&'a Element> {
            for n in nodes {
                if let Node::Element(e) = n {
                    if e.id.as_deref() == Some(id) {
                        return Some(e);
                    }
                    if let Some(found) = e.children().and_then(|c| walk(c, id)) {
                        return Some(found);
                    }
                }
            }
            None
        }
        walk(&self.nodes, id)
    }
}
