use serde::{Deserialize, Serialize};

use super::bounds::{element_bounds, Rect};
use super::transform::{compose, Affine};
use super::{Element, Node, PaintValue, ResolvedPaint, Shape, SvgDoc};

/// Fraction of the viewport an opaque rect must cover to count as a
/// background.
pub const BACKGROUND_COVERAGE: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SanitizePolicy {
    pub strip_comments: bool,
    /// Remove opaque rects covering at least 95% of the viewport.
    pub strip_background: bool,
    /// Remove elements lying entirely outside the viewport.
    pub clamp_to_viewport: bool,
}

impl Default for SanitizePolicy {
    fn default() -> Self {
        Self { strip_comments: true, strip_background: true, clamp_to_viewport: true }
    }
}

pub fn sanitize(doc: &SvgDoc, policy: &SanitizePolicy) -> SvgDoc {
    let vp = doc.viewport();
    let viewport = Rect { x: vp.x, y: vp.y, width: vp.width, height: vp.height };
    let ctx = Ctx { policy, viewport, viewport_area: vp.width * vp.height };
    SvgDoc {
        width: doc.width,
        height: doc.height,
        view_box: doc.view_box,
        nodes: ctx.nodes(&doc.nodes, &Affine::IDENTITY, &ResolvedPaint::default()),
    }
}

struct Ctx<'a> {
    policy: &'a SanitizePolicy,
    viewport: Rect,
    viewport_area: f64,
}

impl Ctx<'_> {
    fn nodes(&self, nodes: &[Node], m: &Affine, inherited: &ResolvedPaint) -> Vec<Node> {
        let mut out = Vec::with_capacity(nodes.len());
        for node in nodes {
            match node {
                Node::Comment(_) if self.policy.strip_comments => {}
                Node::Comment(c) => out.push(Node::Comment(c.clone())),
                Node::Element(e) => {
                    if let Some(kept) = self.element(e, m, inherited) {
                        out.push(Node::Element(kept));
                    }
                }
            }
        }
        out
    }

    fn element(&self, e: &Element, parent: &Affine, inherited: &ResolvedPaint) -> Option<Element> {
        let paint = inherited.child(&e.paint);
        let m = parent.then_after(&compose(&e.transform));
        if self.policy.strip_background && self.is_background(e, &m, &paint) {
            return None;
        }
        if self.policy.clamp_to_viewport {
            if let Some(b) = element_bounds(e, parent) {
                if !b.intersects(&self.viewport) {
                    return None;
                }
            }
        }
        let mut kept = e.clone();
        if let Shape::Group(children) = &e.shape {
            kept.shape = Shape::Group(self.nodes(children, &m, &paint));
        }
        Some(kept)
    }

    fn is_background(&self, e: &Element, m: &Affine, paint: &ResolvedPaint) -> bool {
        let Shape::Rect { width, height, .. } = e.shape else { return false };
        let opaque = matches!(paint.fill, PaintValue::Color(c) if c.a == 255) && paint.fill_opacity >= 1.0;
        opaque
            && self.viewport_area > 0.0
            && width * height * m.determinant().abs() >= BACKGROUND_COVERAGE * self.viewport_area
    }
}
