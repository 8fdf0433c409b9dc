use serde::{Deserialize, Serialize};

use super::font::{text_advance, CAP_HEIGHT_RATIO};
use super::transform::{compose, Affine};
use super::{Element, Node, Shape, SvgDoc};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl Rect {
    pub fn from_extents(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Rect { x: min_x, y: min_y, width: max_x - min_x, height: max_y - min_y }
    }

    pub fn max_x(&self) -> f64 {
        self.x + self.width
    }

    pub fn max_y(&self) -> f64 {
        self.y + self.height
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.width / 2.0, self.y + self.height / 2.0)
    }

    pub fn union(&self, o: &Rect) -> Rect {
        Rect::from_extents(
            self.x.min(o.x),
            self.y.min(o.y),
            self.max_x().max(o.max_x()),
            self.max_y().max(o.max_y()),
        )
    }

    pub fn intersects(&self, o: &Rect) -> bool {
        self.x <= o.max_x() && o.x <= self.max_x() && self.y <= o.max_y() && o.y <= self.max_y()
    }
}

fn extents_of(points: impl IntoIterator<Item = (f64, f64)>) -> Option<Rect> {
    let mut it = points.into_iter();
    let first = it.next()?;
    let (mut x0, mut y0, mut x1, mut y1) = (first.0, first.1, first.0, first.1);
    for (x, y) in it {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    Some(Rect::from_extents(x0, y0, x1, y1))
}

/// Exact bounds of an axis-aligned ellipse under `m`.
fn ellipse_bounds(m: &Affine, cx: f64, cy: f64, rx: f64, ry: f64) -> Rect {
    let (x, y) = m.apply(cx, cy);
    let hw = (m.a * rx).hypot(m.c * ry);
    let hh = (m.b * rx).hypot(m.d * ry);
    Rect::from_extents(x - hw, y - hh, x + hw, y + hh)
}

/// Geometry bounds of `el` (and its children) under the parent transform
/// `parent`. Stroke width is not included.
pub fn element_bounds(el: &Element, parent: &Affine) -> Option<Rect> {
    let m = parent.then_after(&compose(&el.transform));
    let map = |pts: &[(f64, f64)]| extents_of(pts.iter().map(|&(x, y)| m.apply(x, y)));
    match &el.shape {
        Shape::Rect { x, y, width, height, .. } => {
            map(&[(*x, *y), (x + width, *y), (*x, y + height), (x + width, y + height)])
        }
        Shape::Circle { cx, cy, r } => Some(ellipse_bounds(&m, *cx, *cy, *r, *r)),
        Shape::Ellipse { cx, cy, rx, ry } => Some(ellipse_bounds(&m, *cx, *cy, *rx, *ry)),
        Shape::Line { x1, y1, x2, y2 } => map(&[(*x1, *y1), (*x2, *y2)]),
        Shape::Polyline(p) | Shape::Polygon(p) => map(p),
        Shape::Path(d) => map(&d.hull_points()),
        Shape::Text { x, y, font_size, content } => {
            let w = text_advance(content, *font_size);
            let h = font_size * CAP_HEIGHT_RATIO;
            map(&[(*x, y - h), (x + w, y - h), (*x, *y), (x + w, *y)])
        }
        Shape::Group(children) => nodes_bounds(children, &m),
    }
}

pub(crate) fn nodes_bounds(nodes: &[Node], m: &Affine) -> Option<Rect> {
    nodes
        .iter()
        .filter_map(|n| match n {
            Node::Element(e) => element_bounds(e, m),
            Node::Comment(_) => None,
        })
        .reduce(|a, b| a.union(&b))
}

/// Tight axis-aligned bounds of all geometry in user space, after
/// transforms. `None` for a document without geometry. Paths are bounded by
/// their control polygon, which is conservative.
pub fn bounds(doc: &SvgDoc) -> Option<Rect> {
    nodes_bounds(&doc.nodes, &Affine::IDENTITY)
}
