use std::fmt;

use super::{Element, Node, Shape, SvgDoc, SvgError};

/// 2D affine map in SVG order: `x' = a x + c y + e`, `y' = b x + d y + f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

impl Affine {
    pub const IDENTITY: Affine = Affine { a: 1.0, b: 0.0, c: 0.0, d: 1.0, e: 0.0, f: 0.0 };

    pub fn translate(dx: f64, dy: f64) -> Self {
        Affine { e: dx, f: dy, ..Self::IDENTITY }
    }

    pub fn scale(sx: f64, sy: f64) -> Self {
        Affine { a: sx, d: sy, ..Self::IDENTITY }
    }

    /// Clockwise on screen (y down) for positive degrees.
    pub fn rotate(deg: f64, cx: f64, cy: f64) -> Self {
        let (s, c) = sin_cos_deg(deg);
        Affine {
            a: c,
            b: s,
            c: -s,
            d: c,
            e: cx - c * cx + s * cy,
            f: cy - s * cx - c * cy,
        }
    }

    /// `self ∘ rhs`: apply `rhs` first.
    pub fn then_after(&self, rhs: &Affine) -> Affine {
        Affine {
            a: self.a * rhs.a + self.c * rhs.b,
            b: self.b * rhs.a + self.d * rhs.b,
            c: self.a * rhs.c + self.c * rhs.d,
            d: self.b * rhs.c + self.d * rhs.d,
            e: self.a * rhs.e + self.c * rhs.f + self.e,
            f: self.b * rhs.e + self.d * rhs.f + self.f,
        }
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (self.a * x + self.c * y + self.e, self.b * x + self.d * y + self.f)
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn inverse(&self) -> Option<Affine> {
        let det = self.determinant();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let inv = 1.0 / det;
        Some(Affine {
            a: self.d * inv,
            b: -self.b * inv,
            c: -self.c * inv,
            d: self.a * inv,
            e: (self.c * self.f - self.d * self.e) * inv,
            f: (self.b * self.e - self.a * self.f) * inv,
        })
    }

    pub fn is_finite(&self) -> bool {
        [self.a, self.b, self.c, self.d, self.e, self.f].iter().all(|v| v.is_finite())
    }

    /// Geometric mean scale, used for stroke widths.
    pub fn mean_scale(&self) -> f64 {
        self.determinant().abs().sqrt()
    }
}

/// Exact values at multiples of 90 degrees so quarter turns stay axis aligned.
fn sin_cos_deg(deg: f64) -> (f64, f64) {
    let r = deg.rem_euclid(360.0);
    if r == 0.0 {
        (0.0, 1.0)
    } else if r == 90.0 {
        (1.0, 0.0)
    } else if r == 180.0 {
        (0.0, -1.0)
    } else if r == 270.0 {
        (-1.0, 0.0)
    } else {
        deg.to_radians().sin_cos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    Translate { dx: f64, dy: f64 },
    /// Degrees, clockwise on screen, about `(cx, cy)`.
    Rotate { deg: f64, cx: f64, cy: f64 },
    Scale { sx: f64, sy: f64 },
    Matrix(Affine),
}

impl Transform {
    pub fn rotate(deg: f64, cx: f64, cy: f64) -> Self {
        Transform::Rotate { deg, cx, cy }
    }

    pub fn translate(dx: f64, dy: f64) -> Self {
        Transform::Translate { dx, dy }
    }

    pub fn scale(s: f64) -> Self {
        Transform::Scale { sx: s, sy: s }
    }

    pub fn is_finite(&self) -> bool {
        match *self {
            Transform::Translate { dx, dy } => dx.is_finite() && dy.is_finite(),
            Transform::Rotate { deg, cx, cy } => deg.is_finite() && cx.is_finite() && cy.is_finite(),
            Transform::Scale { sx, sy } => sx.is_finite() && sy.is_finite(),
            Transform::Matrix(m) => m.is_finite(),
        }
    }

    pub fn to_affine(&self) -> Affine {
        match *self {
            Transform::Translate { dx, dy } => Affine::translate(dx, dy),
            Transform::Rotate { deg, cx, cy } => Affine::rotate(deg, cx, cy),
            Transform::Scale { sx, sy } => Affine::scale(sx, sy),
            Transform::Matrix(m) => m,
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Transform::Translate { dx, dy } => write!(f, "translate({dx} {dy})"),
            Transform::Rotate { deg, cx, cy } => write!(f, "rotate({deg} {cx} {cy})"),
            Transform::Scale { sx, sy } => write!(f, "scale({sx} {sy})"),
            Transform::Matrix(m) => {
                write!(f, "matrix({} {} {} {} {} {})", m.a, m.b, m.c, m.d, m.e, m.f)
            }
        }
    }
}

/// Composes a transform list into one matrix.
///
/// Adjacent rotations about the same pivot are summed before conversion, so
/// `rotate(a) rotate(b)` and `rotate(a + b)` yield bit-identical matrices.
pub fn compose(list: &[Transform]) -> Affine {
    let mut out = Affine::IDENTITY;
    let mut i = 0;
    while i < list.len() {
        let mut t = list[i];
        if let Transform::Rotate { mut deg, cx, cy } = t {
            while let Some(Transform::Rotate { deg: next, cx: ncx, cy: ncy }) = list.get(i + 1) {
                if *ncx != cx || *ncy != cy {
                    break;
                }
                deg += next;
                i += 1;
            }
            t = Transform::Rotate { deg, cx, cy };
        }
        out = out.then_after(&t.to_affine());
        i += 1;
    }
    out
}

pub(crate) fn format_list(list: &[Transform]) -> String {
    list.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" ")
}

pub(crate) fn parse_list(text: &str) -> Option<Vec<Transform>> {
    let mut out = Vec::new();
    let mut rest = text.trim();
    while !rest.is_empty() {
        let open = rest.find('(')?;
        let name = rest[..open].trim().trim_start_matches(',').trim();
        let close = rest[open..].find(')')? + open;
        let args: Vec<f64> = rest[open + 1..close]
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<_>>()?;
        let t = match (name, args.as_slice()) {
            ("translate", [dx]) => Transform::Translate { dx: *dx, dy: 0.0 },
            ("translate", [dx, dy]) => Transform::Translate { dx: *dx, dy: *dy },
            ("rotate", [deg]) => Transform::Rotate { deg: *deg, cx: 0.0, cy: 0.0 },
            ("rotate", [deg, cx, cy]) => Transform::Rotate { deg: *deg, cx: *cx, cy: *cy },
            ("scale", [s]) => Transform::Scale { sx: *s, sy: *s },
            ("scale", [sx, sy]) => Transform::Scale { sx: *sx, sy: *sy },
            ("matrix", [a, b, c, d, e, f]) => {
                Transform::Matrix(Affine { a: *a, b: *b, c: *c, d: *d, e: *e, f: *f })
            }
            ("skewX", [k]) => {
                Transform::Matrix(Affine { c: k.to_radians().tan(), ..Affine::IDENTITY })
            }
            ("skewY", [k]) => {
                Transform::Matrix(Affine { b: k.to_radians().tan(), ..Affine::IDENTITY })
            }
            _ => return None,
        };
        out.push(t);
        rest = rest[close + 1..].trim_start();
        rest = rest.strip_prefix(',').unwrap_or(rest).trim_start();
    }
    Some(out)
}

/// Prepends `t` to the root group's transform list, so `t` applies on top of
/// everything already in the document. Content that is not a single group is
/// wrapped in one first. Geometry attributes are left untouched.
pub fn apply_transform(doc: &SvgDoc, t: Transform) -> Result<SvgDoc, SvgError> {
    if !t.is_finite() {
        return Err(SvgError::NonFiniteParameter);
    }
    let mut out = doc.clone();
    let is_root_group = matches!(
        out.nodes.as_slice(),
        [Node::Element(Element { shape: Shape::Group(_), .. })]
    );
    if !is_root_group {
        let children = std::mem::take(&mut out.nodes);
        out.nodes = vec![Node::Element(Element::group(children))];
    }
    if let Some(Node::Element(root)) = out.nodes.first_mut() {
        root.transform.insert(0, t);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &Affine, b: &Affine) -> bool {
        [a.a - b.a, a.b - b.b, a.c - b.c, a.d - b.d, a.e - b.e, a.f - b.f]
            .iter()
            .all(|d| d.abs() < 1e-9)
    }

    #[test]
    fn rotate_is_clockwise_on_screen() {
        let (x, y) = Affine::rotate(90.0, 0.0, 0.0).apply(1.0, 0.0);
        assert_eq!((x, y), (0.0, 1.0));
        let (x, y) = Affine::rotate(90.0, 10.0, 10.0).apply(20.0, 10.0);
        assert_eq!((x, y), (10.0, 20.0));
    }

    #[test]
    fn list_order_matches_svg() {
        // "translate(10 0) scale(2)": scale first, then translate.
        let m = compose(&[Transform::translate(10.0, 0.0), Transform::scale(2.0)]);
        assert_eq!(m.apply(1.0, 1.0), (12.0, 2.0));
    }

    #[test]
    fn inverse_round_trip() {
        let m = compose(&[
            Transform::rotate(33.0, 4.0, 5.0),
            Transform::translate(391.0, -5.0),
            Transform::Scale { sx: 0.84, sy: 1.3 },
        ]);
        let inv = m.inverse().unwrap();
        assert!(close(&m.then_after(&inv), &Affine::IDENTITY));
        assert!(Affine::scale(0.0, 1.0).inverse().is_none());
    }

    #[test]
    fn adjacent_rotations_fold() {
        let a = 17.25;
        let b = 101.5;
        let folded = compose(&[Transform::rotate(b, 3.0, 4.0), Transform::rotate(a, 3.0, 4.0)]);
        assert_eq!(folded, compose(&[Transform::rotate(a + b, 3.0, 4.0)]));
    }

    #[test]
    fn parses_and_formats() {
        let list = parse_list("translate(391,-5) rotate(35 496 100), scale(.84)").unwrap();
        assert_eq!(
            list,
            [
                Transform::translate(391.0, -5.0),
                Transform::rotate(35.0, 496.0, 100.0),
                Transform::scale(0.84)
            ]
        );
        assert_eq!(parse_list(&format_list(&list)).unwrap(), list);
        assert!(parse_list("rotate(nan)").is_none());
        assert!(parse_list("spin(3)").is_none());
        assert!(parse_list("translate(1").is_none());
    }

    #[test]
    fn transform_prepends_to_root_group() {
        let mut doc = SvgDoc::new(10.0, 10.0);
        doc.nodes.push(Node::Element(Element::new(Shape::Circle { cx: 5.0, cy: 5.0, r: 1.0 })));
        let once = apply_transform(&doc, Transform::translate(1.0, 0.0)).unwrap();
        let twice = apply_transform(&once, Transform::rotate(5.0, 0.0, 0.0)).unwrap();
        match &twice.nodes[..] {
            [Node::Element(g)] => {
                assert_eq!(g.transform, [Transform::rotate(5.0, 0.0, 0.0), Transform::translate(1.0, 0.0)]);
                assert_eq!(g.children().unwrap().len(), 1);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(
            apply_transform(&doc, Transform::translate(f64::NAN, 0.0)),
            Err(SvgError::NonFiniteParameter)
        );
    }
}
