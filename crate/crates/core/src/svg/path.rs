//! Path data. Parsed into absolute segments: `H`/`V` become `L`, and the
//! smooth forms `S`/`T` get their reflected control point made explicit.

use std::f64::consts::PI;
use std::fmt::Write as _;

use super::transform::Affine;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathSeg {
    MoveTo(f64, f64),
    LineTo(f64, f64),
    Cubic { c1: (f64, f64), c2: (f64, f64), to: (f64, f64) },
    Quad { c: (f64, f64), to: (f64, f64) },
    Arc { rx: f64, ry: f64, rotation: f64, large: bool, sweep: bool, to: (f64, f64) },
    Close,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathData(pub Vec<PathSeg>);

struct Lexer<'a> {
    s: &'a [u8],
    i: usize,
}

impl<'a> Lexer<'a> {
    fn skip_sep(&mut self) {
        while self.i < self.s.len() && (self.s[self.i].is_ascii_whitespace() || self.s[self.i] == b',') {
            self.i += 1;
        }
    }

    fn peek_command(&mut self) -> Option<u8> {
        self.skip_sep();
        self.s.get(self.i).copied().filter(|c| c.is_ascii_alphabetic() && *c != b'e' && *c != b'E')
    }

    fn at_number(&mut self) -> bool {
        self.skip_sep();
        matches!(self.s.get(self.i), Some(c) if c.is_ascii_digit() || matches!(c, b'-' | b'+' | b'.'))
    }

    fn number(&mut self) -> Option<f64> {
        self.skip_sep();
        let start = self.i;
        let s = self.s;
        let mut j = self.i;
        if j < s.len() && (s[j] == b'-' || s[j] == b'+') {
            j += 1;
        }
        let mut digits = 0;
        while j < s.len() && s[j].is_ascii_digit() {
            j += 1;
            digits += 1;
        }
        if j < s.len() && s[j] == b'.' {
            j += 1;
            while j < s.len() && s[j].is_ascii_digit() {
                j += 1;
                digits += 1;
            }
        }
        if digits == 0 {
            return None;
        }
        if j < s.len() && (s[j] == b'e' || s[j] == b'E') {
            let mut k = j + 1;
            if k < s.len() && (s[k] == b'-' || s[k] == b'+') {
                k += 1;
            }
            let exp_start = k;
            while k < s.len() && s[k].is_ascii_digit() {
                k += 1;
            }
            if k > exp_start {
                j = k;
            }
        }
        self.i = j;
        std::str::from_utf8(&s[start..j]).ok()?.parse::<f64>().ok().filter(|v| v.is_finite())
    }

    fn flag(&mut self) -> Option<bool> {
        self.skip_sep();
        let c = *self.s.get(self.i)?;
        self.i += 1;
        match c {
            b'0' => Some(false),
            b'1' => Some(true),
            _ => None,
        }
    }
}

impl PathData {
    /// Returns `None` on any syntax error.
    pub fn parse(text: &str) -> Option<PathData> {
        let mut lx = Lexer { s: text.as_bytes(), i: 0 };
        let mut segs = Vec::new();
        let mut cur = (0.0, 0.0);
        let mut start = (0.0, 0.0);
        let mut last_cubic_ctrl: Option<(f64, f64)> = None;
        let mut last_quad_ctrl: Option<(f64, f64)> = None;
        let mut cmd: Option<u8> = None;

        loop {
            let next = match lx.peek_command() {
                Some(c) => {
                    lx.i += 1;
                    c
                }
                None => {
                    if lx.i >= lx.s.len() {
                        break;
                    }
                    // implicit repetition; a repeated moveto means lineto
                    match cmd {
                        Some(b'M') if lx.at_number() => b'L',
                        Some(b'm') if lx.at_number() => b'l',
                        Some(c) if c != b'Z' && c != b'z' && lx.at_number() => c,
                        _ => return None,
                    }
                }
            };
            if segs.is_empty() && !matches!(next, b'M' | b'm') {
                return None;
            }
            let rel = next.is_ascii_lowercase();
            let base = if rel { cur } else { (0.0, 0.0) };
            let pt = |lx: &mut Lexer| -> Option<(f64, f64)> {
                let x = lx.number()?;
                let y = lx.number()?;
                Some((base.0 + x, base.1 + y))
            };
            let mut cubic_ctrl = None;
            let mut quad_ctrl = None;
            match next.to_ascii_uppercase() {
                b'M' => {
                    cur = pt(&mut lx)?;
                    start = cur;
                    segs.push(PathSeg::MoveTo(cur.0, cur.1));
                }
                b'L' => {
                    cur = pt(&mut lx)?;
                    segs.push(PathSeg::LineTo(cur.0, cur.1));
                }
                b'H' => {
                    let x = lx.number()?;
                    cur = (if rel { cur.0 + x } else { x }, cur.1);
                    segs.push(PathSeg::LineTo(cur.0, cur.1));
                }
                b'V' => {
                    let y = lx.number()?;
                    cur = (cur.0, if rel { cur.1 + y } else { y });
                    segs.push(PathSeg::LineTo(cur.0, cur.1));
                }
                b'C' => {
                    let c1 = pt(&mut lx)?;
                    let c2 = pt(&mut lx)?;
                    let to = pt(&mut lx)?;
                    segs.push(PathSeg::Cubic { c1, c2, to });
                    cubic_ctrl = Some(c2);
                    cur = to;
                }
                b'S' => {
                    let c1 = match last_cubic_ctrl {
                        Some(c) => (2.0 * cur.0 - c.0, 2.0 * cur.1 - c.1),
                        None => cur,
                    };
                    let c2 = pt(&mut lx)?;
                    let to = pt(&mut lx)?;
                    segs.push(PathSeg::Cubic { c1, c2, to });
                    cubic_ctrl = Some(c2);
                    cur = to;
                }
                b'Q' => {
                    let c = pt(&mut lx)?;
                    let to = pt(&mut lx)?;
                    segs.push(PathSeg::Quad { c, to });
                    quad_ctrl = Some(c);
                    cur = to;
                }
                b'T' => {
                    let c = match last_quad_ctrl {
                        Some(q) => (2.0 * cur.0 - q.0, 2.0 * cur.1 - q.1),
                        None => cur,
                    };
                    let to = pt(&mut lx)?;
                    segs.push(PathSeg::Quad { c, to });
                    quad_ctrl = Some(c);
                    cur = to;
                }
                b'A' => {
                    let rx = lx.number()?.abs();
                    let ry = lx.number()?.abs();
                    let rotation = lx.number()?;
                    let large = lx.flag()?;
                    let sweep = lx.flag()?;
                    let to = pt(&mut lx)?;
                    segs.push(PathSeg::Arc { rx, ry, rotation, large, sweep, to });
                    cur = to;
                }
                b'Z' => {
                    segs.push(PathSeg::Close);
                    cur = start;
                }
                _ => return None,
            }
            last_cubic_ctrl = cubic_ctrl;
            last_quad_ctrl = quad_ctrl;
            cmd = Some(next);
        }
        Some(PathData(segs))
    }

    pub fn to_svg_string(&self) -> String {
        let mut out = String::new();
        for seg in &self.0 {
            if !out.is_empty() {
                out.push(' ');
            }
            let _ = match *seg {
                PathSeg::MoveTo(x, y) => write!(out, "M{x} {y}"),
                PathSeg::LineTo(x, y) => write!(out, "L{x} {y}"),
                PathSeg::Cubic { c1, c2, to } => {
                    write!(out, "C{} {} {} {} {} {}", c1.0, c1.1, c2.0, c2.1, to.0, to.1)
                }
                PathSeg::Quad { c, to } => write!(out, "Q{} {} {} {}", c.0, c.1, to.0, to.1),
                PathSeg::Arc { rx, ry, rotation, large, sweep, to } => write!(
                    out,
                    "A{rx} {ry} {rotation} {} {} {} {}",
                    u8::from(large),
                    u8::from(sweep),
                    to.0,
                    to.1
                ),
                PathSeg::Close => write!(out, "Z"),
            };
        }
        out
    }

    /// Points that bound the path: endpoints, Bezier control points, and
    /// dense samples along arcs. Conservative for Beziers.
    pub fn hull_points(&self) -> Vec<(f64, f64)> {
        let mut pts = Vec::new();
        let mut cur = (0.0, 0.0);
        let mut start = (0.0, 0.0);
        for seg in &self.0 {
            match *seg {
                PathSeg::MoveTo(x, y) => {
                    cur = (x, y);
                    start = cur;
                    pts.push(cur);
                }
                PathSeg::LineTo(x, y) => {
                    cur = (x, y);
                    pts.push(cur);
                }
                PathSeg::Cubic { c1, c2, to } => {
                    pts.extend([c1, c2, to]);
                    cur = to;
                }
                PathSeg::Quad { c, to } => {
                    pts.extend([c, to]);
                    cur = to;
                }
                PathSeg::Arc { rx, ry, rotation, large, sweep, to } => {
                    arc_points(cur, rx, ry, rotation, large, sweep, to, 64, &mut pts);
                    cur = to;
                }
                PathSeg::Close => cur = start,
            }
        }
        pts
    }

    /// Flattens into polylines in the coordinate space given by `m`.
    /// Each returned subpath carries whether it was explicitly closed.
    pub fn flatten(&self, m: &Affine) -> Vec<(Vec<(f64, f64)>, bool)> {
        let mut out: Vec<(Vec<(f64, f64)>, bool)> = Vec::new();
        let mut cur_local = (0.0, 0.0);
        let mut start_local = (0.0, 0.0);
        let mut current: Vec<(f64, f64)> = Vec::new();
        let dev = |p: (f64, f64)| m.apply(p.0, p.1);
        let steps_for = |pts: &[(f64, f64)]| -> usize {
            let len: f64 = pts
                .windows(2)
                .map(|w| {
                    let (a, b) = (dev(w[0]), dev(w[1]));
                    (a.0 - b.0).hypot(a.1 - b.1)
                })
                .sum();
            ((len / 3.0).ceil() as usize).clamp(4, 256)
        };
        for seg in &self.0 {
            match *seg {
                PathSeg::MoveTo(x, y) => {
                    if current.len() > 1 {
                        out.push((std::mem::take(&mut current), false));
                    }
                    current.clear();
                    cur_local = (x, y);
                    start_local = cur_local;
                    current.push(dev(cur_local));
                }
                PathSeg::LineTo(x, y) => {
                    cur_local = (x, y);
                    current.push(dev(cur_local));
                }
                PathSeg::Cubic { c1, c2, to } => {
                    let p0 = cur_local;
                    let n = steps_for(&[p0, c1, c2, to]);
                    for k in 1..=n {
                        let t = k as f64 / n as f64;
                        let u = 1.0 - t;
                        let x = u * u * u * p0.0 + 3.0 * u * u * t * c1.0 + 3.0 * u * t * t * c2.0 + t * t * t * to.0;
                        let y = u * u * u * p0.1 + 3.0 * u * u * t * c1.1 + 3.0 * u * t * t * c2.1 + t * t * t * to.1;
                        current.push(dev((x, y)));
                    }
                    cur_local = to;
                }
                PathSeg::Quad { c, to } => {
                    let p0 = cur_local;
                    let n = steps_for(&[p0, c, to]);
                    for k in 1..=n {
                        let t = k as f64 / n as f64;
                        let u = 1.0 - t;
                        let x = u * u * p0.0 + 2.0 * u * t * c.0 + t * t * to.0;
                        let y = u * u * p0.1 + 2.0 * u * t * c.1 + t * t * to.1;
                        current.push(dev((x, y)));
                    }
                    cur_local = to;
                }
                PathSeg::Arc { rx, ry, rotation, large, sweep, to } => {
                    let mut pts = Vec::new();
                    let scale = m.mean_scale().max(1e-9);
                    let n = (((rx.max(ry) * scale * 2.0 * PI) / 3.0).ceil() as usize).clamp(8, 512);
                    arc_points(cur_local, rx, ry, rotation, large, sweep, to, n, &mut pts);
                    current.extend(pts.into_iter().skip(1).map(dev));
                    cur_local = to;
                }
                PathSeg::Close => {
                    if current.len() > 1 {
                        out.push((std::mem::take(&mut current), true));
                    }
                    cur_local = start_local;
                    current.push(dev(cur_local));
                }
            }
        }
        if current.len() > 1 {
            out.push((current, false));
        }
        out
    }
}

/// Samples an endpoint-parameterized elliptical arc, including both ends.
#[allow(clippy::too_many_arguments)]
fn arc_points(
    from: (f64, f64),
    rx: f64,
    ry: f64,
    rotation: f64,
    large: bool,
    sweep: bool,
    to: (f64, f64),
    segments: usize,
    out: &mut Vec<(f64, f64)>,
) {
    let (mut rx, mut ry) = (rx.abs(), ry.abs());
    if rx == 0.0 || ry == 0.0 || from == to {
        out.extend([from, to]);
        return;
    }
    let (sin_phi, cos_phi) = rotation.to_radians().sin_cos();
    let dx = (from.0 - to.0) / 2.0;
    let dy = (from.1 - to.1) / 2.0;
    let x1p = cos_phi * dx + sin_phi * dy;
    let y1p = -sin_phi * dx + cos_phi * dy;
    let lambda = (x1p * x1p) / (rx * rx) + (y1p * y1p) / (ry * ry);
    if lambda > 1.0 {
        let s = lambda.sqrt();
        rx *= s;
        ry *= s;
    }
    let num = rx * rx * ry * ry - rx * rx * y1p * y1p - ry * ry * x1p * x1p;
    let den = rx * rx * y1p * y1p + ry * ry * x1p * x1p;
    let mut coef = if den == 0.0 { 0.0 } else { (num / den).max(0.0).sqrt() };
    if large == sweep {
        coef = -coef;
    }
    let cxp = coef * rx * y1p / ry;
    let cyp = -coef * ry * x1p / rx;
    let cx = cos_phi * cxp - sin_phi * cyp + (from.0 + to.0) / 2.0;
    let cy = sin_phi * cxp + cos_phi * cyp + (from.1 + to.1) / 2.0;
    let angle = |ux: f64, uy: f64, vx: f64, vy: f64| (ux * vy - uy * vx).atan2(ux * vx + uy * vy);
    let ux = (x1p - cxp) / rx;
    let uy = (y1p - cyp) / ry;
    let vx = (-x1p - cxp) / rx;
    let vy = (-y1p - cyp) / ry;
    let theta1 = angle(1.0, 0.0, ux, uy);
    let mut delta = angle(ux, uy, vx, vy);
    if !sweep && delta > 0.0 {
        delta -= 2.0 * PI;
    } else if sweep && delta < 0.0 {
        delta += 2.0 * PI;
    }
    if !(cx.is_finite() && cy.is_finite() && delta.is_finite()) {
        out.extend([from, to]);
        return;
    }
    let n = ((segments as f64 * delta.abs() / (2.0 * PI)).ceil() as usize).max(2);
    out.push(from);
    for k in 1..n {
        let th = theta1 + delta * k as f64 / n as f64;
        let (s, c) = th.sin_cos();
        out.push((cx + rx * c * cos_phi - ry * s * sin_phi, cy + rx * c * sin_phi + ry * s * cos_phi));
    }
    out.push(to);
}
