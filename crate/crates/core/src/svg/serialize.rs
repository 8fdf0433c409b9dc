use std::fmt::Write as _;

use super::transform::format_list;
use super::{Element, FillRule, Node, Paint, PaintValue, Shape, SvgDoc, SvgSource, SVG_NS};

/// Canonical standalone SVG text. Deterministic: the same document always
/// yields the same bytes.
pub fn serialize(doc: &SvgDoc) -> SvgSource {
    let mut out = String::new();
    let _ = write!(out, r#"<svg xmlns="{SVG_NS}" width="{}" height="{}""#, doc.width, doc.height);
    if let Some(vb) = doc.view_box {
        let _ = write!(out, r#" viewBox="{} {} {} {}""#, vb.x, vb.y, vb.width, vb.height);
    }
    if doc.nodes.is_empty() {
        out.push_str("/>\n");
        return SvgSource(out);
    }
    out.push_str(">\n");
    write_nodes(&mut out, &doc.nodes, 1);
    out.push_str("</svg>\n");
    SvgSource(out)
}

fn write_nodes(out: &mut String, nodes: &[Node], depth: usize) {
    for node in nodes {
        indent(out, depth);
        match node {
            Node::Comment(c) => {
                let _ = writeln!(out, "<!--{}-->", c.replace("--", "- -"));
            }
            Node::Element(e) => write_element(out, e, depth),
        }
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn points(pts: &[(f64, f64)]) -> String {
    pts.iter().map(|(x, y)| format!("{x},{y}")).collect::<Vec<_>>().join(" ")
}

fn write_element(out: &mut String, e: &Element, depth: usize) {
    let _ = write!(out, "<{}", e.shape.tag());
    if let Some(id) = &e.id {
        let _ = write!(out, r#" id="{}""#, escape(id));
    }
    match &e.shape {
        Shape::Rect { x, y, width, height, rx, ry } => {
            let _ = write!(out, r#" x="{x}" y="{y}" width="{width}" height="{height}""#);
            if *rx != 0.0 || *ry != 0.0 {
                let _ = write!(out, r#" rx="{rx}" ry="{ry}""#);
            }
        }
        Shape::Circle { cx, cy, r } => {
            let _ = write!(out, r#" cx="{cx}" cy="{cy}" r="{r}""#);
        }
        Shape::Ellipse { cx, cy, rx, ry } => {
            let _ = write!(out, r#" cx="{cx}" cy="{cy}" rx="{rx}" ry="{ry}""#);
        }
        Shape::Line { x1, y1, x2, y2 } => {
            let _ = write!(out, r#" x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}""#);
        }
        Shape::Polyline(p) | Shape::Polygon(p) => {
            let _ = write!(out, r#" points="{}""#, points(p));
        }
        Shape::Path(d) => {
            let _ = write!(out, r#" d="{}""#, d.to_svg_string());
        }
        Shape::Text { x, y, font_size, .. } => {
            let _ = write!(out, r#" x="{x}" y="{y}" font-size="{font_size}""#);
        }
        Shape::Group(_) => {}
    }
    write_paint(out, &e.paint);
    if !e.transform.is_empty() {
        let _ = write!(out, r#" transform="{}""#, format_list(&e.transform));
    }
    match &e.shape {
        Shape::Group(children) if !children.is_empty() => {
            out.push_str(">\n");
            write_nodes(out, children, depth + 1);
            indent(out, depth);
            out.push_str("</g>\n");
        }
        Shape::Text { content, .. } => {
            let _ = writeln!(out, ">{}</text>", escape(content));
        }
        _ => out.push_str("/>\n"),
    }
}

fn write_paint(out: &mut String, p: &Paint) {
    let value = |v: &PaintValue| match v {
        PaintValue::None => "none".to_string(),
        PaintValue::Color(c) => c.to_string(),
    };
    if let Some(v) = &p.fill {
        let _ = write!(out, r#" fill="{}""#, value(v));
    }
    if let Some(v) = &p.stroke {
        let _ = write!(out, r#" stroke="{}""#, value(v));
    }
    if let Some(w) = p.stroke_width {
        let _ = write!(out, r#" stroke-width="{w}""#);
    }
    if let Some(rule) = p.fill_rule {
        let name = match rule {
            FillRule::NonZero => "nonzero",
            FillRule::EvenOdd => "evenodd",
        };
        let _ = write!(out, r#" fill-rule="{name}""#);
    }
    if let Some(o) = p.opacity {
        let _ = write!(out, r#" opacity="{o}""#);
    }
    if let Some(o) = p.fill_opacity {
        let _ = write!(out, r#" fill-opacity="{o}""#);
    }
    if let Some(o) = p.stroke_opacity {
        let _ = write!(out, r#" stroke-opacity="{o}""#);
    }
}
