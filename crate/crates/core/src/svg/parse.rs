use std::collections::BTreeMap;

use super::color::Rgba;
use super::path::PathData;
use super::transform::parse_list;
use super::{
    Element, FillRule, Node, Paint, PaintValue, Shape, SvgDoc, SvgError, SvgSource, ViewBox, SVG_NS,
};

/// Elements dropped together with their content.
const IGNORED: &[&str] = &["title", "desc", "metadata"];
const DEFAULT_FONT_SIZE: f64 = 16.0;

pub fn parse_svg(source: &SvgSource) -> Result<SvgDoc, SvgError> {
    let xml = roxmltree::Document::parse(source.as_str()).map_err(|e| SvgError::XmlMalformed {
        position: e.pos().to_string(),
        message: e.to_string(),
    })?;
    let root = xml.root_element();
    check_namespace(&root)?;
    if root.tag_name().name() != "svg" {
        return Err(SvgError::UnsupportedElement(root.tag_name().name().to_string()));
    }
    let attrs = attributes(&root)?;

    let view_box = match attrs.get("viewBox") {
        Some(v) => Some(parse_view_box(v)?),
        None => None,
    };
    let dim = |name: &str, from_box: Option<f64>| -> Result<f64, SvgError> {
        match attrs.get(name) {
            Some(v) if v.trim().ends_with('%') => {
                from_box.ok_or_else(|| SvgError::BadAttribute(name.into(), v.clone()))
            }
            Some(v) => parse_length(name, v),
            None => from_box.ok_or_else(|| SvgError::BadAttribute(name.into(), String::new())),
        }
    };
    let width = dim("width", view_box.map(|b| b.width))?;
    let height = dim("height", view_box.map(|b| b.height))?;
    let viewport = view_box.unwrap_or(ViewBox { x: 0.0, y: 0.0, width, height });

    let ctx = Ctx { viewport };
    let mut nodes = children(&root, &ctx)?;
    let root_paint = paint(&attrs)?;
    if root_paint != Paint::default() {
        let mut g = Element::group(nodes);
        g.paint = root_paint;
        nodes = vec![Node::Element(g)];
    }
    Ok(SvgDoc { width, height, view_box, nodes })
}

struct Ctx {
    viewport: ViewBox,
}

fn check_namespace(node: &roxmltree::Node) -> Result<(), SvgError> {
    match node.tag_name().namespace() {
        None => Ok(()),
        Some(ns) if ns == SVG_NS => Ok(()),
        Some(_) => Err(SvgError::UnsupportedElement(node.tag_name().name().to_string())),
    }
}

fn children(node: &roxmltree::Node, ctx: &Ctx) -> Result<Vec<Node>, SvgError> {
    let mut out = Vec::new();
    for child in node.children() {
        if child.is_comment() {
            out.push(Node::Comment(child.text().unwrap_or_default().to_string()));
        } else if child.is_element() {
            if let Some(el) = element(&child, ctx)? {
                out.push(Node::Element(el));
            }
        }
    }
    Ok(out)
}

/// Local attribute names to values, with `style` declarations merged in.
/// Rejects event handlers and any reference-carrying attribute.
fn attributes(node: &roxmltree::Node) -> Result<BTreeMap<String, String>, SvgError> {
    let mut map = BTreeMap::new();
    for a in node.attributes() {
        let name = a.name();
        let lower = name.to_ascii_lowercase();
        let value_lower = a.value().to_ascii_lowercase();
        if lower.starts_with("on")
            || lower == "href"
            || lower == "src"
            || value_lower.contains("javascript:")
            || value_lower.contains("url(")
        {
            return Err(SvgError::BadAttribute(name.to_string(), a.value().to_string()));
        }
        if a.namespace().is_some() {
            continue;
        }
        if name == "style" {
            for decl in a.value().split(';') {
                if let Some((k, v)) = decl.split_once(':') {
                    map.insert(k.trim().to_string(), v.trim().to_string());
                }
            }
        } else {
            map.insert(name.to_string(), a.value().to_string());
        }
    }
    Ok(map)
}

fn number(name: &str, v: &str) -> Result<f64, SvgError> {
    v.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| SvgError::BadAttribute(name.to_string(), v.to_string()))
}

fn parse_length(name: &str, v: &str) -> Result<f64, SvgError> {
    let t = v.trim();
    number(name, t.strip_suffix("px").unwrap_or(t))
}

fn parse_view_box(v: &str) -> Result<ViewBox, SvgError> {
    let nums: Vec<f64> = v
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| number("viewBox", s))
        .collect::<Result<_, _>>()
        .map_err(|_| SvgError::BadAttribute("viewBox".into(), v.into()))?;
    match nums.as_slice() {
        [x, y, w, h] if *w >= 0.0 && *h >= 0.0 => Ok(ViewBox { x: *x, y: *y, width: *w, height: *h }),
        _ => Err(SvgError::BadAttribute("viewBox".into(), v.into())),
    }
}

fn paint_value(name: &str, v: &str) -> Result<Option<PaintValue>, SvgError> {
    let t = v.trim();
    match t.to_ascii_lowercase().as_str() {
        "inherit" => Ok(None),
        "none" | "transparent" => Ok(Some(PaintValue::None)),
        _ => Rgba::parse(t)
            .map(|c| Some(PaintValue::Color(c)))
            .ok_or_else(|| SvgError::BadAttribute(name.to_string(), v.to_string())),
    }
}

fn unit_interval(name: &str, v: &str) -> Result<f64, SvgError> {
    let t = v.trim();
    let x = match t.strip_suffix('%') {
        Some(p) => number(name, p)? / 100.0,
        None => number(name, t)?,
    };
    Ok(x.clamp(0.0, 1.0))
}

fn paint(attrs: &BTreeMap<String, String>) -> Result<Paint, SvgError> {
    let mut p = Paint::default();
    for (k, v) in attrs {
        match k.as_str() {
            "fill" => p.fill = paint_value(k, v)?,
            "stroke" => p.stroke = paint_value(k, v)?,
            "stroke-width" => {
                let w = parse_length(k, v)?;
                if w < 0.0 {
                    return Err(SvgError::BadAttribute(k.clone(), v.clone()));
                }
                p.stroke_width = Some(w);
            }
            "fill-rule" => {
                p.fill_rule = Some(match v.trim() {
                    "nonzero" => FillRule::NonZero,
                    "evenodd" => FillRule::EvenOdd,
                    _ => return Err(SvgError::BadAttribute(k.clone(), v.clone())),
                })
            }
            "opacity" => p.opacity = Some(unit_interval(k, v)?),
            "fill-opacity" => p.fill_opacity = Some(unit_interval(k, v)?),
            "stroke-opacity" => p.stroke_opacity = Some(unit_interval(k, v)?),
            _ => {}
        }
    }
    Ok(p)
}

fn points(name: &str, v: &str) -> Result<Vec<(f64, f64)>, SvgError> {
    let nums: Vec<f64> = v
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| number(name, s))
        .collect::<Result<_, _>>()
        .map_err(|_| SvgError::BadAttribute(name.into(), v.into()))?;
    if !nums.len().is_multiple_of(2) {
        return Err(SvgError::BadAttribute(name.into(), v.into()));
    }
    Ok(nums.chunks(2).map(|c| (c[0], c[1])).collect())
}

fn text_content(node: &roxmltree::Node) -> Result<String, SvgError> {
    let mut s = String::new();
    for d in node.descendants().skip(1) {
        if d.is_element() {
            check_namespace(&d)?;
            if d.tag_name().name() != "tspan" {
                return Err(SvgError::UnsupportedElement(d.tag_name().name().to_string()));
            }
            attributes(&d)?;
        } else if d.is_text() {
            s.push_str(d.text().unwrap_or_default());
        }
    }
    Ok(s.split_whitespace().collect::<Vec<_>>().join(" "))
}

fn element(node: &roxmltree::Node, ctx: &Ctx) -> Result<Option<Element>, SvgError> {
    check_namespace(node)?;
    let tag = node.tag_name().name();
    if IGNORED.contains(&tag) {
        return Ok(None);
    }
    let attrs = attributes(node)?;
    let len = |name: &str, default: f64| -> Result<f64, SvgError> {
        attrs.get(name).map_or(Ok(default), |v| parse_length(name, v))
    };
    let non_negative = |name: &str, v: f64| -> Result<f64, SvgError> {
        if v < 0.0 {
            Err(SvgError::BadAttribute(name.into(), v.to_string()))
        } else {
            Ok(v)
        }
    };
    // percent lengths allowed on rect width/height only
    let rect_len = |name: &str, reference: f64| -> Result<f64, SvgError> {
        match attrs.get(name) {
            None => Ok(0.0),
            Some(v) => match v.trim().strip_suffix('%') {
                Some(p) => Ok(number(name, p)? / 100.0 * reference),
                None => parse_length(name, v),
            },
        }
    };
    let shape = match tag {
        "rect" => {
            let width = non_negative("width", rect_len("width", ctx.viewport.width)?)?;
            let height = non_negative("height", rect_len("height", ctx.viewport.height)?)?;
            let rx_attr = attrs.get("rx").map(|v| parse_length("rx", v)).transpose()?;
            let ry_attr = attrs.get("ry").map(|v| parse_length("ry", v)).transpose()?;
            let rx = non_negative("rx", rx_attr.or(ry_attr).unwrap_or(0.0))?.min(width / 2.0);
            let ry = non_negative("ry", ry_attr.or(rx_attr).unwrap_or(0.0))?.min(height / 2.0);
            Shape::Rect { x: len("x", 0.0)?, y: len("y", 0.0)?, width, height, rx, ry }
        }
        "circle" => Shape::Circle {
            cx: len("cx", 0.0)?,
            cy: len("cy", 0.0)?,
            r: non_negative("r", len("r", 0.0)?)?,
        },
        "ellipse" => Shape::Ellipse {
            cx: len("cx", 0.0)?,
            cy: len("cy", 0.0)?,
            rx: non_negative("rx", len("rx", 0.0)?)?,
            ry: non_negative("ry", len("ry", 0.0)?)?,
        },
        "line" => Shape::Line {
            x1: len("x1", 0.0)?,
            y1: len("y1", 0.0)?,
            x2: len("x2", 0.0)?,
            y2: len("y2", 0.0)?,
        },
        "polyline" => Shape::Polyline(points("points", attrs.get("points").map_or("", |s| s))?),
        "polygon" => Shape::Polygon(points("points", attrs.get("points").map_or("", |s| s))?),
        "path" => {
            let d = attrs.get("d").map_or("", |s| s);
            Shape::Path(PathData::parse(d).ok_or_else(|| SvgError::BadAttribute("d".into(), d.into()))?)
        }
        "text" => Shape::Text {
            x: len("x", 0.0)?,
            y: len("y", 0.0)?,
            font_size: non_negative("font-size", len("font-size", DEFAULT_FONT_SIZE)?)?,
            content: text_content(node)?,
        },
        "g" => Shape::Group(children(node, ctx)?),
        other => return Err(SvgError::UnsupportedElement(other.to_string())),
    };
    let transform = match attrs.get("transform") {
        Some(v) => parse_list(v).ok_or_else(|| SvgError::BadAttribute("transform".into(), v.clone()))?,
        None => Vec::new(),
    };
    let id = match attrs.get("id") {
        Some(v) if !v.is_empty() && v.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') => {
            Some(v.clone())
        }
        Some(v) => return Err(SvgError::BadAttribute("id".into(), v.clone())),
        None => None,
    };
    Ok(Some(Element { id, shape, paint: paint(&attrs)?, transform }))
}
