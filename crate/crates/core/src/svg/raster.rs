//! Painter's-algorithm rasterizer.
//!
//! Coverage is binary, sampled at pixel centers, so output is bit-exact
//! across runs and platforms. Filled rects, circles and ellipses are tested
//! analytically in their local space; polygons and paths are scan-converted
//! in device space; strokes mark every pixel center within half the device
//! stroke width of a segment (round joins and caps). Group opacity is
//! multiplied into each child rather than composited as a layer.

use super::font::{text_strokes, STROKE_RATIO};
use super::path::PathData;
use super::transform::{compose, Affine};
use super::{
    bounds::element_bounds, Element, FillRule, Node, PaintValue, ResolvedPaint, Rgba, Shape, SvgDoc,
    SvgError,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    pub width: u32,
    pub height: u32,
    /// Row-major RGBA8.
    pub pixels: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, pixels: vec![0; width as usize * height as usize * 4] }
    }

    pub fn filled(width: u32, height: u32, color: Rgba) -> Self {
        let mut img = Self::new(width, height);
        for px in img.pixels.chunks_exact_mut(4) {
            px.copy_from_slice(&[color.r, color.g, color.b, color.a]);
        }
        img
    }

    pub fn pixel(&self, x: u32, y: u32) -> Rgba {
        let i = (y as usize * self.width as usize + x as usize) * 4;
        let p = &self.pixels[i..i + 4];
        Rgba { r: p[0], g: p[1], b: p[2], a: p[3] }
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, c: Rgba) {
        let i = (y as usize * self.width as usize + x as usize) * 4;
        self.pixels[i..i + 4].copy_from_slice(&[c.r, c.g, c.b, c.a]);
    }

    /// Pixels with any alpha.
    pub fn painted_count(&self) -> usize {
        self.pixels.chunks_exact(4).filter(|p| p[3] > 0).count()
    }

    pub fn opaque_count(&self) -> usize {
        self.pixels.chunks_exact(4).filter(|p| p[3] == 255).count()
    }

    /// 8-bit RGBA, non-interlaced PNG.
    pub fn to_png(&self) -> Result<Vec<u8>, SvgError> {
        let mut buf = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut buf, self.width, self.height);
            enc.set_color(png::ColorType::Rgba);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().map_err(|e| SvgError::Png(e.to_string()))?;
            w.write_image_data(&self.pixels).map_err(|e| SvgError::Png(e.to_string()))?;
        }
        Ok(buf)
    }

    fn blend(&mut self, x: u32, y: u32, c: Rgba, opacity: f64) {
        let sa = f64::from(c.a) / 255.0 * opacity;
        if sa <= 0.0 {
            return;
        }
        let i = (y as usize * self.width as usize + x as usize) * 4;
        let dst = &mut self.pixels[i..i + 4];
        if sa >= 1.0 {
            dst.copy_from_slice(&[c.r, c.g, c.b, 255]);
            return;
        }
        let da = f64::from(dst[3]) / 255.0;
        let oa = sa + da * (1.0 - sa);
        let mix = |s: u8, d: u8| -> u8 {
            ((f64::from(s) * sa + f64::from(d) * da * (1.0 - sa)) / oa).round().clamp(0.0, 255.0) as u8
        };
        let out = [mix(c.r, dst[0]), mix(c.g, dst[1]), mix(c.b, dst[2]), (oa * 255.0).round() as u8];
        dst.copy_from_slice(&out);
    }
}

/// Reads an 8-bit RGBA PNG back into an image.
pub fn decode_png(bytes: &[u8]) -> Result<RasterImage, SvgError> {
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(|e| SvgError::Png(e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size().ok_or_else(|| SvgError::Png("size overflow".into()))?];
    let info = reader.next_frame(&mut buf).map_err(|e| SvgError::Png(e.to_string()))?;
    if info.color_type != png::ColorType::Rgba || info.bit_depth != png::BitDepth::Eight {
        return Err(SvgError::Png(format!("unsupported format {:?}/{:?}", info.color_type, info.bit_depth)));
    }
    buf.truncate(info.buffer_size());
    Ok(RasterImage { width: info.width, height: info.height, pixels: buf })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RasterOptions {
    /// 4x4 supersampling. Off by default so output stays bit-exact for
    /// golden comparisons.
    pub antialias: bool,
}

const SUPERSAMPLE: u32 = 4;

pub fn rasterize(doc: &SvgDoc, out_w: u32, out_h: u32) -> Result<RasterImage, SvgError> {
    rasterize_with(doc, out_w, out_h, RasterOptions::default())
}

pub fn rasterize_with(
    doc: &SvgDoc,
    out_w: u32,
    out_h: u32,
    opts: RasterOptions,
) -> Result<RasterImage, SvgError> {
    if !opts.antialias {
        return render(doc, out_w, out_h);
    }
    let hi = render(doc, out_w * SUPERSAMPLE, out_h * SUPERSAMPLE)?;
    let mut out = RasterImage::new(out_w, out_h);
    let n = f64::from(SUPERSAMPLE * SUPERSAMPLE);
    for y in 0..out_h {
        for x in 0..out_w {
            let mut acc = [0.0f64; 4];
            for sy in 0..SUPERSAMPLE {
                for sx in 0..SUPERSAMPLE {
                    let p = hi.pixel(x * SUPERSAMPLE + sx, y * SUPERSAMPLE + sy);
                    let a = f64::from(p.a) / 255.0;
                    acc[0] += f64::from(p.r) * a;
                    acc[1] += f64::from(p.g) * a;
                    acc[2] += f64::from(p.b) * a;
                    acc[3] += a;
                }
            }
            if acc[3] > 0.0 {
                let ch = |v: f64| (v / acc[3]).round().clamp(0.0, 255.0) as u8;
                let a = (acc[3] / n * 255.0).round() as u8;
                out.set_pixel(x, y, Rgba { r: ch(acc[0]), g: ch(acc[1]), b: ch(acc[2]), a });
            }
        }
    }
    Ok(out)
}

/// Uniform scale from the viewport onto an `out_w` x `out_h` raster,
/// centered (letterboxed).
pub fn view_transform(doc: &SvgDoc, out_w: u32, out_h: u32) -> Result<Affine, SvgError> {
    let vp = doc.viewport();
    if !(vp.width > 0.0 && vp.height > 0.0) || out_w == 0 || out_h == 0 {
        return Err(SvgError::ViewportDegenerate);
    }
    let s = (f64::from(out_w) / vp.width).min(f64::from(out_h) / vp.height);
    let tx = (f64::from(out_w) - vp.width * s) / 2.0 - vp.x * s;
    let ty = (f64::from(out_h) - vp.height * s) / 2.0 - vp.y * s;
    Ok(Affine { a: s, b: 0.0, c: 0.0, d: s, e: tx, f: ty })
}

fn render(doc: &SvgDoc, out_w: u32, out_h: u32) -> Result<RasterImage, SvgError> {
    let view = view_transform(doc, out_w, out_h)?;
    let mut img = RasterImage::new(out_w, out_h);
    draw_nodes(&mut img, &doc.nodes, &view, &ResolvedPaint::default());
    Ok(img)
}

fn draw_nodes(img: &mut RasterImage, nodes: &[Node], m: &Affine, paint: &ResolvedPaint) {
    for node in nodes {
        if let Node::Element(e) = node {
            draw_element(img, e, m, paint);
        }
    }
}

/// Inclusive-exclusive pixel range whose centers may fall in `[lo, hi]`.
fn pixel_span(lo: f64, hi: f64, limit: u32) -> (u32, u32) {
    let start = (lo - 0.5).ceil().max(0.0);
    let end = ((hi - 0.5).floor() + 1.0).min(f64::from(limit));
    if !(start < end) {
        return (0, 0);
    }
    (start as u32, end as u32)
}

fn draw_element(img: &mut RasterImage, e: &Element, parent: &Affine, inherited: &ResolvedPaint) {
    let paint = inherited.child(&e.paint);
    let m = parent.then_after(&compose(&e.transform));
    if let Shape::Group(children) = &e.shape {
        draw_nodes(img, children, &m, &paint);
        return;
    }
    let Some(inv) = m.inverse() else { return };
    let stroke_half = paint.stroke_width * m.mean_scale() / 2.0;

    if let PaintValue::Color(fill) = paint.fill {
        match &e.shape {
            Shape::Rect { x, y, width, height, rx, ry } => {
                let (x, y, w, h, rx, ry) = (*x, *y, *width, *height, *rx, *ry);
                fill_analytic(img, e, parent, &inv, fill, paint.fill_opacity, |px, py| {
                    if !(px >= x && px < x + w && py >= y && py < y + h) {
                        return false;
                    }
                    if rx <= 0.0 || ry <= 0.0 {
                        return true;
                    }
                    let cx = px.clamp(x + rx, x + w - rx);
                    let cy = py.clamp(y + ry, y + h - ry);
                    let (dx, dy) = ((px - cx) / rx, (py - cy) / ry);
                    dx * dx + dy * dy <= 1.0
                });
            }
            Shape::Circle { cx, cy, r } => {
                let (cx, cy, r) = (*cx, *cy, *r);
                fill_analytic(img, e, parent, &inv, fill, paint.fill_opacity, |px, py| {
                    let (dx, dy) = (px - cx, py - cy);
                    dx * dx + dy * dy <= r * r
                });
            }
            Shape::Ellipse { cx, cy, rx, ry } => {
                let (cx, cy, rx, ry) = (*cx, *cy, *rx, *ry);
                if rx > 0.0 && ry > 0.0 {
                    fill_analytic(img, e, parent, &inv, fill, paint.fill_opacity, |px, py| {
                        let (dx, dy) = ((px - cx) / rx, (py - cy) / ry);
                        dx * dx + dy * dy <= 1.0
                    });
                }
            }
            Shape::Polyline(pts) | Shape::Polygon(pts) => {
                let poly: Vec<_> = pts.iter().map(|&(x, y)| m.apply(x, y)).collect();
                fill_polygons(img, &[poly], paint.fill_rule, fill, paint.fill_opacity);
            }
            Shape::Path(d) => {
                let polys: Vec<_> = d.flatten(&m).into_iter().map(|(p, _)| p).collect();
                fill_polygons(img, &polys, paint.fill_rule, fill, paint.fill_opacity);
            }
            Shape::Text { x, y, font_size, content } => {
                let strokes: Vec<(Vec<(f64, f64)>, bool)> = text_strokes(content, *x, *y, *font_size)
                    .into_iter()
                    .map(|s| (s.into_iter().map(|(px, py)| m.apply(px, py)).collect(), false))
                    .collect();
                let half = font_size * STROKE_RATIO * m.mean_scale() / 2.0;
                stroke_polylines(img, &strokes, half, fill, paint.fill_opacity);
            }
            Shape::Line { .. } | Shape::Group(_) => {}
        }
    }

    if let PaintValue::Color(stroke) = paint.stroke {
        if stroke_half <= 0.0 {
            return;
        }
        let outlines = outline(&e.shape, &m);
        stroke_polylines(img, &outlines, stroke_half, stroke, paint.stroke_opacity);
    }
}

fn fill_analytic(
    img: &mut RasterImage,
    e: &Element,
    parent: &Affine,
    inv: &Affine,
    color: Rgba,
    opacity: f64,
    inside: impl Fn(f64, f64) -> bool,
) {
    let Some(b) = element_bounds(e, parent) else { return };
    let (x0, x1) = pixel_span(b.x, b.max_x(), img.width);
    let (y0, y1) = pixel_span(b.y, b.max_y(), img.height);
    for py in y0..y1 {
        for px in x0..x1 {
            let (lx, ly) = inv.apply(f64::from(px) + 0.5, f64::from(py) + 0.5);
            if inside(lx, ly) {
                img.blend(px, py, color, opacity);
            }
        }
    }
}

/// Scan-converts closed polygons (device space) at pixel centers.
fn fill_polygons(img: &mut RasterImage, polys: &[Vec<(f64, f64)>], rule: FillRule, color: Rgba, opacity: f64) {
    let mut edges: Vec<((f64, f64), (f64, f64))> = Vec::new();
    for poly in polys.iter().filter(|p| p.len() >= 3) {
        for i in 0..poly.len() {
            let a = poly[i];
            let b = poly[(i + 1) % poly.len()];
            if a.1 != b.1 {
                edges.push((a, b));
            }
        }
    }
    if edges.is_empty() {
        return;
    }
    let min_y = edges.iter().map(|(a, b)| a.1.min(b.1)).fold(f64::INFINITY, f64::min);
    let max_y = edges.iter().map(|(a, b)| a.1.max(b.1)).fold(f64::NEG_INFINITY, f64::max);
    let (y0, y1) = pixel_span(min_y, max_y, img.height);
    let mut crossings: Vec<(f64, i32)> = Vec::new();
    for py in y0..y1 {
        let yc = f64::from(py) + 0.5;
        crossings.clear();
        for &(a, b) in &edges {
            let (lo, hi, dir) = if a.1 < b.1 { (a, b, 1) } else { (b, a, -1) };
            if yc >= lo.1 && yc < hi.1 {
                let t = (yc - lo.1) / (hi.1 - lo.1);
                crossings.push((lo.0 + t * (hi.0 - lo.0), dir));
            }
        }
        crossings.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut winding = 0;
        for w in 0..crossings.len().saturating_sub(1) {
            winding += crossings[w].1;
            let inside = match rule {
                FillRule::NonZero => winding != 0,
                FillRule::EvenOdd => winding % 2 != 0,
            };
            if inside {
                let (x0, x1) = span_centers(crossings[w].0, crossings[w + 1].0, img.width);
                for px in x0..x1 {
                    img.blend(px, py, color, opacity);
                }
            }
        }
    }
}

/// Pixels whose centers lie in `[lo, hi)`.
fn span_centers(lo: f64, hi: f64, limit: u32) -> (u32, u32) {
    let start = (lo - 0.5).ceil().max(0.0);
    let end = (hi - 0.5).ceil().min(f64::from(limit));
    if !(start < end) {
        return (0, 0);
    }
    (start as u32, end as u32)
}

/// Device-space outlines used for stroking.
fn outline(shape: &Shape, m: &Affine) -> Vec<(Vec<(f64, f64)>, bool)> {
    let map = |pts: &[(f64, f64)]| pts.iter().map(|&(x, y)| m.apply(x, y)).collect::<Vec<_>>();
    match shape {
        Shape::Rect { x, y, width, height, rx, ry } => {
            if *rx > 0.0 && *ry > 0.0 {
                let d = format!(
                    "M{} {y} H{} A{rx} {ry} 0 0 1 {} {} V{} A{rx} {ry} 0 0 1 {} {} H{} A{rx} {ry} 0 0 1 {x} {} V{} A{rx} {ry} 0 0 1 {} {y} Z",
                    x + rx, x + width - rx, x + width, y + ry, y + height - ry, x + width - rx, y + height,
                    x + rx, y + height - ry, y + ry, x + rx,
                );
                PathData::parse(&d).map(|p| p.flatten(m)).unwrap_or_default()
            } else {
                vec![(map(&[(*x, *y), (x + width, *y), (x + width, y + height), (*x, y + height)]), true)]
            }
        }
        Shape::Circle { cx, cy, r } => vec![(ellipse_outline(m, *cx, *cy, *r, *r), true)],
        Shape::Ellipse { cx, cy, rx, ry } => vec![(ellipse_outline(m, *cx, *cy, *rx, *ry), true)],
        Shape::Line { x1, y1, x2, y2 } => vec![(map(&[(*x1, *y1), (*x2, *y2)]), false)],
        Shape::Polyline(p) => vec![(map(p), false)],
        Shape::Polygon(p) => vec![(map(p), true)],
        Shape::Path(d) => d.flatten(m),
        Shape::Text { .. } | Shape::Group(_) => Vec::new(),
    }
}

fn ellipse_outline(m: &Affine, cx: f64, cy: f64, rx: f64, ry: f64) -> Vec<(f64, f64)> {
    let dev_r = rx.max(ry) * m.mean_scale();
    let n = ((dev_r * std::f64::consts::TAU / 2.0).ceil() as usize).clamp(16, 2048);
    (0..n)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / n as f64;
            m.apply(cx + rx * t.cos(), cy + ry * t.sin())
        })
        .collect()
}

fn stroke_polylines(
    img: &mut RasterImage,
    lines: &[(Vec<(f64, f64)>, bool)],
    half: f64,
    color: Rgba,
    opacity: f64,
) {
    let mut segs: Vec<((f64, f64), (f64, f64))> = Vec::new();
    for (pts, closed) in lines {
        if pts.len() == 1 {
            segs.push((pts[0], pts[0]));
        }
        for w in pts.windows(2) {
            segs.push((w[0], w[1]));
        }
        if *closed && pts.len() > 2 {
            segs.push((pts[pts.len() - 1], pts[0]));
        }
    }
    if segs.is_empty() {
        return;
    }
    let lo_x = segs.iter().map(|(a, b)| a.0.min(b.0)).fold(f64::INFINITY, f64::min) - half;
    let hi_x = segs.iter().map(|(a, b)| a.0.max(b.0)).fold(f64::NEG_INFINITY, f64::max) + half;
    let lo_y = segs.iter().map(|(a, b)| a.1.min(b.1)).fold(f64::INFINITY, f64::min) - half;
    let hi_y = segs.iter().map(|(a, b)| a.1.max(b.1)).fold(f64::NEG_INFINITY, f64::max) + half;
    let (bx0, bx1) = pixel_span(lo_x, hi_x, img.width);
    let (by0, by1) = pixel_span(lo_y, hi_y, img.height);
    if bx0 >= bx1 || by0 >= by1 {
        return;
    }
    let mw = (bx1 - bx0) as usize;
    let mut mask = vec![false; mw * (by1 - by0) as usize];
    let h2 = half * half;
    for &(a, b) in &segs {
        let (x0, x1) = pixel_span(a.0.min(b.0) - half, a.0.max(b.0) + half, img.width);
        let (y0, y1) = pixel_span(a.1.min(b.1) - half, a.1.max(b.1) + half, img.height);
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let len2 = dx * dx + dy * dy;
        for py in y0..y1 {
            let yc = f64::from(py) + 0.5;
            for px in x0..x1 {
                let xc = f64::from(px) + 0.5;
                let t = if len2 > 0.0 { (((xc - a.0) * dx + (yc - a.1) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
                let (ex, ey) = (a.0 + t * dx - xc, a.1 + t * dy - yc);
                if ex * ex + ey * ey <= h2 {
                    mask[(py - by0) as usize * mw + (px - bx0) as usize] = true;
                }
            }
        }
    }
    for (i, hit) in mask.iter().enumerate() {
        if *hit {
            img.blend(bx0 + (i % mw) as u32, by0 + (i / mw) as u32, color, opacity);
        }
    }
}
