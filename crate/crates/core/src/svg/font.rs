//! Built-in stroke font used for `<text>`. Uppercase glyphs on a 4 x 6 grid
//! (y = 0 at cap height, y = 6 on the baseline); lowercase input is drawn
//! with the uppercase glyph. Unknown characters render as an open box.

/// Cap height as a fraction of the font size.
pub const CAP_HEIGHT_RATIO: f64 = 0.7;
/// Horizontal advance as a fraction of the font size.
const ADVANCE_RATIO: f64 = 0.6;
/// Stroke width as a fraction of the font size.
pub(crate) const STROKE_RATIO: f64 = 0.09;

fn glyph(c: char) -> Option<&'static str> {
    Some(match c.to_ascii_uppercase() {
        ' ' => "",
        'A' => "0,6 0,2 2,0 4,2 4,6;0,3 4,3",
        'B' => "0,6 0,0 3,0 4,1 4,2 3,3 0,3;3,3 4,4 4,5 3,6 0,6",
        'C' => "4,0 0,0 0,6 4,6",
        'D' => "0,0 0,6 2,6 4,4 4,2 2,0 0,0",
        'E' => "4,0 0,0 0,6 4,6;0,3 3,3",
        'F' => "4,0 0,0 0,6;0,3 3,3",
        'G' => "4,1 4,0 0,0 0,6 4,6 4,3 2,3",
        'H' => "0,0 0,6;4,0 4,6;0,3 4,3",
        'I' => "1,0 3,0;2,0 2,6;1,6 3,6",
        'J' => "4,0 4,6 0,6 0,4",
        'K' => "0,0 0,6;4,0 0,3 4,6",
        'L' => "0,0 0,6 4,6",
        'M' => "0,6 0,0 2,3 4,0 4,6",
        'N' => "0,6 0,0 4,6 4,0",
        'O' => "0,0 4,0 4,6 0,6 0,0",
        'P' => "0,6 0,0 4,0 4,3 0,3",
        'Q' => "0,0 4,0 4,6 0,6 0,0;2,4 4,6",
        'R' => "0,6 0,0 4,0 4,3 0,3 4,6",
        'S' => "4,0 0,0 0,3 4,3 4,6 0,6",
        'T' => "0,0 4,0;2,0 2,6",
        'U' => "0,0 0,6 4,6 4,0",
        'V' => "0,0 2,6 4,0",
        'W' => "0,0 1,6 2,3 3,6 4,0",
        'X' => "0,0 4,6;4,0 0,6",
        'Y' => "0,0 2,3 4,0;2,3 2,6",
        'Z' => "0,0 4,0 0,6 4,6",
        '0' => "0,0 4,0 4,6 0,6 0,0;0,6 4,0",
        '1' => "1,1 2,0 2,6;1,6 3,6",
        '2' => "0,0 4,0 4,3 0,3 0,6 4,6",
        '3' => "0,0 4,0 4,6 0,6;0,3 4,3",
        '4' => "0,0 0,3 4,3;4,0 4,6",
        '5' => "4,0 0,0 0,3 4,3 4,6 0,6",
        '6' => "4,0 0,0 0,6 4,6 4,3 0,3",
        '7' => "0,0 4,0 2,6",
        '8' => "0,0 4,0 4,6 0,6 0,0;0,3 4,3",
        '9' => "4,3 0,3 0,0 4,0 4,6 0,6",
        '.' => "2,5.5 2,6",
        ',' => "2,5 1.5,7",
        ':' => "2,1.5 2,2;2,5 2,5.5",
        ';' => "2,1.5 2,2;2,5 1.5,7",
        '!' => "2,0 2,4;2,5.5 2,6",
        '?' => "0,1 0,0 4,0 4,3 2,3 2,4;2,5.5 2,6",
        '-' => "1,3 3,3",
        '+' => "0,3 4,3;2,1 2,5",
        '=' => "0,2 4,2;0,4 4,4",
        '/' => "0,6 4,0",
        '\\' => "0,0 4,6",
        '(' => "3,0 1,2 1,4 3,6",
        ')' => "1,0 3,2 3,4 1,6",
        '[' => "3,0 1,0 1,6 3,6",
        ']' => "1,0 3,0 3,6 1,6",
        '\'' => "2,0 2,1.5",
        '"' => "1,0 1,1.5;3,0 3,1.5",
        '%' => "0,6 4,0;0,0 1,0 1,1 0,1 0,0;3,5 4,5 4,6 3,6 3,5",
        '#' => "1,0 1,6;3,0 3,6;0,2 4,2;0,4 4,4",
        '*' => "2,1 2,5;0,2 4,4;4,2 0,4",
        '°' => "1,0 2,0 2,1 1,1 1,0",
        '•' => "1.5,2.5 2.5,2.5 2.5,3.5 1.5,3.5 1.5,2.5",
        '_' => "0,6 4,6",
        '<' => "4,0 0,3 4,6",
        '>' => "0,0 4,3 0,6",
        '&' => "4,6 0,1 1,0 2,1 0,4 1,6 3,6 4,4",
        '@' => "3,4 3,2 1,2 1,4 4,4 4,0 0,0 0,6 4,6",
        _ => return None,
    })
}

const UNKNOWN: &str = "0,0 4,0 4,6 0,6 0,0";

/// Width of `text` at `font_size`.
pub fn text_advance(text: &str, font_size: f64) -> f64 {
    text.chars().count() as f64 * font_size * ADVANCE_RATIO
}

/// Stroke polylines for `text` with its baseline-left corner at `(x, y)`.
pub(crate) fn text_strokes(text: &str, x: f64, y: f64, font_size: f64) -> Vec<Vec<(f64, f64)>> {
    let unit = font_size * CAP_HEIGHT_RATIO / 6.0;
    let advance = font_size * ADVANCE_RATIO;
    let mut out = Vec::new();
    for (i, ch) in text.chars().enumerate() {
        let def = glyph(ch).unwrap_or(UNKNOWN);
        let ox = x + i as f64 * advance + (advance - 4.0 * unit) / 2.0;
        let oy = y - 6.0 * unit;
        for stroke in def.split(';').filter(|s| !s.is_empty()) {
            let pts: Vec<(f64, f64)> = stroke
                .split(' ')
                .filter_map(|p| {
                    let (a, b) = p.split_once(',')?;
                    Some((ox + a.parse::<f64>().ok()? * unit, oy + b.parse::<f64>().ok()? * unit))
                })
                .collect();
            out.push(pts);
        }
    }
    out
}
