use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rgba {
    pub r: u8,
    pub g: u8,
    pub b: u8,
    pub a: u8,
}

impl Rgba {
    pub const BLACK: Rgba = Rgba::rgb(0, 0, 0);
    pub const WHITE: Rgba = Rgba::rgb(255, 255, 255);
    pub const TRANSPARENT: Rgba = Rgba { r: 0, g: 0, b: 0, a: 0 };

    pub const fn rgb(r: u8, g: u8, b: u8) -> Self {
        Self { r, g, b, a: 255 }
    }

    /// Parses `#rgb`, `#rrggbb`, `rgb(r, g, b)` and named colors.
    /// Returns `None` for anything else.
    pub fn parse(text: &str) -> Option<Rgba> {
        let t = text.trim();
        if let Some(hex) = t.strip_prefix('#') {
            if !hex.bytes().all(|b| b.is_ascii_hexdigit()) {
                return None;
            }
            let digit = |i: usize| u8::from_str_radix(&hex[i..i + 1], 16).ok();
            return match hex.len() {
                3 => Some(Rgba::rgb(digit(0)? * 17, digit(1)? * 17, digit(2)? * 17)),
                6 => {
                    let byte = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).ok();
                    Some(Rgba::rgb(byte(0)?, byte(2)?, byte(4)?))
                }
                _ => None,
            };
        }
        let lower = t.to_ascii_lowercase();
        if let Some(args) = lower.strip_prefix("rgb(").and_then(|r| r.strip_suffix(')')) {
            let parts: Vec<_> = args.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                return None;
            }
            let mut c = [0u8; 3];
            for (slot, p) in c.iter_mut().zip(&parts) {
                *slot = match p.strip_suffix('%') {
                    Some(pct) => {
                        let v: f64 = pct.trim().parse().ok()?;
                        (v.clamp(0.0, 100.0) * 2.55).round() as u8
                    }
                    None => {
                        let v: f64 = p.parse().ok()?;
                        if !v.is_finite() {
                            return None;
                        }
                        v.clamp(0.0, 255.0).round() as u8
                    }
                };
            }
            return Some(Rgba::rgb(c[0], c[1], c[2]));
        }
        named(&lower)
    }
}

impl fmt::Display for Rgba {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{:02x}{:02x}{:02x}", self.r, self.g, self.b)
    }
}

fn named(name: &str) -> Option<Rgba> {
    let (r, g, b) = match name {
        "black" => (0, 0, 0),
        "white" => (255, 255, 255),
        "red" => (255, 0, 0),
        "green" => (0, 128, 0),
        "lime" => (0, 255, 0),
        "blue" => (0, 0, 255),
        "yellow" => (255, 255, 0),
        "orange" => (255, 165, 0),
        "purple" => (128, 0, 128),
        "gray" | "grey" => (128, 128, 128),
        "silver" => (192, 192, 192),
        "brown" => (165, 42, 42),
        "pink" => (255, 192, 203),
        "cyan" | "aqua" => (0, 255, 255),
        "magenta" | "fuchsia" => (255, 0, 255),
        "navy" => (0, 0, 128),
        "teal" => (0, 128, 128),
        "maroon" => (128, 0, 0),
        "olive" => (128, 128, 0),
        "gold" => (255, 215, 0),
        "steelblue" => (70, 130, 180),
        "lightgray" | "lightgrey" => (211, 211, 211),
        "darkgray" | "darkgrey" => (169, 169, 169),
        "dimgray" | "dimgrey" => (105, 105, 105),
        "darkgreen" => (0, 100, 0),
        "lightgreen" => (144, 238, 144),
        "forestgreen" => (34, 139, 34),
        "darkred" => (139, 0, 0),
        "crimson" => (220, 20, 60),
        "firebrick" => (178, 34, 34),
        "tomato" => (255, 99, 71),
        "coral" => (255, 127, 80),
        "darkorange" => (255, 140, 0),
        "orangered" => (255, 69, 0),
        "lightblue" => (173, 216, 230),
        "skyblue" => (135, 206, 235),
        "royalblue" => (65, 105, 225),
        "darkblue" => (0, 0, 139),
        "dodgerblue" => (30, 144, 255),
        "tan" => (210, 180, 140),
        "beige" => (245, 245, 220),
        "khaki" => (240, 230, 140),
        "chocolate" => (210, 105, 30),
        "sienna" => (160, 82, 45),
        "violet" => (238, 130, 238),
        "indigo" => (75, 0, 130),
        "salmon" => (250, 128, 114),
        "turquoise" => (64, 224, 208),
        "ivory" => (255, 255, 240),
        "whitesmoke" => (245, 245, 245),
        "gainsboro" => (220, 220, 220),
        "slategray" | "slategrey" => (112, 128, 144),
        "darkslategray" | "darkslategrey" => (47, 79, 79),
        _ => return None,
    };
    Some(Rgba::rgb(r, g, b))
}
