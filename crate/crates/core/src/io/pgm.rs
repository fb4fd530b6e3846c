//! Portable graymap: plain (P2) input for bitmap objects, 16-bit binary (P5)
//! output for display.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, PartialEq)]
pub struct Graymap {
    pub width: usize,
    pub height: usize,
    pub maxval: u32,
    pub pixels: Vec<u32>,
}

impl Graymap {
    /// Pixel values scaled to amplitudes in [0, 1].
    pub fn normalized(&self) -> Vec<f64> {
        let m = self.maxval as f64;
        self.pixels.iter().map(|&p| p as f64 / m).collect()
    }
}

pub fn read_plain(path: &Path) -> Result<Graymap> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::config(
        "scene.path",
        format!("cannot read {}: {e}", path.display()),
    ))?;
    parse_plain(&text)
}

pub fn parse_plain(text: &str) -> Result<Graymap> {
    let bad = |msg: &str| Error::Format {
        what: "P2 graymap",
        msg: msg.to_string(),
    };
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    if tokens.next() != Some("P2") {
        return Err(bad("missing P2 magic"));
    }
    let mut header = [0usize; 3];
    for h in header.iter_mut() {
        *h = tokens
            .next()
            .ok_or_else(|| bad("truncated header"))?
            .parse()
            .map_err(|_| bad("non-numeric header field"))?;
    }
    let [width, height, maxval] = header;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(bad("invalid dimensions or maxval"));
    }
    let pixels: Vec<u32> = tokens
        .take(width * height)
        .map(|t| t.parse::<u32>().map_err(|_| bad("non-numeric pixel")))
        .collect::<Result<_>>()?;
    if pixels.len() != width * height {
        return Err(bad("fewer pixels than declared"));
    }
    if pixels.iter().any(|&p| p as usize > maxval) {
        return Err(bad("pixel exceeds maxval"));
    }
    Ok(Graymap {
        width,
        height,
        maxval: maxval as u32,
        pixels,
    })
}

/// Writes a 16-bit P5 graymap. Row y = 0 is written first.
pub fn write_p5_16(mut w: impl Write, image: &Grid<u16>, maxval: u16) -> std::io::Result<()> {
    let maxval = maxval.max(1);
    write!(w, "P5\n{} {}\n{}\n", image.nx(), image.ny(), maxval)?;
    let wide = maxval > 255;
    let mut buf = Vec::with_capacity(image.data().len() * 2);
    for &v in image.data() {
        let v = v.min(maxval);
        if wide {
            buf.extend_from_slice(&v.to_be_bytes());
        } else {
            buf.push(v as u8);
        }
    }
    w.write_all(&buf)
}

/// Raw tallies, saturating at 65535; maxval is the largest tally.
pub fn tallies_to_u16(image: &Grid<u64>) -> (Grid<u16>, u16) {
    let g = image.map(|&v| v.min(u16::MAX as u64) as u16);
    let max = g.data().iter().copied().max().unwrap_or(0);
    (g, max.max(1))
}

/// Real image scaled so its maximum maps to 65535.
pub fn real_to_u16(image: &Grid<f64>) -> (Grid<u16>, u16) {
    let max = image.max_value();
    let scale = if max > 0.0 { 65535.0 / max } else { 0.0 };
    (image.map(|&v| (v.max(0.0) * scale).round() as u16), u16::MAX)
}
