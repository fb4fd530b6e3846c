//! File formats: graymaps, frame streams, CSV tables.

pub mod frames;
pub mod pgm;

use std::io::Write;

use crate::grid::Grid;

/// Writes `x,y,value` rows (pixel indices) with a header line.
pub fn write_image_csv<T: std::fmt::Display>(
    mut w: impl Write,
    header: &str,
    image: &Grid<T>,
) -> std::io::Result<()> {
    writeln!(w, "x,y,{header}")?;
    for (x, y, v) in image.indexed() {
        writeln!(w, "{x},{y},{v}")?;
    }
    Ok(())
}

/// Reads `x,y,value` rows written by [`write_image_csv`].
pub fn read_image_csv(text: &str) -> crate::Result<Grid<f64>> {
    let bad = |msg: String| crate::Error::Format {
        what: "image csv",
        msg,
    };
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split(',');
        let mut next = || it.next().map(str::trim).ok_or_else(|| bad(format!("line {}: too few columns", i + 1)));
        let x: usize = next()?.parse().map_err(|e| bad(format!("line {}: {e}", i + 1)))?;
        let y: usize = next()?.parse().map_err(|e| bad(format!("line {}: {e}", i + 1)))?;
        let v: f64 = next()?.parse().map_err(|e| bad(format!("line {}: {e}", i + 1)))?;
        entries.push((x, y, v));
    }
    let nx = entries.iter().map(|e| e.0 + 1).max().unwrap_or(0);
    let ny = entries.iter().map(|e| e.1 + 1).max().unwrap_or(0);
    if entries.len() != nx * ny {
        return Err(bad(format!("{} rows do not fill a {nx}x{ny} grid", entries.len())));
    }
    let mut g = Grid::filled(nx, ny, f64::NAN);
    for (x, y, v) in entries {
        *g.get_mut(x, y) = v;
    }
    if g.data().iter().any(|v| v.is_nan()) {
        return Err(bad("duplicate pixel rows".into()));
    }
    Ok(g)
}
