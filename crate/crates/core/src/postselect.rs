//! Image formation by N-photon postselection: dark subtraction, per-frame
//! event tagging, accumulation, and the conventional all-counts image.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::detector::Frame;
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Per-frame pixel condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SelectionMode {
    Exact(u32),
    AtLeast(u32),
}

impl SelectionMode {
    #[inline]
    pub fn accepts(self, count: u32) -> bool {
        match self {
            SelectionMode::Exact(n) => count == n,
            SelectionMode::AtLeast(n) => count >= n,
        }
    }

    pub fn order(self) -> u32 {
        match self {
            SelectionMode::Exact(n) | SelectionMode::AtLeast(n) => n,
        }
    }

    pub fn label(self) -> String {
        match self {
            SelectionMode::Exact(n) => format!("exact{n}"),
            SelectionMode::AtLeast(n) => format!("atleast{n}"),
        }
    }
}

/// What a run reports as its primary image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    Mode(SelectionMode),
    AllCounts,
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selection::Mode(SelectionMode::Exact(n)) => write!(f, "exact:{n}"),
            Selection::Mode(SelectionMode::AtLeast(n)) => write!(f, "at_least:{n}"),
            Selection::AllCounts => f.write_str("all_counts"),
        }
    }
}

impl FromStr for Selection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s == "all_counts" {
            return Ok(Selection::AllCounts);
        }
        let (kind, n) = s
            .split_once(':')
            .ok_or_else(|| format!("`{s}`: expected exact:N, at_least:N or all_counts"))?;
        let n: u32 = n
            .trim()
            .parse()
            .map_err(|_| format!("`{s}`: N must be a non-negative integer"))?;
        if n == 0 {
            return Err(format!("`{s}`: N must be at least 1"));
        }
        match kind.trim() {
            "exact" => Ok(Selection::Mode(SelectionMode::Exact(n))),
            "at_least" => Ok(Selection::Mode(SelectionMode::AtLeast(n))),
            other => Err(format!("unknown selection kind `{other}`")),
        }
    }
}

impl Serialize for Selection {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Selection {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Frame tallies of a selection condition.
#[derive(Debug, Clone, PartialEq)]
pub struct NPhotonImage {
    pub tallies: Grid<u64>,
    pub mode: SelectionMode,
    pub frames_processed: u64,
    pub config_digest: String,
}

impl NPhotonImage {
    /// Tally divided by frames: the Monte-Carlo estimate of `P_N`.
    pub fn frequency(&self) -> Grid<f64> {
        let n = self.frames_processed.max(1) as f64;
        self.tallies.map(|&t| t as f64 / n)
    }
}

/// `round(count − dark)` clamped below at zero.
pub fn subtract_dark(frame: &Frame, dark: &Grid<f64>) -> Result<Grid<u32>> {
    if !frame.counts.same_shape(dark) {
        return Err(Error::config("dark", "dark map shape does not match frame"));
    }
    let data = frame
        .counts
        .data()
        .iter()
        .zip(dark.data())
        .map(|(&c, &d)| corrected_count(c, d))
        .collect();
    Grid::from_vec(dark.nx(), dark.ny(), data)
}

#[inline]
pub(crate) fn corrected_count(count: u32, dark: f64) -> u32 {
    (count as f64 - dark).round().max(0.0) as u32
}

/// A frame's 0/1 tags under `mode`.
#[derive(Debug, Clone, PartialEq)]
pub struct TagGrid {
    pub mode: SelectionMode,
    pub tags: Grid<u8>,
}

pub fn tag_frame(corrected: &Grid<u32>, mode: SelectionMode) -> TagGrid {
    TagGrid {
        mode,
        tags: corrected.map(|&c| mode.accepts(c) as u8),
    }
}

/// Streaming sum of tag grids.
#[derive(Debug, Clone)]
pub struct Accumulator {
    image: NPhotonImage,
}

impl Accumulator {
    pub fn new(nx: usize, ny: usize, mode: SelectionMode) -> Self {
        Self {
            image: NPhotonImage {
                tallies: Grid::filled(nx, ny, 0),
                mode,
                frames_processed: 0,
                config_digest: String::new(),
            },
        }
    }

    pub fn push(&mut self, tags: &TagGrid) -> Result<()> {
        if tags.mode != self.image.mode {
            return Err(Error::config(
                "selection",
                format!(
                    "mode changed mid-stream from {:?} to {:?}",
                    self.image.mode, tags.mode
                ),
            ));
        }
        if !tags.tags.same_shape(&self.image.tallies) {
            return Err(Error::config("selection", "tag grid shape changed mid-stream"));
        }
        for (t, &g) in self.image.tallies.data_mut().iter_mut().zip(tags.tags.data()) {
            *t += g as u64;
        }
        self.image.frames_processed += 1;
        Ok(())
    }

    /// Integer merge of two partial tallies.
    pub fn merge(&mut self, other: &Accumulator) -> Result<()> {
        if other.image.mode != self.image.mode || !other.image.tallies.same_shape(&self.image.tallies) {
            return Err(Error::config("selection", "cannot merge mismatched accumulators"));
        }
        for (a, &b) in self.image.tallies.data_mut().iter_mut().zip(other.image.tallies.data()) {
            *a += b;
        }
        self.image.frames_processed += other.image.frames_processed;
        Ok(())
    }

    pub fn finish(self) -> NPhotonImage {
        self.image
    }
}

pub fn accumulate<'a>(
    nx: usize,
    ny: usize,
    mode: SelectionMode,
    tags: impl IntoIterator<Item = &'a TagGrid>,
) -> Result<NPhotonImage> {
    let mut acc = Accumulator::new(nx, ny, mode);
    for t in tags {
        acc.push(t)?;
    }
    Ok(acc.finish())
}

/// Per-pixel mean of dark-corrected counts over a non-empty frame stream.
pub fn conventional_image<'a>(
    frames: impl IntoIterator<Item = &'a Frame>,
    dark: &Grid<f64>,
) -> Result<Grid<f64>> {
    let mut sums = Grid::filled(dark.nx(), dark.ny(), 0u64);
    let mut n = 0u64;
    for f in frames {
        let c = subtract_dark(f, dark)?;
        for (s, &v) in sums.data_mut().iter_mut().zip(c.data()) {
            *s += v as u64;
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::config("frames", "conventional image of an empty frame stream"));
    }
    Ok(sums.map(|&s| s as f64 / n as f64))
}

/// Elementwise `min(tally, cap)` for display.
pub fn clip_display(image: &NPhotonImage, cap: u64) -> Result<Grid<u64>> {
    if cap == 0 {
        return Err(Error::domain("clip_display", "cap must be at least 1"));
    }
    Ok(image.tallies.map(|&t| t.min(cap)))
}

/// Per-pixel histogram of dark-corrected counts over every processed frame.
///
/// Exact-N and at-least-N images for any N, and the conventional image, are
/// all projections of it, so one pass over the frames serves every selection.
#[derive(Debug, Clone, PartialEq)]
pub struct CountHistogram {
    nx: usize,
    ny: usize,
    bins: usize,
    counts: Vec<u64>,
    frames: u64,
}

impl CountHistogram {
    /// Bins `0..=max_count`.
    pub fn new(nx: usize, ny: usize, max_count: u32) -> Self {
        let bins = max_count as usize + 1;
        Self {
            nx,
            ny,
            bins,
            counts: vec![0; nx * ny * bins],
            frames: 0,
        }
    }

    pub fn frames(&self) -> u64 {
        self.frames
    }

    pub fn max_count(&self) -> u32 {
        (self.bins - 1) as u32
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    /// Adds one raw frame after dark correction.
    pub fn add_frame(&mut self, counts: &Grid<u32>, dark: &Grid<f64>) -> Result<()> {
        if counts.shape() != (self.nx, self.ny) || !counts.same_shape(dark) {
            return Err(Error::config("frames", "frame shape does not match histogram"));
        }
        for (i, (&c, &d)) in counts.data().iter().zip(dark.data()).enumerate() {
            let v = (corrected_count(c, d) as usize).min(self.bins - 1);
            self.counts[i * self.bins + v] += 1;
        }
        self.frames += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &CountHistogram) -> Result<()> {
        if (self.nx, self.ny, self.bins) != (other.nx, other.ny, other.bins) {
            return Err(Error::config("frames", "cannot merge histograms of different shape"));
        }
        for (a, &b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.frames += other.frames;
        Ok(())
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u64] {
        let i = y * self.nx + x;
        &self.counts[i * self.bins..(i + 1) * self.bins]
    }

    pub fn image(&self, mode: SelectionMode, config_digest: &str) -> NPhotonImage {
        let tallies = Grid::from_fn(self.nx, self.ny, |x, y| {
            let h = self.pixel(x, y);
            match mode {
                SelectionMode::Exact(n) => h.get(n as usize).copied().unwrap_or(0),
                SelectionMode::AtLeast(n) => h.iter().skip(n as usize).sum(),
            }
        });
        NPhotonImage {
            tallies,
            mode,
            frames_processed: self.frames,
            config_digest: config_digest.to_string(),
        }
    }

    /// Per-pixel `Σ_k k·h[k]`.
    pub fn count_sums(&self) -> Grid<u64> {
        Grid::from_fn(self.nx, self.ny, |x, y| {
            self.pixel(x, y)
                .iter()
                .enumerate()
                .map(|(k, &h)| k as u64 * h)
                .sum()
        })
    }

    /// Per-pixel mean corrected count.
    pub fn conventional(&self) -> Result<Grid<f64>> {
        if self.frames == 0 {
            return Err(Error::config("frames", "conventional image of an empty frame stream"));
        }
        let n = self.frames as f64;
        Ok(self.count_sums().map(|&s| s as f64 / n))
    }
}
