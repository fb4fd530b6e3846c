//! Object field-transmission functions and transmitter scan patterns.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::pgm;
use crate::units;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
        }
    }
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl Rect {
    pub fn centered(width: f64, height: f64) -> Self {
        Self {
            x: [-0.5 * width, 0.5 * width],
            y: [-0.5 * height, 0.5 * height],
        }
    }

    pub fn width(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    pub fn height(&self) -> f64 {
        self.y[1] - self.y[0]
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x[0] && p[0] <= self.x[1] && p[1] >= self.y[0] && p[1] <= self.y[1]
    }

    pub fn range(&self, axis: Axis) -> [f64; 2] {
        match axis {
            Axis::X => self.x,
            Axis::Y => self.y,
        }
    }
}

/// Grayscale amplitude mask sampled nearest-neighbour, centred on the
/// optical axis; row 0 is the top (+y) edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Bitmap {
    pub width: usize,
    pub height: usize,
    /// Amplitudes in [0, 1], row-major from the top row.
    pub values: Vec<f64>,
    pub pixel_size: f64,
}

impl Bitmap {
    fn support(&self) -> Rect {
        Rect::centered(
            self.width as f64 * self.pixel_size,
            self.height as f64 * self.pixel_size,
        )
    }

    fn sample(&self, rho: [f64; 2]) -> f64 {
        let s = self.support();
        if !s.contains(rho) {
            return 0.0;
        }
        let col = ((rho[0] - s.x[0]) / self.pixel_size) as usize;
        let row = ((s.y[1] - rho[1]) / self.pixel_size) as usize;
        let col = col.min(self.width - 1);
        let row = row.min(self.height - 1);
        self.values[row * self.width + col]
    }
}

/// Field-transmission function `O(ρ)` of the object plane.
#[derive(Debug, Clone, PartialEq)]
pub enum ObjectScene {
    /// Binary amplitude grating. Clear stripes are centred on multiples of
    /// `period` along `orientation`; the grating is opaque outside `extent`.
    StripeGrating {
        period: f64,
        duty: f64,
        extent: [f64; 2],
        orientation: Axis,
    },
    /// No target in the beam: `O ≡ 1`. The focused spot is the source.
    PointSource,
    Bitmap(Bitmap),
}

impl ObjectScene {
    pub fn validate(&self) -> Result<()> {
        match self {
            ObjectScene::StripeGrating {
                period,
                duty,
                extent,
                ..
            } => {
                if !(period.is_finite() && *period > 0.0) {
                    return Err(Error::config("scene.period", "must be positive"));
                }
                if !(*duty > 0.0 && *duty < 1.0) {
                    return Err(Error::config("scene.duty", "must lie strictly inside (0, 1)"));
                }
                if !extent.iter().all(|e| e.is_finite() && *e > 0.0) {
                    return Err(Error::config("scene.extent", "must be positive"));
                }
            }
            ObjectScene::PointSource => {}
            ObjectScene::Bitmap(b) => {
                if b.width == 0 || b.height == 0 || b.values.len() != b.width * b.height {
                    return Err(Error::config("scene.path", "bitmap has no pixels"));
                }
                if !(b.pixel_size > 0.0) {
                    return Err(Error::config("scene.pixel_size", "must be positive"));
                }
                if b.values.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(Error::config("scene.path", "amplitudes must lie in [0, 1]"));
                }
            }
        }
        Ok(())
    }

    /// Amplitude transmission at object-plane point `rho`.
    pub fn transmission(&self, rho: [f64; 2]) -> f64 {
        match self {
            ObjectScene::StripeGrating {
                period,
                duty,
                extent,
                orientation,
            } => {
                if rho[0].abs() > 0.5 * extent[0] || rho[1].abs() > 0.5 * extent[1] {
                    return 0.0;
                }
                let c = rho[orientation.index()] / period;
                let t = c - c.round();
                if t.abs() < 0.5 * duty {
                    1.0
                } else {
                    0.0
                }
            }
            ObjectScene::PointSource => 1.0,
            ObjectScene::Bitmap(b) => b.sample(rho),
        }
    }

    pub fn max_transmission(&self) -> f64 {
        match self {
            ObjectScene::StripeGrating { .. } | ObjectScene::PointSource => 1.0,
            ObjectScene::Bitmap(b) => b.values.iter().copied().fold(0.0, f64::max),
        }
    }

    /// Bounded support, or `None` for an object that fills the plane.
    pub fn support(&self) -> Option<Rect> {
        match self {
            ObjectScene::StripeGrating { extent, .. } => Some(Rect::centered(extent[0], extent[1])),
            ObjectScene::PointSource => None,
            ObjectScene::Bitmap(b) => Some(b.support()),
        }
    }

    /// Coordinates along `axis` inside `[lo, hi]` where `O` may jump.
    pub fn edges(&self, axis: Axis, lo: f64, hi: f64) -> Vec<f64> {
        let mut out = Vec::new();
        match self {
            ObjectScene::StripeGrating {
                period,
                duty,
                extent,
                orientation,
            } => {
                let half = 0.5 * extent[axis.index()];
                out.extend([-half, half]);
                if *orientation == axis {
                    let k0 = (lo.max(-half) / period).floor() as i64 - 1;
                    let k1 = (hi.min(half) / period).ceil() as i64 + 1;
                    for k in k0..=k1 {
                        let c = k as f64 * period;
                        out.push(c - 0.5 * duty * period);
                        out.push(c + 0.5 * duty * period);
                    }
                }
            }
            ObjectScene::PointSource => {}
            ObjectScene::Bitmap(b) => {
                let s = b.support().range(axis);
                let n = match axis {
                    Axis::X => b.width,
                    Axis::Y => b.height,
                };
                out.extend((0..=n).map(|i| s[0] + i as f64 * b.pixel_size));
            }
        }
        out.retain(|&e| e > lo && e < hi);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Maximal intervals along `axis` (at the other coordinate `cross`) where
    /// `O` is constant and non-zero, paired with that amplitude.
    pub(crate) fn open_intervals(&self, axis: Axis, cross: f64) -> Vec<([f64; 2], f64)> {
        let Some(support) = self.support() else {
            return Vec::new();
        };
        let range = support.range(axis);
        let mut cuts = vec![range[0]];
        cuts.extend(self.edges(axis, range[0], range[1]));
        cuts.push(range[1]);
        let mut out = Vec::new();
        for w in cuts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let p = match axis {
                Axis::X => [mid, cross],
                Axis::Y => [cross, mid],
            };
            let v = self.transmission(p);
            if v > 0.0 && w[1] > w[0] {
                out.push(([w[0], w[1]], v));
            }
        }
        out
    }
}

/// Serialized form of [`ObjectScene`]; bitmaps are referenced by path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SceneSpec {
    StripeGrating {
        #[serde(with = "units::length")]
        period: f64,
        duty: f64,
        #[serde(with = "units::length::pair")]
        extent: [f64; 2],
        orientation: Axis,
    },
    PointSource,
    Bitmap {
        path: String,
        #[serde(with = "units::length")]
        pixel_size: f64,
    },
}

impl SceneSpec {
    /// Builds the scene; bitmap paths resolve relative to `base_dir`.
    pub fn build(&self, base_dir: Option<&Path>) -> Result<ObjectScene> {
        let scene = match self {
            SceneSpec::StripeGrating {
                period,
                duty,
                extent,
                orientation,
            } => ObjectScene::StripeGrating {
                period: *period,
                duty: *duty,
                extent: *extent,
                orientation: *orientation,
            },
            SceneSpec::PointSource => ObjectScene::PointSource,
            SceneSpec::Bitmap { path, pixel_size } => {
                let p = match base_dir {
                    Some(dir) => dir.join(path),
                    None => path.into(),
                };
                let img = pgm::read_plain(&p)?;
                ObjectScene::Bitmap(Bitmap {
                    width: img.width,
                    height: img.height,
                    values: img.normalized(),
                    pixel_size: *pixel_size,
                })
            }
        };
        scene.validate()?;
        Ok(scene)
    }
}

/// Rectangle of transmitter aim angles (radians).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleRegion {
    #[serde(with = "units::angle::pair")]
    pub x: [f64; 2],
    #[serde(with = "units::angle::pair")]
    pub y: [f64; 2],
}

impl AngleRegion {
    pub fn rect(&self) -> Rect {
        Rect { x: self.x, y: self.y }
    }

    fn validate(&self) -> Result<()> {
        let ok = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[1] > r[0];
        if !ok(self.x) || !ok(self.y) {
            return Err(Error::config("scan.region", "empty angular region"));
        }
        Ok(())
    }
}

/// Transmitter aim pattern. Random and grid patterns imply a uniform density
/// over their region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScanPattern {
    UniformRandom { region: AngleRegion, n_positions: usize },
    Grid { region: AngleRegion, nx: usize, ny: usize },
    Fixed {
        #[serde(with = "units::angle::pair")]
        theta: [f64; 2],
    },
    /// Conventional imaging: the whole object is flood-illuminated and the
    /// transmitter is not scanned.
    FullField,
}

impl ScanPattern {
    pub fn validate(&self) -> Result<()> {
        match self {
            ScanPattern::UniformRandom { region, n_positions } => {
                region.validate()?;
                if *n_positions == 0 {
                    return Err(Error::config("scan.n_positions", "must be at least 1"));
                }
            }
            ScanPattern::Grid { region, nx, ny } => {
                region.validate()?;
                if *nx == 0 || *ny == 0 {
                    return Err(Error::config("scan.nx", "grid needs at least one cell per axis"));
                }
            }
            ScanPattern::Fixed { theta } => {
                if !theta.iter().all(|t| t.is_finite()) {
                    return Err(Error::config("scan.theta", "must be finite"));
                }
            }
            ScanPattern::FullField => {}
        }
        Ok(())
    }

    pub fn n_positions(&self) -> usize {
        match self {
            ScanPattern::UniformRandom { n_positions, .. } => *n_positions,
            ScanPattern::Grid { nx, ny, .. } => nx * ny,
            ScanPattern::Fixed { .. } | ScanPattern::FullField => 1,
        }
    }

    /// Region carrying a uniform density, if the pattern has one.
    pub fn density_region(&self) -> Option<Rect> {
        match self {
            ScanPattern::UniformRandom { region, .. } | ScanPattern::Grid { region, .. } => {
                Some(region.rect())
            }
            _ => None,
        }
    }

    pub fn is_full_field(&self) -> bool {
        matches!(self, ScanPattern::FullField)
    }
}

/// Draws the aim angles of a scan. Grids come out row-major (x fastest).
pub fn sample_scan<R: Rng + ?Sized>(pattern: &ScanPattern, rng: &mut R) -> Result<Vec<[f64; 2]>> {
    pattern.validate()?;
    let out = match pattern {
        ScanPattern::UniformRandom { region, n_positions } => (0..*n_positions)
            .map(|_| {
                let u: f64 = rng.random();
                let v: f64 = rng.random();
                [
                    region.x[0] + u * (region.x[1] - region.x[0]),
                    region.y[0] + v * (region.y[1] - region.y[0]),
                ]
            })
            .collect(),
        ScanPattern::Grid { region, nx, ny } => {
            let dx = (region.x[1] - region.x[0]) / *nx as f64;
            let dy = (region.y[1] - region.y[0]) / *ny as f64;
            let mut v = Vec::with_capacity(nx * ny);
            for j in 0..*ny {
                for i in 0..*nx {
                    v.push([
                        region.x[0] + (i as f64 + 0.5) * dx,
                        region.y[0] + (j as f64 + 0.5) * dy,
                    ]);
                }
            }
            v
        }
        ScanPattern::Fixed { theta } => vec![*theta],
        ScanPattern::FullField => vec![[0.0, 0.0]],
    };
    Ok(out)
}
