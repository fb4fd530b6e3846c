//! Image analysis: 1-D cross sections, FWHM, stripe contrast and the donut
//! score of a postselected point-source image.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::optics::{airy_half_width, airy_power};
use crate::scene::Axis;

/// A 1-D cut through an image.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Profile {
    /// Image-plane coordinates, strictly increasing.
    pub positions: Vec<f64>,
    pub values: Vec<f64>,
    pub axis: Axis,
    /// Central row (for an x profile) or column of the averaged band.
    pub offset: usize,
}

impl Profile {
    pub fn new(positions: Vec<f64>, values: Vec<f64>, axis: Axis, offset: usize) -> Result<Self> {
        if positions.len() != values.len() || positions.len() < 2 {
            return Err(Error::domain("profile", "need at least two samples with matching positions"));
        }
        if positions.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("profile", "positions must be strictly increasing"));
        }
        Ok(Self { positions, values, axis, offset })
    }

    /// CSV with a `position_m,value` header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("position_m,value\n");
        for (p, v) in self.positions.iter().zip(&self.values) {
            s.push_str(&format!("{p},{v}\n"));
        }
        s
    }
}

/// Averages `width` adjacent rows (axis X) or columns (axis Y) centred on
/// `offset`. Sample positions follow the detector convention: index `i` sits
/// at `(i − n/2)·pitch`.
pub fn cross_section(image: &Grid<f64>, pitch: f64, axis: Axis, offset: usize, width: usize) -> Result<Profile> {
    let (nx, ny) = image.shape();
    let (len, across) = match axis {
        Axis::X => (nx, ny),
        Axis::Y => (ny, nx),
    };
    if width == 0 {
        return Err(Error::domain("cross_section", "width must be at least 1"));
    }
    let start = offset
        .checked_sub(width / 2)
        .filter(|s| s + width <= across)
        .ok_or_else(|| {
            Error::domain(
                "cross_section",
                format!("band of {width} around {offset} exceeds the {across} available lines"),
            )
        })?;
    let values = (0..len)
        .map(|i| {
            let sum: f64 = (start..start + width)
                .map(|j| match axis {
                    Axis::X => *image.get(i, j),
                    Axis::Y => *image.get(j, i),
                })
                .sum();
            sum / width as f64
        })
        .collect();
    let positions = (0..len).map(|i| (i as f64 - (len / 2) as f64) * pitch).collect();
    Profile::new(positions, values, axis, offset)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fwhm {
    pub width: f64,
    pub left: f64,
    pub right: f64,
    /// Set when the profile dips below half maximum between the outermost
    /// crossings.
    pub multiple_crossings: bool,
}

/// Full width at half maximum, interpolating linearly between samples at the
/// outermost half-maximum crossings.
pub fn fwhm(profile: &Profile) -> Result<Fwhm> {
    let v = &profile.values;
    let x = &profile.positions;
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return Err(Error::domain("fwhm", "profile has no positive maximum"));
    }
    let half = 0.5 * max;
    let first = v.iter().position(|&a| a >= half).expect("max is above half");
    let last = v.iter().rposition(|&a| a >= half).expect("max is above half");
    if first == 0 || last == v.len() - 1 {
        return Err(Error::domain("fwhm", "unbounded profile: no half-maximum crossing on one side"));
    }
    let cross = |i: usize, j: usize| {
        let t = (half - v[i]) / (v[j] - v[i]);
        x[i] + t * (x[j] - x[i])
    };
    let left = cross(first - 1, first);
    let right = cross(last + 1, last);
    Ok(Fwhm {
        width: right - left,
        left,
        right,
        multiple_crossings: v[first..=last].iter().any(|&a| a < half),
    })
}

/// Mean Michelson contrast `(max − min)/(max + min)` over consecutive
/// complete windows of one `period`, starting at the first sample.
pub fn stripe_contrast(profile: &Profile, period: f64) -> Result<f64> {
    let x = &profile.positions;
    let x0 = x[0];
    let span = x[x.len() - 1] - x0;
    if !(period > 0.0) || span < 2.0 * period {
        return Err(Error::domain(
            "stripe_contrast",
            format!("profile spans {span:e} m, less than two periods of {period:e} m"),
        ));
    }
    let windows = ((span + 1e-9 * period) / period).floor() as usize;
    let mut total = 0.0;
    let mut used = 0usize;
    for k in 0..windows {
        let lo = x0 + k as f64 * period;
        let hi = lo + period;
        let (mut mx, mut mn) = (f64::NEG_INFINITY, f64::INFINITY);
        for (p, &v) in x.iter().zip(&profile.values) {
            if *p >= lo - 1e-12 * period && *p < hi - 1e-12 * period {
                mx = mx.max(v);
                mn = mn.min(v);
            }
        }
        if mx.is_finite() {
            total += if mx + mn > 0.0 { (mx - mn) / (mx + mn) } else { 0.0 };
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::domain("stripe_contrast", "no samples inside the period windows"));
    }
    Ok(total / used as f64)
}

/// `(ring_peak − centre)/ring_peak`, with the centre taken as the sample
/// nearest the intensity-weighted centroid. Positive values mean a hole.
pub fn donut_score(profile: &Profile) -> Result<f64> {
    fwhm(profile)?;
    let v = &profile.values;
    let x = &profile.positions;
    let peak = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mass: f64 = v.iter().map(|a| a.max(0.0)).sum();
    let centroid = x.iter().zip(v).map(|(p, a)| p * a.max(0.0)).sum::<f64>() / mass;
    let centre = x
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - centroid).abs().total_cmp(&(b.1 - centroid).abs()))
        .map(|(i, _)| i)
        .expect("non-empty profile");
    Ok((peak - v[centre]) / peak)
}

/// Sampled `airy_power(u, n)` on a symmetric grid with `per_half_width`
/// samples per half-width of order `n`.
pub fn airy_power_profile(n: u32, per_half_width: usize) -> Result<Profile> {
    let hw = airy_half_width(n)?;
    let du = hw / per_half_width as f64;
    let k = (4.0 * hw / du).ceil() as i64;
    let positions: Vec<f64> = (-k..=k).map(|i| i as f64 * du).collect();
    let values = positions.iter().map(|&u| airy_power(u.abs(), n)).collect::<Result<_>>()?;
    Profile::new(positions, values, Axis::X, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: u32,
    /// Root-finding FWHM in Airy-argument units.
    pub fwhm_root: f64,
    /// FWHM measured on a sampled profile.
    pub fwhm_sampled: f64,
    pub ratio: f64,
    pub inv_sqrt_n: f64,
    pub rel_error: f64,
}

/// FWHM of `A(u)^n` relative to `n = 1` for each order in `n_min..=n_max`.
pub fn fwhm_sweep(n_min: u32, n_max: u32) -> Result<Vec<SweepRow>> {
    if n_min == 0 || n_max < n_min {
        return Err(Error::domain("fwhm_sweep", "need 1 <= n_min <= n_max"));
    }
    let base = 2.0 * airy_half_width(1)?;
    (n_min..=n_max)
        .map(|n| {
            let root = 2.0 * airy_half_width(n)?;
            let sampled = fwhm(&airy_power_profile(n, 20)?)?.width;
            let ratio = root / base;
            let inv = 1.0 / (n as f64).sqrt();
            Ok(SweepRow {
                n,
                fwhm_root: root,
                fwhm_sampled: sampled,
                ratio,
                inv_sqrt_n: inv,
                rel_error: ratio / inv - 1.0,
            })
        })
        .collect()
}
