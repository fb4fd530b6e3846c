//! Photon-counting pixel array: Poisson signal plus dark counts, counter and
//! dead-time saturation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::optics::{mean_count, OpticalConfig};
use crate::scene::ObjectScene;
use crate::stream::{Domain, RngStream};
use crate::units;

fn default_counter_max() -> u32 {
    255
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorArray {
    pub nx: usize,
    pub ny: usize,
    #[serde(with = "units::length")]
    pub pitch: f64,
    pub fill_factor: f64,
    pub dark_mean_per_frame: f64,
    /// Counter saturation; 255 for an 8-bit readout.
    #[serde(default = "default_counter_max")]
    pub counter_max: u32,
    #[serde(with = "units::duration")]
    pub dead_time: f64,
    #[serde(with = "units::duration")]
    pub integration_time: f64,
}

impl DetectorArray {
    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::config("detector.nx", "array needs at least one pixel"));
        }
        if !(self.pitch.is_finite() && self.pitch > 0.0) {
            return Err(Error::config("detector.pitch", "must be positive"));
        }
        if !(self.fill_factor > 0.0 && self.fill_factor <= 1.0) {
            return Err(Error::config("detector.fill_factor", "must lie in (0, 1]"));
        }
        if !(self.dark_mean_per_frame.is_finite() && self.dark_mean_per_frame >= 0.0) {
            return Err(Error::config("detector.dark_mean_per_frame", "must be non-negative"));
        }
        if self.counter_max == 0 {
            return Err(Error::config("detector.counter_max", "must be at least 1"));
        }
        if !(self.dead_time.is_finite() && self.dead_time >= 0.0) {
            return Err(Error::config("detector.dead_time", "must be non-negative"));
        }
        if !(self.integration_time.is_finite() && self.integration_time > 0.0) {
            return Err(Error::config("detector.integration_time", "must be positive"));
        }
        Ok(())
    }

    /// Photosensitive pixel area `A_p = fill_factor · pitch²`.
    pub fn pixel_area(&self) -> f64 {
        self.fill_factor * self.pitch * self.pitch
    }

    /// Image-plane centre of pixel `(ix, iy)`. The optical axis falls on the
    /// centre of pixel `(nx/2, ny/2)`.
    pub fn pixel_center(&self, ix: usize, iy: usize) -> [f64; 2] {
        [
            (ix as f64 - (self.nx / 2) as f64) * self.pitch,
            (iy as f64 - (self.ny / 2) as f64) * self.pitch,
        ]
    }

    /// Counts a pixel can register in one frame.
    pub fn count_cap(&self) -> u32 {
        match self.dead_time_cap() {
            Some(d) => d.min(self.counter_max),
            None => self.counter_max,
        }
    }

    fn dead_time_cap(&self) -> Option<u32> {
        (self.dead_time > 0.0).then(|| {
            let c = (self.integration_time / self.dead_time).floor();
            c.min(u32::MAX as f64) as u32
        })
    }

    /// Set when the dead time, not the counter, limits a frame.
    pub fn dead_time_warning(&self) -> Option<String> {
        self.dead_time_cap().filter(|&d| d < self.counter_max).map(|d| {
            format!(
                "dead time caps counts at {d} per frame, below counter_max {}",
                self.counter_max
            )
        })
    }
}

/// One integration window of raw (not dark-subtracted) counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub counts: Grid<u32>,
    pub theta: [f64; 2],
    pub frame_index: u64,
    pub rng_stream_id: u64,
}

const INVERSION_LIMIT: f64 = 30.0;

/// Poisson variate generator for a fixed mean.
///
/// Means below 30 use inversion against a precomputed CDF table; larger
/// means use Hörmann's transformed rejection with squeeze (PTRS).
#[derive(Debug, Clone)]
pub struct PoissonSampler {
    mu: f64,
    kind: SamplerKind,
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Zero,
    Inversion { cdf: Vec<f64> },
    Ptrs(Ptrs),
}

#[derive(Debug, Clone)]
struct Ptrs {
    log_mu: f64,
    a: f64,
    b: f64,
    inv_alpha: f64,
    v_r: f64,
}

impl PoissonSampler {
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(Error::domain(
                "poisson_sample",
                format!("mean must be finite and non-negative, got {mu}"),
            ));
        }
        let kind = if mu == 0.0 {
            SamplerKind::Zero
        } else if mu < INVERSION_LIMIT {
            let mut cdf = Vec::with_capacity((mu + 12.0 * mu.sqrt() + 16.0) as usize);
            let mut p = (-mu).exp();
            let mut acc = p;
            cdf.push(acc);
            let mut k = 0.0;
            while !(k > mu && p < 1e-18) {
                k += 1.0;
                p *= mu / k;
                acc += p;
                cdf.push(acc);
            }
            SamplerKind::Inversion { cdf }
        } else {
            let b = 0.931 + 2.53 * mu.sqrt();
            SamplerKind::Ptrs(Ptrs {
                log_mu: mu.ln(),
                a: -0.059 + 0.02483 * b,
                b,
                inv_alpha: 1.1239 + 1.1328 / (b - 3.4),
                v_r: 0.9277 - 3.6224 / (b - 2.0),
            })
        };
        Ok(Self { mu, kind })
    }

    pub fn mean(&self) -> f64 {
        self.mu
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match &self.kind {
            SamplerKind::Zero => 0,
            SamplerKind::Inversion { cdf } => {
                let u: f64 = rng.random();
                if u < cdf[0] {
                    return 0;
                }
                match cdf.iter().position(|&c| u < c) {
                    Some(k) => k as u64,
                    // u fell in the rounding gap above the last tabulated
                    // value; the remaining mass is below 1e-16.
                    None => cdf.len() as u64 - 1,
                }
            }
            SamplerKind::Ptrs(p) => p.sample(self.mu, rng),
        }
    }
}

impl Ptrs {
    fn sample<R: Rng + ?Sized>(&self, mu: f64, rng: &mut R) -> u64 {
        loop {
            let u = rng.random::<f64>() - 0.5;
            let v: f64 = rng.random();
            let us = 0.5 - u.abs();
            let k = ((2.0 * self.a / us + self.b) * u + mu + 0.43).floor();
            if us >= 0.07 && v <= self.v_r {
                return k as u64;
            }
            if k < 0.0 || (us < 0.013 && v > us) {
                continue;
            }
            let lhs = (v * self.inv_alpha / (self.a / (us * us) + self.b)).ln();
            let rhs = -mu + k * self.log_mu - statrs::function::gamma::ln_gamma(k + 1.0);
            if lhs <= rhs {
                return k as u64;
            }
        }
    }
}

/// One draw from Poisson(`mu`).
pub fn poisson_sample<R: Rng + ?Sized>(mu: f64, rng: &mut R) -> Result<u64> {
    Ok(PoissonSampler::new(mu)?.sample(rng))
}

/// Signal mean count of every pixel for aim angle `theta`.
pub fn signal_mean_map(
    cfg: &OpticalConfig,
    det: &DetectorArray,
    scene: &ObjectScene,
    theta: [f64; 2],
) -> Grid<f64> {
    Grid::from_fn(det.nx, det.ny, |x, y| {
        mean_count(cfg, det, scene, theta, det.pixel_center(x, y))
    })
}

/// Per-pixel samplers for a fixed total-mean map, reused across the frames
/// of one scan position.
#[derive(Debug, Clone)]
pub struct FrameSampler {
    nx: usize,
    ny: usize,
    cap: u32,
    samplers: Vec<PoissonSampler>,
}

impl FrameSampler {
    /// `signal` holds signal means; the detector's dark mean is added here.
    pub fn new(det: &DetectorArray, signal: &Grid<f64>) -> Result<Self> {
        if signal.shape() != (det.nx, det.ny) {
            return Err(Error::config("detector", "mean map shape does not match the array"));
        }
        let samplers = signal
            .data()
            .iter()
            .map(|&m| PoissonSampler::new(m + det.dark_mean_per_frame))
            .collect::<Result<_>>()?;
        Ok(Self {
            nx: det.nx,
            ny: det.ny,
            cap: det.count_cap(),
            samplers,
        })
    }

    pub fn sample_counts<R: Rng + ?Sized>(&self, rng: &mut R) -> Grid<u32> {
        let mut data = Vec::with_capacity(self.samplers.len());
        data.extend(
            self.samplers
                .iter()
                .map(|s| s.sample(rng).min(self.cap as u64) as u32),
        );
        Grid::from_vec(self.nx, self.ny, data).expect("sampler shape")
    }

    pub fn sample_frame(&self, theta: [f64; 2], frame_index: u64, stream: &mut RngStream) -> Frame {
        Frame {
            counts: self.sample_counts(&mut stream.rng),
            theta,
            frame_index,
            rng_stream_id: stream.id,
        }
    }
}

/// One frame with the transmitter aimed at `theta`.
pub fn simulate_frame(
    cfg: &OpticalConfig,
    det: &DetectorArray,
    scene: &ObjectScene,
    theta: [f64; 2],
    frame_index: u64,
    stream: &mut RngStream,
) -> Result<Frame> {
    cfg.validate()?;
    det.validate()?;
    let sampler = FrameSampler::new(det, &signal_mean_map(cfg, det, scene, theta))?;
    Ok(sampler.sample_frame(theta, frame_index, stream))
}

/// Per-pixel mean of `n_frames` dark-only frames (scene blocked).
pub fn dark_map(det: &DetectorArray, n_frames: u64, master_seed: u64) -> Result<Grid<f64>> {
    if n_frames == 0 {
        return Err(Error::config("dark_frames", "must be at least 1"));
    }
    let sampler = FrameSampler::new(det, &Grid::filled(det.nx, det.ny, 0.0))?;
    use rayon::prelude::*;
    let sums = (0..n_frames)
        .into_par_iter()
        .fold(
            || vec![0u64; det.nx * det.ny],
            |mut acc, i| {
                let mut s = RngStream::new(master_seed, Domain::Dark, 0, i);
                let c = sampler.sample_counts(&mut s.rng);
                for (a, &v) in acc.iter_mut().zip(c.data()) {
                    *a += v as u64;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; det.nx * det.ny],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    Grid::from_vec(
        det.nx,
        det.ny,
        sums.into_iter().map(|s| s as f64 / n_frames as f64).collect(),
    )
}
