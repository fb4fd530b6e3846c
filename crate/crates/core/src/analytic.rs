//! Quadrature oracle for the detection statistics: `P_N` integrated over the
//! scan density, the large-N asymptotic image, and the full image-plane field
//! integral used to check the closed-form mean-count model.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::detector::DetectorArray;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::optics::{airy, jinc, mean_count, OpticalConfig};
use crate::quadrature::{gauss_legendre, integrate_2d, refine_cuts};
use crate::scene::{Axis, ObjectScene, ScanPattern};

pub use crate::quadrature::{QuadRule, QuadratureSpec};

/// Poisson probability of `n` counts at mean `mu`, evaluated in log space.
/// Negative or non-finite `mu` gives NaN.
pub fn poisson_pmf(n: u64, mu: f64) -> f64 {
    if !(mu >= 0.0) || !mu.is_finite() {
        return f64::NAN;
    }
    if mu == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let nf = n as f64;
    (nf * mu.ln() - mu - ln_gamma(nf + 1.0)).exp()
}

/// Angular breakpoints of the integrand along one axis: region bounds plus
/// every place where the object transmission under the spot can jump.
fn theta_cuts(cfg: &OpticalConfig, scene: &ObjectScene, axis: Axis, range: [f64; 2]) -> Vec<f64> {
    let lt = cfg.tx_distance;
    let mut cuts = vec![range[0]];
    cuts.extend(
        scene
            .edges(axis, range[0] * lt, range[1] * lt)
            .into_iter()
            .map(|e| e / lt),
    );
    cuts.push(range[1]);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    // Panels no wider than a quarter of the receiver's first-zero spacing.
    let max_panel = PI / (4.0 * cfg.rx_kernel_scale() * lt);
    refine_cuts(&cuts, max_panel)
}

/// Mean of `g(θ)` under the uniform density of `pattern`'s region.
fn average_over_region<F>(cfg: &OpticalConfig, scene: &ObjectScene, pattern: &ScanPattern, g: F, quad: &QuadratureSpec) -> Result<f64>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let region = pattern
        .density_region()
        .ok_or_else(|| Error::domain("analytic", "scan pattern has no density region"))?;
    let xs = theta_cuts(cfg, scene, Axis::X, region.x);
    let ys = theta_cuts(cfg, scene, Axis::Y, region.y);
    let r = integrate_2d(&g, &xs, &ys, quad)?;
    Ok(r.value / region.area())
}

/// Probability that the pixel centred at `pixel` registers exactly `n`
/// counts in a frame, with the aim angle drawn from `pattern`. Dark counts
/// enter as an additive Poisson mean.
pub fn analytic_pn(
    cfg: &OpticalConfig,
    det: &DetectorArray,
    scene: &ObjectScene,
    pattern: &ScanPattern,
    n: u32,
    pixel: [f64; 2],
    quad: &QuadratureSpec,
) -> Result<f64> {
    pattern.validate()?;
    let dark = det.dark_mean_per_frame;
    let n = n as u64;
    match pattern {
        ScanPattern::Fixed { theta } => Ok(poisson_pmf(n, mean_count(cfg, det, scene, *theta, pixel) + dark)),
        ScanPattern::FullField => {
            let field = FloodField::new(cfg, det, scene, quad)?;
            Ok(poisson_pmf(n, field.mean_at(pixel) + dark))
        }
        _ => {
            let g = |tx: f64, ty: f64| poisson_pmf(n, mean_count(cfg, det, scene, [tx, ty], pixel) + dark);
            let p = average_over_region(cfg, scene, pattern, g, quad)?;
            Ok(p.clamp(0.0, 1.0))
        }
    }
}

/// [`analytic_pn`] for every pixel of the array.
pub fn analytic_pn_map(
    cfg: &OpticalConfig,
    det: &DetectorArray,
    scene: &ObjectScene,
    pattern: &ScanPattern,
    n: u32,
    quad: &QuadratureSpec,
) -> Result<Grid<f64>> {
    let dark = det.dark_mean_per_frame;
    let field = match pattern {
        ScanPattern::FullField => Some(FloodField::new(cfg, det, scene, quad)?),
        _ => None,
    };
    let values = (0..det.nx * det.ny)
        .into_par_iter()
        .map(|i| {
            let p = det.pixel_center(i % det.nx, i / det.nx);
            match &field {
                Some(f) => Ok(poisson_pmf(n as u64, f.mean_at(p) + dark)),
                None => analytic_pn(cfg, det, scene, pattern, n, p, quad),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Grid::from_vec(det.nx, det.ny, values)
}

/// `P_N` averaged over an explicit list of aim angles, the expectation of a
/// Monte-Carlo run that visits exactly those positions equally often.
pub fn pn_over_positions(
    cfg: &OpticalConfig,
    det: &DetectorArray,
    scene: &ObjectScene,
    positions: &[[f64; 2]],
    n: u32,
    pixel: [f64; 2],
) -> Result<f64> {
    if positions.is_empty() {
        return Err(Error::domain("pn_over_positions", "no positions"));
    }
    let dark = det.dark_mean_per_frame;
    let sum: f64 = positions
        .iter()
        .map(|&t| poisson_pmf(n as u64, mean_count(cfg, det, scene, t, pixel) + dark))
        .sum();
    Ok(sum / positions.len() as f64)
}

/// Large-N image `∫ p(θ) |O(θ L_T)|^{2N} A(u)^N dθ`, multiplicative
/// constants suppressed. Valid only when `n` exceeds every mean count.
pub fn asymptotic_in(
    cfg: &OpticalConfig,
    det: &DetectorArray,
    scene: &ObjectScene,
    pattern: &ScanPattern,
    n: u32,
    pixel: [f64; 2],
    quad: &QuadratureSpec,
) -> Result<f64> {
    check_asymptotic_validity(cfg, det, scene, pattern, n)?;
    let term = |t: [f64; 2]| {
        let o = scene.transmission(cfg.spot_center(t));
        if o == 0.0 {
            return 0.0;
        }
        o.powi(2 * n as i32) * airy(cfg.airy_argument(t, pixel)).powi(n as i32)
    };
    match pattern {
        ScanPattern::Fixed { theta } => Ok(term(*theta)),
        _ => average_over_region(cfg, scene, pattern, |x, y| term([x, y]), quad),
    }
}

fn check_asymptotic_validity(
    cfg: &OpticalConfig,
    det: &DetectorArray,
    scene: &ObjectScene,
    pattern: &ScanPattern,
    n: u32,
) -> Result<()> {
    if pattern.is_full_field() {
        return Err(Error::Validity {
            op: "asymptotic_in",
            msg: "the asymptotic form needs a scanned transmitter".into(),
        });
    }
    let o = scene.max_transmission();
    let max_mean = cfg.peak_mean(det.pixel_area()) * o * o;
    if (n as f64) <= max_mean.ceil() {
        return Err(Error::Validity {
            op: "asymptotic_in",
            msg: format!("N = {n} must exceed the peak mean count {max_mean:.3} (rounded up)"),
        });
    }
    Ok(())
}

/// [`asymptotic_in`] over the whole array, normalized to its own maximum.
pub fn asymptotic_image(
    cfg: &OpticalConfig,
    det: &DetectorArray,
    scene: &ObjectScene,
    pattern: &ScanPattern,
    n: u32,
    quad: &QuadratureSpec,
) -> Result<Grid<f64>> {
    check_asymptotic_validity(cfg, det, scene, pattern, n)?;
    let values = (0..det.nx * det.ny)
        .into_par_iter()
        .map(|i| asymptotic_in(cfg, det, scene, pattern, n, det.pixel_center(i % det.nx, i / det.nx), quad))
        .collect::<Result<Vec<_>>>()?;
    let max = values.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(Error::domain("asymptotic_image", "image is identically zero"));
    }
    Grid::from_vec(det.nx, det.ny, values.into_iter().map(|v| v / max).collect())
}

/// Number of transmitter half-lobes (`π / b_T`) kept on each side of the
/// spot by [`general_image_intensity`]. The outer half of the window is a
/// smooth taper, which sums the oscillating kernel tails in the Abel sense.
pub const GENERAL_WINDOW_HALF_LOBES: f64 = 48.0;

/// Full transmitter/object/receiver field integral, keeping the quadratic
/// phase `k|ρ|²(1/L_T + 1/L_R)/2`, for aim angle `theta` and image point
/// `image_point`. Returns photons per unit detector area per frame before
/// quantum efficiency, so `η·A_p` times the result is the mean count.
pub fn general_image_intensity(
    cfg: &OpticalConfig,
    scene: &ObjectScene,
    theta: [f64; 2],
    image_point: [f64; 2],
    quad: &QuadratureSpec,
) -> Result<f64> {
    general_image_intensity_windowed(cfg, scene, theta, image_point, quad, GENERAL_WINDOW_HALF_LOBES)
}

/// [`general_image_intensity`] with an explicit window of `half_lobes`
/// transmitter half-lobes.
pub fn general_image_intensity_windowed(
    cfg: &OpticalConfig,
    scene: &ObjectScene,
    theta: [f64; 2],
    image_point: [f64; 2],
    quad: &QuadratureSpec,
    half_lobes: f64,
) -> Result<f64> {
    cfg.validate()?;
    if !(half_lobes >= 4.0) {
        return Err(Error::domain("general_image_intensity", "window must span at least 4 half-lobes"));
    }
    let c = cfg.spot_center(theta);
    let m = cfg.magnification();
    let q = [image_point[0] / m, image_point[1] / m];
    let bt = cfg.tx_kernel_scale();
    let br = cfg.rx_kernel_scale();
    let curvature = 0.5 * cfg.wavenumber() * (1.0 / cfg.tx_distance + 1.0 / cfg.rx_distance);

    let lobe = PI / bt;
    let w = half_lobes * lobe;
    let mut xr = [c[0] - w, c[0] + w];
    let mut yr = [c[1] - w, c[1] + w];
    if let Some(s) = scene.support() {
        xr = [xr[0].max(s.x[0]), xr[1].min(s.x[1])];
        yr = [yr[0].max(s.y[0]), yr[1].min(s.y[1])];
        if xr[1] <= xr[0] || yr[1] <= yr[0] {
            return Ok(0.0);
        }
    }
    let cuts = |axis: Axis, r: [f64; 2], centre: f64| {
        let mut v = vec![r[0]];
        v.extend(scene.edges(axis, r[0], r[1]));
        v.extend([centre - lobe, centre, centre + lobe].into_iter().filter(|&t| t > r[0] && t < r[1]));
        v.push(r[1]);
        v.sort_by(f64::total_cmp);
        v.dedup();
        refine_cuts(&v, lobe)
    };
    let xs = cuts(Axis::X, xr, c[0]);
    let ys = cuts(Axis::Y, yr, c[1]);

    let f = |x: f64, y: f64| {
        let r = (x - c[0]).hypot(y - c[1]);
        let taper = window_taper(r / w);
        if taper == 0.0 {
            return Complex64::default();
        }
        let o = scene.transmission([x, y]);
        if o == 0.0 {
            return Complex64::default();
        }
        let kr = jinc(br * (x - q[0]).hypot(y - q[1]));
        let amp = taper * o * jinc(bt * r) * kr;
        Complex64::from_polar(amp, curvature * (x * x + y * y))
    };
    let integral = integrate_2d(&f, &xs, &ys, quad)?.value;

    let lambda = cfg.wavelength;
    let dt2 = cfg.tx_diameter * cfg.tx_diameter;
    let tx_amp = (4.0 * cfg.photons_per_frame / (PI * dt2)).sqrt() * PI * dt2 / (4.0 * lambda * cfg.tx_distance);
    let rx_amp = PI * cfg.rx_diameter * cfg.rx_diameter / (4.0 * lambda * lambda * cfg.rx_distance * cfg.image_distance);
    Ok((tx_amp * rx_amp * integral).norm_sqr())
}

/// 1 up to half the window, then a C² cosine ramp to 0 at the edge.
fn window_taper(s: f64) -> f64 {
    if s <= 0.5 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        let t = (s - 0.5) / 0.5;
        // 1 - t + sin(2πt)/(2π): zero slope and curvature at both ends
        1.0 - t + (2.0 * PI * t).sin() / (2.0 * PI)
    }
}

/// Image-plane mean counts under flood illumination: `N_T` photons spread
/// uniformly over the object support, imaged coherently through the receiver
/// pupil. The object-plane quadratic phase is dropped.
///
/// The receiver amplitude kernel is a jinc whose spectrum is a disk of
/// radius `b_R / 2π`, so the field is an integral of the object spectrum over
/// that disk, evaluated once on polar nodes and reused for every pixel.
#[derive(Debug, Clone)]
pub struct FloodField {
    nodes: Vec<([f64; 2], Complex64)>,
    scale: f64,
    magnification: f64,
}

impl FloodField {
    pub fn new(cfg: &OpticalConfig, det: &DetectorArray, scene: &ObjectScene, quad: &QuadratureSpec) -> Result<Self> {
        cfg.validate()?;
        let support = scene.support().ok_or_else(|| {
            Error::config("scan", "full-field illumination needs an object of bounded support")
        })?;
        let f0 = cfg.rx_kernel_scale() / (2.0 * PI);
        let extent = support.width().max(support.height());
        // Oscillations of the object spectrum across the pupil disk set the
        // starting resolution; halve until two resolutions agree.
        let mut radial = ((4.0 * f0 * extent).ceil() as usize + 16).min(4096);
        let mut prev: Option<FloodField> = None;
        let probe: Vec<[f64; 2]> = (0..det.nx * det.ny)
            .step_by(7)
            .map(|i| det.pixel_center(i % det.nx, i / det.nx))
            .collect();
        let mut evals = 0u64;
        loop {
            let angular = 2 * radial + 8;
            evals += (radial * angular) as u64;
            let field = Self::build(cfg, det, scene, f0, radial, angular);
            if let Some(p) = &prev {
                let mut worst: f64 = 0.0;
                let mut peak: f64 = 0.0;
                for &x in &probe {
                    let (a, b) = (field.mean_at(x), p.mean_at(x));
                    worst = worst.max((a - b).abs());
                    peak = peak.max(a);
                }
                if worst <= quad.abs_tol.max(quad.rel_tol * peak) {
                    return Ok(field);
                }
                if evals > quad.max_evals {
                    return Err(Error::Numerical {
                        module: "analytic",
                        op: "flood_field",
                        msg: format!("spectral quadrature unconverged after {evals} nodes"),
                        achieved: worst,
                    });
                }
            }
            prev = Some(field);
            radial *= 2;
        }
    }

    fn build(cfg: &OpticalConfig, det: &DetectorArray, scene: &ObjectScene, f0: f64, radial: usize, angular: usize) -> Self {
        let (gl, gw) = gauss_legendre(radial);
        let dphi = 2.0 * PI / angular as f64;
        let mut nodes = Vec::with_capacity(radial * angular);
        for (t, w) in gl.iter().zip(&gw) {
            let r = 0.5 * f0 * (t + 1.0);
            let wr = 0.5 * f0 * w * r * dphi;
            for k in 0..angular {
                let phi = (k as f64 + 0.5) * dphi;
                let f = [r * phi.cos(), r * phi.sin()];
                nodes.push((f, object_spectrum(scene, f) * wr));
            }
        }
        let support = scene.support().expect("bounded support").area();
        let lambda = cfg.wavelength;
        let rx_amp = PI * cfg.rx_diameter.powi(2) / (4.0 * lambda * lambda * cfg.rx_distance * cfg.image_distance);
        // jinc(b r) = (4π / b²) ∫_disk e^{2πi f·ρ} df
        let kernel_norm = 4.0 * PI / cfg.rx_kernel_scale().powi(2);
        let amp = rx_amp * kernel_norm;
        let scale = cfg.quantum_efficiency * cfg.photons_per_frame / support * det.pixel_area() * amp * amp;
        Self {
            nodes,
            scale,
            magnification: cfg.magnification(),
        }
    }

    /// Signal mean count of a pixel centred at `pixel`.
    pub fn mean_at(&self, pixel: [f64; 2]) -> f64 {
        let q = [pixel[0] / self.magnification, pixel[1] / self.magnification];
        let mut acc = Complex64::default();
        for (f, v) in &self.nodes {
            let phase = 2.0 * PI * (f[0] * q[0] + f[1] * q[1]);
            acc += v * Complex64::from_polar(1.0, phase);
        }
        self.scale * acc.norm_sqr()
    }

    pub fn mean_map(&self, det: &DetectorArray) -> Grid<f64> {
        let values: Vec<f64> = (0..det.nx * det.ny)
            .into_par_iter()
            .map(|i| self.mean_at(det.pixel_center(i % det.nx, i / det.nx)))
            .collect();
        Grid::from_vec(det.nx, det.ny, values).expect("array shape")
    }
}

/// `∫_a^b e^{-2πi f x} dx`.
fn interval_spectrum(f: f64, a: f64, b: f64) -> Complex64 {
    let w = 2.0 * PI * f;
    if (w * (b - a)).abs() < 1e-9 {
        return Complex64::from_polar(b - a, -w * 0.5 * (a + b));
    }
    (Complex64::from_polar(1.0, -w * a) - Complex64::from_polar(1.0, -w * b)) / Complex64::new(0.0, w)
}

/// Fourier transform `∫ O(ρ) e^{-2πi f·ρ} dρ` of a bounded scene.
pub fn object_spectrum(scene: &ObjectScene, f: [f64; 2]) -> Complex64 {
    match scene {
        ObjectScene::StripeGrating { extent, orientation, .. } => {
            let along = orientation.index();
            let across = 1 - along;
            let mut g = Complex64::default();
            for (iv, amp) in scene.open_intervals(*orientation, 0.0) {
                g += interval_spectrum(f[along], iv[0], iv[1]) * amp;
            }
            let h = 0.5 * extent[across];
            g * interval_spectrum(f[across], -h, h)
        }
        ObjectScene::Bitmap(b) => {
            let s = b.pixel_size;
            let x0 = -0.5 * b.width as f64 * s;
            let y1 = 0.5 * b.height as f64 * s;
            let cols: Vec<Complex64> = (0..b.width)
                .map(|i| interval_spectrum(f[0], x0 + i as f64 * s, x0 + (i + 1) as f64 * s))
                .collect();
            let mut acc = Complex64::default();
            for row in 0..b.height {
                let mut line = Complex64::default();
                for (v, c) in b.values[row * b.width..(row + 1) * b.width].iter().zip(&cols) {
                    if *v != 0.0 {
                        line += c * *v;
                    }
                }
                if line != Complex64::default() {
                    acc += line * interval_spectrum(f[1], y1 - (row + 1) as f64 * s, y1 - row as f64 * s);
                }
            }
            acc
        }
        ObjectScene::PointSource => Complex64::default(),
    }
}
