//! Closed-form optics for the focused-transmitter / diffraction-limited
//! receiver geometry.
//!
//! The transmitter, aimed at angle θ, puts a spot on the object at `θ·L_T`.
//! The receiver lens of diameter `D_R`, `L_R` from the object, images it with
//! magnification `m = L_I / L_R` (image inversion corrected). A pixel centred
//! at `ρ_IM` in the image plane sees the receiver Airy pattern evaluated at
//!
//! ```text
//! u = π D_R |θ L_T − ρ_IM / m| / (λ L_R)
//! ```

mod bessel;

pub use bessel::{bessel_j1, j1, J1_FIRST_ZERO};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::detector::DetectorArray;
use crate::error::{Error, Result};
use crate::scene::ObjectScene;
use crate::units;

/// Transmitter/receiver geometry and photon budget. All lengths in metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticalConfig {
    #[serde(with = "units::length")]
    pub wavelength: f64,
    #[serde(with = "units::length")]
    pub tx_diameter: f64,
    #[serde(with = "units::length")]
    pub rx_diameter: f64,
    #[serde(with = "units::length")]
    pub tx_distance: f64,
    #[serde(with = "units::length")]
    pub rx_distance: f64,
    #[serde(with = "units::length")]
    pub image_distance: f64,
    /// Mean transmitted photon number per frame (pulse envelope integrated).
    pub photons_per_frame: f64,
    pub quantum_efficiency: f64,
}

impl OpticalConfig {
    pub fn validate(&self) -> Result<()> {
        let lengths = [
            ("optical.wavelength", self.wavelength),
            ("optical.tx_diameter", self.tx_diameter),
            ("optical.rx_diameter", self.rx_diameter),
            ("optical.tx_distance", self.tx_distance),
            ("optical.rx_distance", self.rx_distance),
            ("optical.image_distance", self.image_distance),
        ];
        for (path, v) in lengths {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(path, format!("must be a positive length, got {v}")));
            }
        }
        if !(self.photons_per_frame.is_finite() && self.photons_per_frame >= 0.0) {
            return Err(Error::config(
                "optical.photons_per_frame",
                format!("must be finite and non-negative, got {}", self.photons_per_frame),
            ));
        }
        if !(0.0..=1.0).contains(&self.quantum_efficiency) {
            return Err(Error::config(
                "optical.quantum_efficiency",
                format!("must lie in [0, 1], got {}", self.quantum_efficiency),
            ));
        }
        Ok(())
    }

    /// Image magnification `L_I / L_R`.
    pub fn magnification(&self) -> f64 {
        self.image_distance / self.rx_distance
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// d u / d(object-plane distance) for the receiver Airy argument.
    pub fn rx_kernel_scale(&self) -> f64 {
        PI * self.rx_diameter / (self.wavelength * self.rx_distance)
    }

    /// d u / d(object-plane distance) for the transmitter spot.
    pub fn tx_kernel_scale(&self) -> f64 {
        PI * self.tx_diameter / (self.wavelength * self.tx_distance)
    }

    /// Object-plane point illuminated by aim angle θ.
    pub fn spot_center(&self, theta: [f64; 2]) -> [f64; 2] {
        [theta[0] * self.tx_distance, theta[1] * self.tx_distance]
    }

    /// Receiver Airy argument for aim angle θ and pixel centre `pixel`.
    pub fn airy_argument(&self, theta: [f64; 2], pixel: [f64; 2]) -> f64 {
        let m = self.magnification();
        let dx = theta[0] * self.tx_distance - pixel[0] / m;
        let dy = theta[1] * self.tx_distance - pixel[1] / m;
        self.rx_kernel_scale() * dx.hypot(dy)
    }

    /// `π D_R⁴ L_T² A_p / (4 D_T² λ² L_R² L_I²)`: photons reaching a pixel of
    /// area `A_p` at the Airy peak, per transmitted photon.
    pub fn geometric_prefactor(&self, pixel_area: f64) -> f64 {
        let d_r2 = self.rx_diameter * self.rx_diameter;
        PI * d_r2 * d_r2 * self.tx_distance.powi(2) * pixel_area
            / (4.0
                * self.tx_diameter.powi(2)
                * self.wavelength.powi(2)
                * self.rx_distance.powi(2)
                * self.image_distance.powi(2))
    }

    /// Mean count at the Airy peak for a fully transmitting object point.
    pub fn peak_mean(&self, pixel_area: f64) -> f64 {
        self.quantum_efficiency * self.photons_per_frame * self.geometric_prefactor(pixel_area)
    }

    /// Transmitter first-zero spot radius at the object.
    pub fn tx_spot_radius(&self) -> f64 {
        J1_FIRST_ZERO / self.tx_kernel_scale()
    }
}

/// Normalized Airy pattern `[2 J1(u) / u]²`.
pub fn airy_intensity(u: f64) -> Result<f64> {
    if !(u >= 0.0) || !u.is_finite() {
        return Err(Error::domain("airy_intensity", format!("argument must be finite and >= 0, got {u}")));
    }
    Ok(airy(u))
}

#[inline]
pub(crate) fn airy(u: f64) -> f64 {
    let a = jinc(u);
    a * a
}

/// Field-amplitude kernel `2 J1(u) / u`, continuous at zero.
#[inline]
pub fn jinc(u: f64) -> f64 {
    let au = u.abs();
    if au < 1e-6 {
        1.0 - au * au / 8.0
    } else {
        2.0 * j1(au) / au
    }
}

/// `A(u)^n`, the postselected order-n kernel.
pub fn airy_power(u: f64, n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("airy_power", "order must be at least 1"));
    }
    Ok(airy_intensity(u)?.powi(n as i32))
}

/// Half-width at half maximum of `A(u)^n` in units of u, by bisection on the
/// monotone main lobe.
pub fn airy_half_width(n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("airy_half_width", "order must be at least 1"));
    }
    let target = 0.5_f64.powf(1.0 / n as f64);
    let (mut lo, mut hi) = (0.0, J1_FIRST_ZERO);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if airy(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Receiver first-zero radius projected to the image plane: `1.22 λ L_R / D_R · m`.
pub fn rayleigh_bound_image_plane(cfg: &OpticalConfig) -> f64 {
    J1_FIRST_ZERO / cfg.rx_kernel_scale() * cfg.magnification()
}

/// Mean photocount of the pixel centred at `pixel` while the transmitter aims
/// at `theta`. The quadratic phase of the full field integral is dropped
/// because the transmitter spot resolves the object.
pub fn mean_count(
    cfg: &OpticalConfig,
    det: &DetectorArray,
    scene: &ObjectScene,
    theta: [f64; 2],
    pixel: [f64; 2],
) -> f64 {
    let o = scene.transmission(cfg.spot_center(theta));
    if o == 0.0 {
        return 0.0;
    }
    cfg.peak_mean(det.pixel_area()) * o * o * airy(cfg.airy_argument(theta, pixel))
}
