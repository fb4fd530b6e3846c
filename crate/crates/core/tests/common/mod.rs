#![allow(dead_code)]

use subrayleigh_core::scenario::{builtin, calibrate_peak, Scenario};
use subrayleigh_core::scene::ObjectScene;

/// A shipped scenario with its photon budget calibrated.
pub fn calibrated(name: &str) -> (Scenario, ObjectScene) {
    let mut s = Scenario::from_toml_str(builtin(name).unwrap()).unwrap();
    let scene = s.scene.build(None).unwrap();
    if let Some(t) = s.calibrate_peak {
        s.optical = calibrate_peak(&s.optical, &s.detector, &scene, &s.scan, t, &s.quadrature).unwrap();
    }
    (s, scene)
}

pub fn rms(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}
