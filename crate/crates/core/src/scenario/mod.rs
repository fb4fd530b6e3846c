//! Scenario files: the full description of a run, parsed from TOML with
//! unit-suffixed quantities.

mod builtin;
mod runner;

pub use builtin::{builtin, builtin_names};
pub use runner::{run_scenario, selection_label, MetricRecord, RunOptions, RunOutput, Summary};

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytic::{FloodField, QuadratureSpec};
use crate::detector::DetectorArray;
use crate::error::{Error, Result};
use crate::optics::{mean_count, OpticalConfig};
use crate::postselect::Selection;
use crate::scene::{Axis, ObjectScene, SceneSpec, ScanPattern};

fn default_dark_frames() -> u64 {
    2000
}

fn default_outputs() -> Vec<Artifact> {
    vec![
        Artifact::Images,
        Artifact::Profiles,
        Artifact::Metrics,
        Artifact::Summary,
        Artifact::DarkMap,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Artifact {
    /// Raw frames in the binary frame format.
    Frames,
    FramesCsv,
    /// CSV and 16-bit graymap of every analysed image.
    Images,
    Profiles,
    Metrics,
    Summary,
    DarkMap,
}

/// Acceptance window on a named metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub metric: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

impl Check {
    pub fn accepts(&self, v: f64) -> bool {
        self.min.is_none_or(|m| v >= m) && self.max.is_none_or(|m| v <= m)
    }

    pub fn describe(&self) -> String {
        match (self.min, self.max) {
            (Some(a), Some(b)) => format!("[{a}, {b}]"),
            (Some(a), None) => format!(">= {a}"),
            (None, Some(b)) => format!("<= {b}"),
            (None, None) => "any".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Analysis {
    #[serde(default = "default_axis")]
    pub profile_axis: Axis,
    /// Row (x profile) or column of the profile band; the array centre when
    /// omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile_offset: Option<usize>,
    #[serde(default = "default_width")]
    pub profile_width: usize,
    /// Images analysed besides the primary selection.
    #[serde(default)]
    pub extra: Vec<Selection>,
    #[serde(default)]
    pub checks: Vec<Check>,
}

fn default_axis() -> Axis {
    Axis::X
}

fn default_width() -> usize {
    1
}

impl Default for Analysis {
    fn default() -> Self {
        Self {
            profile_axis: Axis::X,
            profile_offset: None,
            profile_width: 1,
            extra: Vec::new(),
            checks: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub optical: OpticalConfig,
    pub detector: DetectorArray,
    pub scene: SceneSpec,
    pub scan: ScanPattern,
    pub frames_per_position: u64,
    pub selection: Selection,
    #[serde(with = "seed")]
    pub master_seed: u64,
    /// Rescale the photon budget so the brightest pixel mean equals this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibrate_peak: Option<f64>,
    #[serde(default = "default_dark_frames")]
    pub dark_frames: u64,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<Artifact>,
    #[serde(default)]
    pub analysis: Analysis,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
}

/// Seeds above `i64::MAX` do not fit a TOML integer and are written as
/// strings.
mod seed {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(*v) {
            Ok(i) => s.serialize_i64(i),
            Err(_) => s.collect_str(v),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(i64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Int(i) => u64::try_from(i).map_err(|_| serde::de::Error::custom("seed must be non-negative")),
            Raw::Text(t) => t.trim().parse().map_err(serde::de::Error::custom),
        }
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::Config {
            path: String::new(),
            msg: e.message().to_string(),
        })?;
        let s: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config {
                path: if path == "." { String::new() } else { path },
                msg: e.into_inner().message().to_string(),
            }
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), format!("cannot read scenario: {e}")))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format {
            what: "scenario",
            msg: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.optical.validate()?;
        self.detector.validate()?;
        self.scan.validate()?;
        self.quadrature.validate()?;
        if self.frames_per_position == 0 {
            return Err(Error::config("frames_per_position", "must be at least 1"));
        }
        if self.dark_frames == 0 {
            return Err(Error::config("dark_frames", "must be at least 1"));
        }
        if let Some(t) = self.calibrate_peak {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::config("calibrate_peak", "must be positive"));
            }
        }
        if self.analysis.profile_width == 0 {
            return Err(Error::config("analysis.profile_width", "must be at least 1"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical serialization.
    pub fn digest(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml_string()?.as_bytes())))
    }

    /// Warns when a random scan draws fewer than four positions per stripe
    /// period across the scanned extent.
    pub fn coverage_warning(&self, scene: &ObjectScene) -> Option<String> {
        let ScanPattern::UniformRandom { region, n_positions } = &self.scan else {
            return None;
        };
        let ObjectScene::StripeGrating { period, orientation, .. } = scene else {
            return None;
        };
        let span = match orientation {
            Axis::X => region.x[1] - region.x[0],
            Axis::Y => region.y[1] - region.y[0],
        } * self.optical.tx_distance;
        let periods = span / period;
        let per_period = *n_positions as f64 / periods.max(1.0);
        (per_period < 4.0).then(|| {
            format!("scan draws {per_period:.1} positions per stripe period; at least 4 are advised")
        })
    }
}

/// Largest pixel mean count reachable by the scan, over aim angles and
/// pixels.
pub fn peak_mean_count(
    cfg: &OpticalConfig,
    det: &DetectorArray,
    scene: &ObjectScene,
    scan: &ScanPattern,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let peak = match scan {
        ScanPattern::Fixed { theta } => (0..det.nx * det.ny)
            .map(|i| mean_count(cfg, det, scene, *theta, det.pixel_center(i % det.nx, i / det.nx)))
            .fold(0.0, f64::max),
        ScanPattern::FullField => FloodField::new(cfg, det, scene, quad)?
            .mean_map(det)
            .max_value(),
        ScanPattern::UniformRandom { region, .. } | ScanPattern::Grid { region, .. } => {
            // A continuous scan can always put the spot's image on a pixel
            // centre, so the peak is the brightest transmission reached.
            const STEPS: usize = 400;
            let mut o_max: f64 = 0.0;
            for j in 0..=STEPS {
                for i in 0..=STEPS {
                    let t = [
                        region.x[0] + (region.x[1] - region.x[0]) * i as f64 / STEPS as f64,
                        region.y[0] + (region.y[1] - region.y[0]) * j as f64 / STEPS as f64,
                    ];
                    o_max = o_max.max(scene.transmission(cfg.spot_center(t)));
                }
            }
            cfg.peak_mean(det.pixel_area()) * o_max * o_max
        }
    };
    Ok(peak)
}

/// Scales `photons_per_frame` so that the peak mean count equals `target`.
pub fn calibrate_peak(
    cfg: &OpticalConfig,
    det: &DetectorArray,
    scene: &ObjectScene,
    scan: &ScanPattern,
    target: f64,
    quad: &QuadratureSpec,
) -> Result<OpticalConfig> {
    if !(target.is_finite() && target > 0.0) {
        return Err(Error::domain("calibrate_peak", "target must be positive"));
    }
    let mut unit = cfg.clone();
    unit.photons_per_frame = 1.0;
    let per_photon = peak_mean_count(&unit, det, scene, scan, quad)?;
    if !(per_photon > 0.0) {
        return Err(Error::domain("calibrate_peak", "no light reaches the detector: zero-transmission scene"));
    }
    unit.photons_per_frame = target / per_photon;
    Ok(unit)
}
