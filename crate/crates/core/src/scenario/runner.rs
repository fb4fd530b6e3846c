use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{calibrate_peak, Artifact, Scenario};
use crate::analytic::FloodField;
use crate::detector::{dark_map, signal_mean_map, Frame, FrameSampler};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::io::frames::{counter_bits, write_frames_csv, FrameHeader, FrameWriter};
use crate::io::{pgm, write_image_csv};
use crate::metrics::{cross_section, donut_score, fwhm, stripe_contrast, Profile};
use crate::optics::rayleigh_bound_image_plane;
use crate::postselect::{CountHistogram, Selection};
use crate::scene::{sample_scan, ObjectScene, ScanPattern};
use crate::stream::{stream_id, Domain, RngStream};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Thread count; the rayon default when `None`. Results do not depend
    /// on it.
    pub workers: Option<usize>,
    pub emit_frames: bool,
    pub seed: Option<u64>,
    /// Where artifacts go; nothing is written when `None`.
    pub out_dir: Option<PathBuf>,
    /// Directory that relative bitmap paths resolve against.
    pub base_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRecord {
    pub metric: String,
    pub value: f64,
    pub tolerance: Option<String>,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub mode: String,
    #[serde(rename = "N")]
    pub n: Option<u32>,
    pub frames_processed: u64,
    pub positions: usize,
    pub seed: u64,
    pub config_digest: String,
    pub photons_per_frame: f64,
    pub peak_mean_count: f64,
    pub rayleigh_bound_image_plane_m: f64,
    pub checks_passed: usize,
    pub checks_failed: usize,
    pub warnings: Vec<String>,
    /// Unix seconds; excluded from determinism comparisons.
    pub generated_at: u64,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// The scenario as run: seed override and calibration applied.
    pub scenario: Scenario,
    pub scene: ObjectScene,
    pub positions: Vec<[f64; 2]>,
    pub dark: Grid<f64>,
    pub histogram: CountHistogram,
    pub images: Vec<(Selection, Grid<f64>)>,
    pub profiles: Vec<(Selection, Profile)>,
    pub metrics: Vec<MetricRecord>,
    pub summary: Summary,
}

impl RunOutput {
    pub fn image(&self, sel: Selection) -> Option<&Grid<f64>> {
        self.images.iter().find(|(s, _)| *s == sel).map(|(_, g)| g)
    }

    pub fn profile(&self, sel: Selection) -> Option<&Profile> {
        self.profiles.iter().find(|(s, _)| *s == sel).map(|(_, p)| p)
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|m| m.metric == name).map(|m| m.value)
    }
}

pub fn selection_label(sel: Selection) -> String {
    match sel {
        Selection::AllCounts => "all_counts".into(),
        Selection::Mode(m) => m.label(),
    }
}

/// Simulates, postselects and analyses a scenario, writing the requested
/// artifacts when `opts.out_dir` is set.
pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<RunOutput> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    pool.install(|| run_inner(scenario, opts))
}

fn run_inner(scenario: &Scenario, opts: &RunOptions) -> Result<RunOutput> {
    let start = Instant::now();
    let mut s = scenario.clone();
    if let Some(seed) = opts.seed {
        s.master_seed = seed;
    }
    s.validate()?;
    let digest = s.digest()?;
    let scene = s.scene.build(opts.base_dir.as_deref())?;
    let det = s.detector.clone();
    let mut warnings = Vec::new();
    if let Some(w) = det.dead_time_warning() {
        warnings.push(w);
    }
    if let Some(w) = s.coverage_warning(&scene) {
        warnings.push(w);
    }
    if let Some(target) = s.calibrate_peak {
        s.optical = calibrate_peak(&s.optical, &det, &scene, &s.scan, target, &s.quadrature)?;
    }
    let cfg = s.optical.clone();
    let seed = s.master_seed;

    let mut scan_rng = ChaCha8Rng::seed_from_u64(stream_id(seed, Domain::Scan, 0, 0));
    let positions = sample_scan(&s.scan, &mut scan_rng)?;
    info!("{}: {} positions x {} frames", s.name, positions.len(), s.frames_per_position);

    let dark = dark_map(&det, s.dark_frames, seed)?;
    let flood = match s.scan {
        ScanPattern::FullField => Some(FloodField::new(&cfg, &det, &scene, &s.quadrature)?.mean_map(&det)),
        _ => None,
    };
    let mean_map = |theta: [f64; 2]| match &flood {
        Some(m) => m.clone(),
        None => signal_mean_map(&cfg, &det, &scene, theta),
    };
    let peak_mean = positions
        .iter()
        .map(|&t| mean_map(t).max_value())
        .fold(0.0, f64::max);

    let cap = det.count_cap();
    let frames = s.frames_per_position;
    if let Some(dir) = &opts.out_dir {
        fs::create_dir_all(dir)?;
    }
    let want = |a: Artifact| s.outputs.contains(&a);
    let emit_bin = opts.emit_frames || want(Artifact::Frames);
    let emit_csv = want(Artifact::FramesCsv);

    let emit_dir = opts.out_dir.as_ref().filter(|_| emit_bin || emit_csv);
    let histogram = if let Some(dir) = emit_dir {
        let header = FrameHeader {
            nx: det.nx as u32,
            ny: det.ny as u32,
            counter_bits: counter_bits(cap),
            frame_count: frames * positions.len() as u64,
        };
        let mut bin = if emit_bin {
            Some(FrameWriter::new(BufWriter::new(File::create(dir.join("frames.bin"))?), header)?)
        } else {
            None
        };
        let mut csv = if emit_csv {
            let mut w = BufWriter::new(File::create(dir.join("frames.csv"))?);
            write_frames_csv(&mut w, std::iter::empty())?;
            Some(w)
        } else {
            None
        };
        let mut hist = CountHistogram::new(det.nx, det.ny, cap);
        const CHUNK: u64 = 512;
        for (i, &theta) in positions.iter().enumerate() {
            let sampler = FrameSampler::new(&det, &mean_map(theta))?;
            let mut f0 = 0;
            while f0 < frames {
                let f1 = (f0 + CHUNK).min(frames);
                let chunk: Vec<Frame> = (f0..f1)
                    .into_par_iter()
                    .map(|f| {
                        let mut stream = RngStream::new(seed, Domain::Signal, i as u64, f);
                        sampler.sample_frame(theta, i as u64 * frames + f, &mut stream)
                    })
                    .collect();
                for fr in &chunk {
                    hist.add_frame(&fr.counts, &dark)?;
                    if let Some(w) = bin.as_mut() {
                        w.write_frame(fr)?;
                    }
                }
                if let Some(w) = csv.as_mut() {
                    write_frames_csv_rows(w, &chunk)?;
                }
                f0 = f1;
            }
        }
        if let Some(w) = bin {
            w.finish()?.flush()?;
        }
        if let Some(mut w) = csv {
            w.flush()?;
        }
        hist
    } else {
        let samplers = positions
            .iter()
            .map(|&t| FrameSampler::new(&det, &mean_map(t)))
            .collect::<Result<Vec<_>>>()?;
        let jobs: Vec<(usize, u64)> = (0..positions.len())
            .flat_map(|i| (0..frames).step_by(1024).map(move |f| (i, f)))
            .collect();
        let zero = || CountHistogram::new(det.nx, det.ny, cap);
        jobs.into_par_iter()
            .try_fold(zero, |mut h, (i, f0)| {
                for f in f0..(f0 + 1024).min(frames) {
                    let mut stream = RngStream::new(seed, Domain::Signal, i as u64, f);
                    let counts = samplers[i].sample_counts(&mut stream.rng);
                    h.add_frame(&counts, &dark)?;
                }
                Ok::<_, Error>(h)
            })
            .try_reduce(zero, |mut a, b| {
                a.merge(&b)?;
                Ok(a)
            })?
    };

    let mut selections = vec![s.selection];
    for e in &s.analysis.extra {
        if !selections.contains(e) {
            selections.push(*e);
        }
    }
    let mut images = Vec::new();
    for &sel in &selections {
        let img = match sel {
            Selection::AllCounts => histogram.conventional()?,
            Selection::Mode(m) => histogram.image(m, &digest).frequency(),
        };
        images.push((sel, img));
    }

    let (profiles, mut metrics) = analyse(&s, &scene, &images, &mut warnings);
    let mut passed = 0;
    let mut failed = 0;
    for c in &s.analysis.checks {
        let value = metrics.iter().find(|m| m.metric == c.metric).map(|m| m.value);
        let ok = value.is_some_and(|v| c.accepts(v));
        if ok {
            passed += 1;
        } else {
            failed += 1;
        }
        metrics.push(MetricRecord {
            metric: format!("check.{}", c.metric),
            value: value.unwrap_or(f64::NAN),
            tolerance: Some(c.describe()),
            pass: Some(ok),
        });
    }
    for w in &warnings {
        warn!("{w}");
    }

    let summary = Summary {
        scenario: s.name.clone(),
        mode: s.selection.to_string(),
        n: match s.selection {
            Selection::Mode(m) => Some(m.order()),
            Selection::AllCounts => None,
        },
        frames_processed: histogram.frames(),
        positions: positions.len(),
        seed,
        config_digest: digest,
        photons_per_frame: cfg.photons_per_frame,
        peak_mean_count: peak_mean,
        rayleigh_bound_image_plane_m: rayleigh_bound_image_plane(&cfg),
        checks_passed: passed,
        checks_failed: failed,
        warnings,
        generated_at: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        elapsed_seconds: start.elapsed().as_secs_f64(),
    };

    let out = RunOutput {
        scenario: s,
        scene,
        positions,
        dark,
        histogram,
        images,
        profiles,
        metrics,
        summary,
    };
    if let Some(dir) = &opts.out_dir {
        write_artifacts(&out, dir)?;
    }
    Ok(out)
}

fn write_frames_csv_rows(w: &mut impl Write, frames: &[Frame]) -> std::io::Result<()> {
    for f in frames {
        for (x, y, c) in f.counts.indexed() {
            writeln!(w, "{},{},{},{x},{y},{c}", f.frame_index, f.theta[0], f.theta[1])?;
        }
    }
    Ok(())
}

fn analyse(
    s: &Scenario,
    scene: &ObjectScene,
    images: &[(Selection, Grid<f64>)],
    warnings: &mut Vec<String>,
) -> (Vec<(Selection, Profile)>, Vec<MetricRecord>) {
    let det = &s.detector;
    let a = &s.analysis;
    let across = match a.profile_axis {
        crate::scene::Axis::X => det.ny,
        crate::scene::Axis::Y => det.nx,
    };
    let offset = a.profile_offset.unwrap_or(across / 2);
    let stripe_period = match scene {
        ObjectScene::StripeGrating { period, orientation, .. } if *orientation == a.profile_axis => {
            Some(period * s.optical.magnification())
        }
        _ => None,
    };
    let mut profiles = Vec::new();
    let mut metrics = Vec::new();
    let mut record = |name: String, value: f64| {
        metrics.push(MetricRecord {
            metric: name,
            value,
            tolerance: None,
            pass: None,
        })
    };
    let mut reference_fwhm = None;
    let mut fwhms = Vec::new();
    for (sel, img) in images {
        let label = selection_label(*sel);
        record(format!("{label}.peak"), img.max_value());
        let p = match cross_section(img, det.pitch, a.profile_axis, offset, a.profile_width) {
            Ok(p) => p,
            Err(e) => {
                warnings.push(format!("{label}: no profile: {e}"));
                continue;
            }
        };
        match fwhm(&p) {
            Ok(f) => {
                if f.multiple_crossings {
                    warnings.push(format!("{label}: profile crosses half maximum more than twice"));
                }
                record(format!("{label}.fwhm"), f.width);
                if *sel == Selection::AllCounts {
                    reference_fwhm = Some(f.width);
                }
                fwhms.push((label.clone(), f.width));
            }
            Err(e) => warnings.push(format!("{label}: {e}")),
        }
        if let Ok(d) = donut_score(&p) {
            record(format!("{label}.donut_score"), d);
        }
        if let Some(period) = stripe_period {
            match stripe_contrast(&p, period) {
                Ok(c) => record(format!("{label}.stripe_contrast"), c),
                Err(e) => warnings.push(format!("{label}: {e}")),
            }
        }
        profiles.push((*sel, p));
    }
    if let Some(r) = reference_fwhm {
        for (label, w) in fwhms {
            if label != "all_counts" {
                record(format!("fwhm_ratio.{label}"), w / r);
            }
        }
    }
    (profiles, metrics)
}

fn write_artifacts(out: &RunOutput, dir: &Path) -> Result<()> {
    let s = &out.scenario;
    let want = |a: Artifact| s.outputs.contains(&a);
    if want(Artifact::Images) {
        for (sel, img) in &out.images {
            let label = selection_label(*sel);
            let header = match sel {
                Selection::AllCounts => "mean_count",
                Selection::Mode(_) => "frequency",
            };
            write_image_csv(BufWriter::new(File::create(dir.join(format!("image_{label}.csv")))?), header, img)?;
            let (gray, maxval) = match sel {
                Selection::AllCounts => pgm::real_to_u16(img),
                Selection::Mode(m) => pgm::tallies_to_u16(&out.histogram.image(*m, "").tallies),
            };
            pgm::write_p5_16(BufWriter::new(File::create(dir.join(format!("image_{label}.pgm")))?), &gray, maxval)?;
        }
    }
    if want(Artifact::Profiles) {
        for (sel, p) in &out.profiles {
            fs::write(dir.join(format!("profile_{}.csv", selection_label(*sel))), p.to_csv())?;
        }
    }
    if want(Artifact::DarkMap) {
        write_image_csv(BufWriter::new(File::create(dir.join("dark_map.csv"))?), "dark_mean", &out.dark)?;
    }
    if want(Artifact::Metrics) {
        fs::write(dir.join("metrics.json"), to_json(&out.metrics))?;
    }
    if want(Artifact::Summary) {
        fs::write(dir.join("summary.json"), to_json(&out.summary))?;
    }
    fs::write(dir.join("scenario.toml"), s.to_toml_string()?)?;
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}
