//! `subrayleigh`: run canned or custom scenarios, postselect stored frames,
//! and query the analytic oracle.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use subrayleigh_core::analytic::{analytic_pn, analytic_pn_map, asymptotic_image};
use subrayleigh_core::grid::Grid;
use subrayleigh_core::io::frames::FrameReader;
use subrayleigh_core::io::{pgm, read_image_csv, write_image_csv};
use subrayleigh_core::metrics::{cross_section, donut_score, fwhm, fwhm_sweep, stripe_contrast};
use subrayleigh_core::postselect::{CountHistogram, Selection};
use subrayleigh_core::scenario::{builtin, builtin_names, calibrate_peak, run_scenario, selection_label, RunOptions, Scenario};
use subrayleigh_core::scene::{Axis, ObjectScene};
use subrayleigh_core::units::{parse_quantity, Dimension};
use subrayleigh_core::{Error, Result};

#[derive(Parser)]
#[command(name = "subrayleigh", version, about = "Focused-beam scanning with N-photon postselection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario, postselect and analyse it.
    #[command(alias = "run")]
    Simulate(SimulateArgs),
    /// Build N-photon images from a stored frame file.
    Postselect(PostselectArgs),
    /// Profile metrics of an image CSV or of an oracle image.
    Analyze(AnalyzeArgs),
    /// Analytic P_N map of a scenario.
    Oracle(OracleArgs),
    /// FWHM of A(u)^N against N, relative to N = 1.
    Sweep(SweepArgs),
    /// List the shipped scenarios, or print one.
    Scenarios {
        name: Option<String>,
    },
}

#[derive(Args)]
struct Source {
    /// Scenario file.
    #[arg(long, conflicts_with = "scenario")]
    config: Option<PathBuf>,
    /// Shipped scenario name.
    #[arg(long)]
    scenario: Option<String>,
}

impl Source {
    fn load(&self) -> Result<(Scenario, Option<PathBuf>)> {
        match (&self.config, &self.scenario) {
            (Some(p), _) => Ok((Scenario::from_path(p)?, p.parent().map(Path::to_path_buf))),
            (None, Some(name)) => {
                let text = builtin(name).ok_or_else(|| {
                    Error::config("scenario", format!("unknown scenario `{name}`; known: {}", builtin_names().collect::<Vec<_>>().join(", ")))
                })?;
                Ok((Scenario::from_toml_str(text)?, None))
            }
            (None, None) => Err(Error::config("config", "pass --config PATH or --scenario NAME")),
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    emit_frames: Option<bool>,
}

#[derive(Args)]
struct PostselectArgs {
    #[arg(long)]
    frames: PathBuf,
    /// Dark map CSV; no correction when omitted.
    #[arg(long)]
    dark: Option<PathBuf>,
    /// exact:N, at_least:N or all_counts. Repeatable.
    #[arg(long = "select", required = true)]
    selections: Vec<Selection>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    X,
    Y,
}

impl From<AxisArg> for Axis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::X => Axis::X,
            AxisArg::Y => Axis::Y,
        }
    }
}

#[derive(Args)]
struct ProfileArgs {
    #[arg(long, value_enum, default_value = "x")]
    axis: AxisArg,
    /// Row or column of the band; array centre by default.
    #[arg(long)]
    offset: Option<usize>,
    #[arg(long, default_value_t = 1)]
    width: usize,
    /// Detector pitch, e.g. 100um. Taken from the scenario when one is given.
    #[arg(long)]
    pitch: Option<String>,
    /// Stripe period in the image plane, for stripe contrast.
    #[arg(long)]
    period: Option<String>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long, conflicts_with = "oracle")]
    image: Option<PathBuf>,
    /// Analyse the analytic exact-N image of the scenario instead.
    #[arg(long, value_name = "N", requires = "scenario_source")]
    oracle: Option<u32>,
    #[command(flatten)]
    source: OptSource,
    #[command(flatten)]
    profile: ProfileArgs,
}

#[derive(Args)]
#[group(id = "scenario_source", multiple = false)]
struct OptSource {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<String>,
}

impl OptSource {
    fn as_source(&self) -> Option<Source> {
        (self.config.is_some() || self.scenario.is_some()).then(|| Source {
            config: self.config.clone(),
            scenario: self.scenario.clone(),
        })
    }
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    n: u32,
    /// Pixel indices `x,y`; prints one probability instead of a map.
    #[arg(long, value_delimiter = ',')]
    pixel: Option<Vec<usize>>,
    /// Large-N asymptotic shape instead of exact statistics.
    #[arg(long)]
    asymptotic: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 2)]
    n_min: u32,
    #[arg(long, default_value_t = 50)]
    n_max: u32,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn length(text: &str, field: &str) -> Result<f64> {
    parse_quantity(text, Dimension::Length).map_err(|m| Error::config(field, m))
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let (scenario, base_dir) = a.source.load()?;
    let opts = RunOptions {
        workers: a.workers,
        emit_frames: a.emit_frames.unwrap_or(false),
        seed: a.seed,
        out_dir: a.out,
        base_dir,
    };
    let out = run_scenario(&scenario, &opts)?;
    for m in &out.metrics {
        let status = match m.pass {
            Some(true) => " PASS",
            Some(false) => " FAIL",
            None => "",
        };
        eprintln!("{:<40} {:>14.6e}{status}", m.metric, m.value);
    }
    print_json(&serde_json::to_value(&out.summary).expect("serializable"));
    Ok(())
}

fn postselect(a: PostselectArgs) -> Result<()> {
    let reader = FrameReader::new(BufReader::new(File::open(&a.frames)?))?;
    let h = reader.header();
    let (nx, ny) = (h.nx as usize, h.ny as usize);
    let dark = match &a.dark {
        Some(p) => {
            let d = read_image_csv(&fs::read_to_string(p)?)?;
            if d.shape() != (nx, ny) {
                return Err(Error::config("dark", "dark map shape does not match the frames"));
            }
            d
        }
        None => Grid::filled(nx, ny, 0.0),
    };
    let max = if h.counter_bits >= 16 { u16::MAX as u32 } else { (1u32 << h.counter_bits) - 1 };
    let mut hist = CountHistogram::new(nx, ny, max);
    for frame in reader {
        hist.add_frame(&frame?.counts, &dark)?;
    }
    fs::create_dir_all(&a.out)?;
    let mut report = Vec::new();
    for sel in a.selections {
        let label = selection_label(sel);
        let (img, gray) = match sel {
            Selection::AllCounts => {
                let img = hist.conventional()?;
                let gray = pgm::real_to_u16(&img);
                (img, gray)
            }
            Selection::Mode(m) => {
                let image = hist.image(m, "");
                (image.frequency(), pgm::tallies_to_u16(&image.tallies))
            }
        };
        write_image_csv(BufWriter::new(File::create(a.out.join(format!("image_{label}.csv")))?), "value", &img)?;
        pgm::write_p5_16(BufWriter::new(File::create(a.out.join(format!("image_{label}.pgm")))?), &gray.0, gray.1)?;
        report.push(json!({ "selection": sel.to_string(), "peak": img.max_value() }));
    }
    print_json(&json!({ "frames_processed": hist.frames(), "images": report }));
    Ok(())
}

fn profile_metrics(img: &Grid<f64>, p: &ProfileArgs, pitch: f64, period: Option<f64>) -> Result<Value> {
    let axis: Axis = p.axis.into();
    let across = match axis {
        Axis::X => img.ny(),
        Axis::Y => img.nx(),
    };
    let profile = cross_section(img, pitch, axis, p.offset.unwrap_or(across / 2), p.width)?;
    let mut m = serde_json::Map::new();
    m.insert("peak".into(), json!(profile.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)));
    match fwhm(&profile) {
        Ok(f) => {
            m.insert("fwhm_m".into(), json!(f.width));
            m.insert("multiple_crossings".into(), json!(f.multiple_crossings));
            m.insert("donut_score".into(), json!(donut_score(&profile)?));
        }
        Err(e) => {
            m.insert("fwhm_error".into(), json!(e.to_string()));
        }
    }
    if let Some(period) = period {
        m.insert("stripe_contrast".into(), json!(stripe_contrast(&profile, period)?));
    }
    Ok(Value::Object(m))
}

fn scenario_period(s: &Scenario, scene: &ObjectScene) -> Option<f64> {
    match scene {
        ObjectScene::StripeGrating { period, .. } => Some(period * s.optical.magnification()),
        _ => None,
    }
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let loaded = a.source.as_source().map(|s| s.load()).transpose()?;
    let scenario = match &loaded {
        Some((s, dir)) => Some((s.clone(), s.scene.build(dir.as_deref())?)),
        None => None,
    };
    let img = match (&a.image, a.oracle) {
        (Some(p), _) => read_image_csv(&fs::read_to_string(p)?)?,
        (None, Some(n)) => {
            let (s, scene) = scenario.as_ref().expect("clap requires a scenario with --oracle");
            let cfg = calibrated(s, scene)?;
            analytic_pn_map(&cfg, &s.detector, scene, &s.scan, n, &s.quadrature)?
        }
        (None, None) => return Err(Error::config("image", "pass --image PATH or --oracle N")),
    };
    let pitch = match (&a.profile.pitch, &scenario) {
        (Some(t), _) => length(t, "pitch")?,
        (None, Some((s, _))) => s.detector.pitch,
        (None, None) => return Err(Error::config("pitch", "pass --pitch or a scenario")),
    };
    let period = match (&a.profile.period, &scenario) {
        (Some(t), _) => Some(length(t, "period")?),
        (None, Some((s, scene))) => scenario_period(s, scene),
        (None, None) => None,
    };
    print_json(&profile_metrics(&img, &a.profile, pitch, period)?);
    Ok(())
}

fn calibrated(s: &Scenario, scene: &ObjectScene) -> Result<subrayleigh_core::optics::OpticalConfig> {
    match s.calibrate_peak {
        Some(t) => calibrate_peak(&s.optical, &s.detector, scene, &s.scan, t, &s.quadrature),
        None => Ok(s.optical.clone()),
    }
}

fn oracle(a: OracleArgs) -> Result<()> {
    let (s, dir) = a.source.load()?;
    let scene = s.scene.build(dir.as_deref())?;
    let cfg = calibrated(&s, &scene)?;
    let det = &s.detector;
    if let Some(px) = &a.pixel {
        if px.len() != 2 || px[0] >= det.nx || px[1] >= det.ny {
            return Err(Error::config("pixel", "pixel index outside the array"));
        }
        let p = analytic_pn(&cfg, det, &scene, &s.scan, a.n, det.pixel_center(px[0], px[1]), &s.quadrature)?;
        print_json(&json!({ "N": a.n, "pixel": px, "P_N": p }));
        return Ok(());
    }
    let (img, header) = if a.asymptotic {
        (asymptotic_image(&cfg, det, &scene, &s.scan, a.n, &s.quadrature)?, "relative_intensity")
    } else {
        (analytic_pn_map(&cfg, det, &scene, &s.scan, a.n, &s.quadrature)?, "p_n")
    };
    if let Some(path) = &a.out {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        write_image_csv(BufWriter::new(File::create(path)?), header, &img)?;
    }
    print_json(&json!({ "N": a.n, "asymptotic": a.asymptotic, "max": img.max_value(), "photons_per_frame": cfg.photons_per_frame }));
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let rows = fwhm_sweep(a.n_min, a.n_max)?;
    let mut text = String::from("n,fwhm_root,fwhm_sampled,ratio,inv_sqrt_n,rel_error\n");
    for r in &rows {
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.n, r.fwhm_root, r.fwhm_sampled, r.ratio, r.inv_sqrt_n, r.rel_error
        ));
    }
    match &a.out {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Postselect(a) => postselect(a),
        Command::Analyze(a) => analyze(a),
        Command::Oracle(a) => oracle(a),
        Command::Sweep(a) => sweep(a),
        Command::Scenarios { name } => match name {
            Some(n) => match builtin(&n) {
                Some(text) => {
                    print!("{text}");
                    Ok(())
                }
                None => Err(Error::config("scenario", format!("unknown scenario `{n}`"))),
            },
            None => {
                for n in builtin_names() {
                    println!("{n}");
                }
                Ok(())
            }
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
