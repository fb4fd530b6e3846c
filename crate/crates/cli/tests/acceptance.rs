//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use subrayleigh_core::analytic::{analytic_pn_map, poisson_pmf};
use subrayleigh_core::detector::PoissonSampler;
use subrayleigh_core::optics::j1;
use subrayleigh_core::postselect::{Selection, SelectionMode};
use subrayleigh_core::scenario::{builtin, run_scenario, RunOptions, RunOutput, Scenario};

const BIN: &str = env!("CARGO_BIN_EXE_subrayleigh");

// Tolerances.
const INV_SQRT_23: f64 = 0.208_514_414_057_074_9;
const NARROWING_REL_TOL: f64 = 0.20;
const NARROWING_RUNTIME_S: f64 = 60.0;
const DONUT9_MIN: f64 = 0.2;
const RATIO15_RANGE: (f64, f64) = (0.7, 1.0);
const CONVENTIONAL_CONTRAST_MAX: f64 = 0.1;
const SCANNED_CONTRAST_MIN: f64 = 0.5;
const CONTROL_CONTRAST_MAX: f64 = 0.15;
const ORACLE_SIGMAS: f64 = 3.0;
const ORACLE_PIXEL_FRACTION: f64 = 0.99;
const FANO_TOL: f64 = 0.005;
const CHI2_P_MIN: f64 = 0.001;
const PMF_NORM_TOL: f64 = 1e-12;
const J1_TOL: f64 = 1e-12;
const SWEEP_REL_TOL: f64 = 0.10;
const SWEEP_RUNTIME_S: f64 = 1.0;

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, id: u32, pass: bool, detail: String) {
        if !pass {
            self.failed += 1;
        }
        println!("{} criterion {id}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn load(name: &str) -> Scenario {
    Scenario::from_toml_str(builtin(name).expect("shipped scenario")).expect("valid scenario")
}

fn run(s: &Scenario, workers: Option<usize>) -> RunOutput {
    run_scenario(s, &RunOptions { workers, ..Default::default() }).expect("run succeeds")
}

fn metric(out: &RunOutput, name: &str) -> f64 {
    out.metric(name).unwrap_or(f64::NAN)
}

fn point_source(report: &mut Report) -> RunOutput {
    let mut s = load("fig3a");
    s.analysis.extra = [9, 15, 23].map(|n| Selection::Mode(SelectionMode::Exact(n))).to_vec();
    let t = Instant::now();
    let out = run(&s, Some(1));
    let secs = t.elapsed().as_secs_f64();

    let ratio = metric(&out, "fwhm_ratio.exact23");
    let ok = (ratio / INV_SQRT_23 - 1.0).abs() <= NARROWING_REL_TOL && secs < NARROWING_RUNTIME_S;
    report.line(
        1,
        ok,
        format!(
            "FWHM(exact23)/FWHM(all) = {ratio:.4}, target {INV_SQRT_23:.4} ±{:.0}%; {:.1} s single worker (< {NARROWING_RUNTIME_S} s)",
            NARROWING_REL_TOL * 100.0,
            secs
        ),
    );

    let d9 = metric(&out, "exact9.donut_score");
    let r15 = metric(&out, "fwhm_ratio.exact15");
    let d23 = metric(&out, "exact23.donut_score");
    let ok = d9 > DONUT9_MIN && r15 > RATIO15_RANGE.0 && r15 < RATIO15_RANGE.1 && d23 <= 0.0;
    report.line(
        2,
        ok,
        format!(
            "donut(exact9) = {d9:.3} (> {DONUT9_MIN}); FWHM ratio exact15 = {r15:.4} (in ({}, {})); donut(exact23) = {d23:.3} (<= 0)",
            RATIO15_RANGE.0, RATIO15_RANGE.1
        ),
    );
    out
}

fn stripes(report: &mut Report) {
    let conv = run(&load("fig2b"), None);
    let scan = run(&load("fig2cd"), None);
    let c_conv = metric(&conv, "all_counts.stripe_contrast");
    let c_scan = metric(&scan, "exact23.stripe_contrast");
    let ratio = conv.summary.rayleigh_bound_image_plane_m / (0.5 * stripe_period_image(&conv));
    report.line(
        3,
        c_conv < CONVENTIONAL_CONTRAST_MAX && c_scan > SCANNED_CONTRAST_MIN,
        format!(
            "Rayleigh bound / stripe width = {ratio:.2}; conventional contrast = {c_conv:.4} (< {CONVENTIONAL_CONTRAST_MAX}); scanned exact23 contrast = {c_scan:.4} (> {SCANNED_CONTRAST_MIN})"
        ),
    );

    let control = run(&load("control-full-illum-exactN"), None);
    let c = metric(&control, "exact23.stripe_contrast");
    report.line(4, c < CONTROL_CONTRAST_MAX, format!("full-illumination exact23 contrast = {c:.4} (< {CONTROL_CONTRAST_MAX})"));
}

fn stripe_period_image(out: &RunOutput) -> f64 {
    match out.scene {
        subrayleigh_core::scene::ObjectScene::StripeGrating { period, .. } => period * out.scenario.optical.magnification(),
        _ => f64::NAN,
    }
}

fn oracle_equivalence(report: &mut Report, out: &RunOutput) {
    let frames = out.histogram.frames() as f64;
    let s = &out.scenario;
    let mut parts = Vec::new();
    let mut ok = true;
    for n in [9, 15, 23] {
        let mc = out.histogram.image(SelectionMode::Exact(n), "").frequency();
        let p = analytic_pn_map(&s.optical, &s.detector, &out.scene, &s.scan, n, &s.quadrature).expect("oracle");
        let inside = mc
            .data()
            .iter()
            .zip(p.data())
            .filter(|(&f, &p)| (f - p).abs() <= ORACLE_SIGMAS * (p * (1.0 - p) / frames).sqrt())
            .count();
        let frac = inside as f64 / mc.data().len() as f64;
        ok &= frac >= ORACLE_PIXEL_FRACTION;
        parts.push(format!("N={n}: {:.2}%", 100.0 * frac));
    }
    report.line(
        5,
        ok,
        format!(
            "pixels within {ORACLE_SIGMAS}σ of the analytic P_N over {frames} frames: {} (>= {:.0}%)",
            parts.join(", "),
            ORACLE_PIXEL_FRACTION * 100.0
        ),
    );
}

/// `J1(x) = (1/π) ∫_0^π cos(τ − x sin τ) dτ`; the trapezoid rule on a
/// periodic integrand converges geometrically.
fn j1_integral(x: f64) -> f64 {
    const M: usize = 256;
    let h = std::f64::consts::PI / M as f64;
    let f = |t: f64| (t - x * t.sin()).cos();
    let mut s = 0.5 * (f(0.0) + f(std::f64::consts::PI));
    for k in 1..M {
        s += f(k as f64 * h);
    }
    s * h / std::f64::consts::PI
}

fn kernels(report: &mut Report) {
    const MU: f64 = 14.0;
    const DRAWS: usize = 1_000_000;
    let sampler = PoissonSampler::new(MU).expect("valid mean");
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_614);
    let mut hist: BTreeMap<u64, u64> = BTreeMap::new();
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..DRAWS {
        let k = sampler.sample(&mut rng);
        *hist.entry(k).or_default() += 1;
        sum += k as f64;
        sum2 += (k * k) as f64;
    }
    let mean = sum / DRAWS as f64;
    let var = sum2 / DRAWS as f64 - mean * mean;
    let fano = var / mean;

    // Chi-square with bins of expected count >= 5; tails merged.
    let expected = |k: u64| poisson_pmf(k, MU) * DRAWS as f64;
    let mut lo = 0;
    while expected(lo) < 5.0 {
        lo += 1;
    }
    let mut hi = lo;
    while expected(hi + 1) >= 5.0 {
        hi += 1;
    }
    let below: f64 = (0..lo).map(expected).sum();
    let above = DRAWS as f64 - below - (lo..=hi).map(expected).sum::<f64>();
    let observed = |r: &mut dyn Iterator<Item = u64>| r.map(|k| *hist.get(&k).unwrap_or(&0) as f64).sum::<f64>();
    let mut chi2 = 0.0;
    let mut bins = 0;
    let mut add = |o: f64, e: f64| {
        if e > 0.0 {
            chi2 += (o - e).powi(2) / e;
            bins += 1;
        }
    };
    add(observed(&mut (0..lo)), below);
    for k in lo..=hi {
        add(*hist.get(&k).unwrap_or(&0) as f64, expected(k));
    }
    let tail: f64 = hist.range(hi + 1..).map(|(_, &c)| c as f64).sum();
    add(tail, above);
    let p = 1.0 - ChiSquared::new((bins - 1) as f64).expect("dof").cdf(chi2);

    let norm: f64 = (0..200).map(|k| poisson_pmf(k, MU)).sum();
    let j1_err = (0..=5000)
        .map(|i| {
            let x = i as f64 * 0.01;
            (j1(x) - j1_integral(x)).abs()
        })
        .fold(0.0, f64::max);

    let ok = (fano - 1.0).abs() <= FANO_TOL && p > CHI2_P_MIN && (norm - 1.0).abs() <= PMF_NORM_TOL && j1_err <= J1_TOL;
    report.line(
        6,
        ok,
        format!(
            "Fano = {fano:.5} (1 ± {FANO_TOL}); chi-square p = {p:.3} (> {CHI2_P_MIN}); |Σpmf − 1| = {:.1e}; max |J1 − oracle| on [0, 50] = {j1_err:.1e}",
            (norm - 1.0).abs()
        ),
    );
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for e in fs::read_dir(dir).expect("output dir") {
        let e = e.expect("entry");
        let name = e.file_name().to_string_lossy().into_owned();
        let mut bytes = fs::read(e.path()).expect("readable");
        if name == "summary.json" {
            let text = String::from_utf8(bytes).expect("utf8");
            bytes = text
                .lines()
                .filter(|l| !l.contains("\"generated_at\"") && !l.contains("\"elapsed_seconds\""))
                .collect::<Vec<_>>()
                .join("\n")
                .into_bytes();
        }
        files.insert(name, bytes);
    }
    files
}

fn structure(report: &mut Report, out: &RunOutput) {
    let h = &out.histogram;
    let (nx, ny) = h.shape();
    let tallies: Vec<_> = (0..=h.max_count()).map(|n| h.image(SelectionMode::Exact(n), "").tallies).collect();
    let sums = h.count_sums();
    let conventional = out.image(Selection::AllCounts).expect("all-counts image");
    let mut partition = true;
    let mut weighted = true;
    for y in 0..ny {
        for x in 0..nx {
            partition &= tallies.iter().map(|g| *g.get(x, y)).sum::<u64>() == h.frames();
            let w: u64 = tallies.iter().enumerate().map(|(n, g)| n as u64 * *g.get(x, y)).sum();
            weighted &= w == *sums.get(x, y) && w as f64 / h.frames() as f64 == *conventional.get(x, y);
        }
    }

    let tmp = tempfile::tempdir().expect("tempdir");
    let mut s = load("fig2cd");
    s.frames_per_position = 100;
    let cfg = tmp.path().join("scenario.toml");
    fs::write(&cfg, s.to_toml_string().expect("serializable")).expect("write config");
    let mut trees = Vec::new();
    for workers in [1, 8] {
        let dir = tmp.path().join(format!("w{workers}"));
        let status = Command::new(BIN)
            .args(["simulate", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&dir)
            .args(["--workers", &workers.to_string(), "--emit-frames", "true"])
            .output()
            .expect("cli runs")
            .status;
        assert!(status.success(), "simulate failed with {status}");
        trees.push(read_tree(&dir));
    }
    let identical = trees[0] == trees[1] && trees[0].contains_key("frames.bin");
    report.line(
        7,
        partition && weighted && identical,
        format!(
            "Σ_N tallies = frames: {partition}; Σ_N N·tally = conventional: {weighted}; {} artifacts byte-identical across 1 and 8 workers: {identical}",
            trees[0].len()
        ),
    );
}

fn sweep(report: &mut Report) {
    let t = Instant::now();
    let out = Command::new(BIN).args(["sweep", "--n-min", "2", "--n-max", "50"]).output().expect("cli runs");
    let secs = t.elapsed().as_secs_f64();
    let text = String::from_utf8(out.stdout).expect("utf8");
    let mut worst: f64 = 0.0;
    let mut rows = 0;
    for line in text.lines().skip(1) {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().expect("numeric")).collect();
        let (n, ratio) = (cols[0], cols[3]);
        worst = worst.max((ratio * n.sqrt() - 1.0).abs());
        rows += 1;
    }
    let ok = out.status.success() && rows == 49 && worst <= SWEEP_REL_TOL && secs < SWEEP_RUNTIME_S;
    report.line(
        8,
        ok,
        format!("{rows} orders; max |FWHM(N)/FWHM(1)·√N − 1| = {worst:.4} (<= {SWEEP_REL_TOL}); {secs:.3} s (< {SWEEP_RUNTIME_S} s)"),
    );
}

fn main() -> ExitCode {
    let mut report = Report { failed: 0 };
    let point = point_source(&mut report);
    stripes(&mut report);
    oracle_equivalence(&mut report, &point);
    kernels(&mut report);
    structure(&mut report, &point);
    sweep(&mut report);
    if report.failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{} criteria failed", report.failed);
        ExitCode::FAILURE
    }
}
