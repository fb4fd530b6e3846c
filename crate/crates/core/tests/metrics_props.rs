mod common;

use common::calibrated;
use proptest::prelude::*;
use subrayleigh_core::analytic::{analytic_pn_map, QuadratureSpec};
use subrayleigh_core::grid::Grid;
use subrayleigh_core::metrics::*;
use subrayleigh_core::optics::{airy_half_width, J1_FIRST_ZERO};
use subrayleigh_core::scene::Axis;

fn gaussian(n: usize, sigma: f64, centre: f64) -> Profile {
    let pos: Vec<f64> = (0..n).map(|i| i as f64 - (n / 2) as f64).collect();
    let vals = pos.iter().map(|x| (-(x - centre).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
    Profile::new(pos, vals, Axis::X, 0).unwrap()
}

fn scaled(p: &Profile, c: f64) -> Profile {
    Profile::new(p.positions.clone(), p.values.iter().map(|v| v * c).collect(), p.axis, p.offset).unwrap()
}

proptest! {
    #[test]
    fn fwhm_ignores_power_of_two_scale(sigma in 2.0f64..12.0, centre in -5.0f64..5.0, k in -20i32..20) {
        let p = gaussian(101, sigma, centre);
        let a = fwhm(&p).unwrap();
        let b = fwhm(&scaled(&p, 2f64.powi(k))).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn fwhm_ignores_scale(sigma in 2.0f64..12.0, centre in -5.0f64..5.0, c in 1e-6f64..1e6) {
        let p = gaussian(101, sigma, centre);
        let a = fwhm(&p).unwrap().width;
        let b = fwhm(&scaled(&p, c)).unwrap().width;
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn constant_image_gives_constant_profile(v in 0.0f64..1e3, nx in 2usize..20, ny in 1usize..20, w in 1usize..4) {
        prop_assume!(w <= ny);
        let g = Grid::from_fn(nx, ny, |_, _| v);
        let p = cross_section(&g, 1e-4, Axis::X, ny / 2, w);
        if let Ok(p) = p {
            prop_assert!(p.values.iter().all(|&a| (a - v).abs() <= 1e-12 * v.max(1.0)));
        }
    }
}

#[test]
fn gaussian_fwhm_matches_closed_form() {
    let sigma = 6.0;
    let f = fwhm(&gaussian(201, sigma, 0.3)).unwrap();
    let exact = 2.0 * (2.0 * 2f64.ln()).sqrt() * sigma;
    assert!((f.width - exact).abs() < 0.02 * exact);
}

#[test]
fn airy_power_sampled_widths() {
    for n in [1, 9, 15, 23] {
        let p = airy_power_profile(n, 20).unwrap();
        let w = fwhm(&p).unwrap().width;
        let exact = 2.0 * airy_half_width(n).unwrap();
        assert!((w / exact - 1.0).abs() < 0.01, "n={n}: {w} vs {exact}");
    }
}

#[test]
fn airy_fwhm_relative_to_first_zero() {
    let ratio = 2.0 * airy_half_width(1).unwrap() / J1_FIRST_ZERO;
    assert!((ratio - 0.8437).abs() < 1e-3, "{ratio}");
    // mpmath root of (2 J1(u)/u)^2 = 1/2
    assert!((airy_half_width(1).unwrap() - 1.616_339_948_310_703).abs() < 1e-9);
}

#[test]
fn sweep_follows_inverse_sqrt_n() {
    let rows = fwhm_sweep(2, 50).unwrap();
    assert_eq!(rows.len(), 49);
    for r in &rows {
        assert!((r.fwhm_sampled / r.fwhm_root - 1.0).abs() < 0.01);
        assert!(r.rel_error.abs() < 0.05, "n={}: {}", r.n, r.rel_error);
    }
    let r23 = rows.iter().find(|r| r.n == 23).unwrap();
    assert!((r23.ratio * 23f64.sqrt() - 1.0).abs() < 0.10);
    assert!(fwhm_sweep(0, 3).is_err());
    assert!(fwhm_sweep(5, 3).is_err());
}

#[test]
fn donut_changes_sign_between_orders() {
    let (s, scene) = calibrated("fig3a");
    let quad = QuadratureSpec::default();
    let score = |n| {
        let img = analytic_pn_map(&s.optical, &s.detector, &scene, &s.scan, n, &quad).unwrap();
        donut_score(&cross_section(&img, s.detector.pitch, Axis::X, 16, 1).unwrap()).unwrap()
    };
    assert!(score(9) > 0.0);
    assert!(score(23) <= 0.0);
}

#[test]
fn contrast_of_sampled_square_wave() {
    let pos: Vec<f64> = (0..64).map(|i| i as f64 * 1e-4).collect();
    let vals = pos.iter().map(|x| if (x / 4e-4).floor() as i64 % 2 == 0 { 3.0 } else { 1.0 }).collect();
    let p = Profile::new(pos, vals, Axis::X, 0).unwrap();
    assert!((stripe_contrast(&p, 8e-4).unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn profile_csv_layout() {
    let p = Profile::new(vec![-1e-4, 0.0], vec![2.0, 3.5], Axis::Y, 4).unwrap();
    assert_eq!(p.to_csv(), "position_m,value\n-0.0001,2\n0,3.5\n");
    assert!(Profile::new(vec![0.0, 0.0], vec![1.0, 1.0], Axis::X, 0).is_err());
}
