use std::f64::consts::PI;

use subrayleigh_core::optics::{bessel_j1, J1_FIRST_ZERO};

/// Bessel's integral `(1/2π) ∫₀^{2π} cos(τ − x sin τ) dτ` by the trapezoid
/// rule, which converges geometrically for this periodic analytic integrand.
fn j1_integral(x: f64) -> f64 {
    const M: usize = 256;
    let h = 2.0 * PI / M as f64;
    (0..M)
        .map(|k| {
            let t = k as f64 * h;
            (t - x * t.sin()).cos()
        })
        .sum::<f64>()
        / M as f64
}

#[test]
fn matches_integral_oracle_on_dense_grid() {
    let mut worst: f64 = 0.0;
    for i in 0..=10_000 {
        let x = 50.0 * i as f64 / 10_000.0;
        let err = (bessel_j1(x).unwrap() - j1_integral(x)).abs();
        worst = worst.max(err);
    }
    assert!(worst < 1e-12, "max abs error {worst:e}");
}

#[test]
fn matches_high_precision_values() {
    // 30-digit reference values
    let table = [
        (0.5, 0.242_268_457_674_873_886_38),
        (2.5, 0.497_094_102_464_274_038_01),
        (7.99, 0.233_200_714_253_501_743_04),
        (8.01, 0.236_047_103_630_834_027_96),
        (13.7, 0.079_142_765_100_114_653_385),
        (24.99, -0.126_356_985_007_805_039_15),
        (25.01, -0.124_331_404_403_968_250_69),
        (37.2, -0.125_132_208_676_468_839_75),
        (50.0, -0.097_511_828_125_175_137_661),
    ];
    for (x, want) in table {
        let got = bessel_j1(x).unwrap();
        assert!((got - want).abs() < 1e-14, "x={x}: {got} vs {want}");
    }
    assert!(bessel_j1(J1_FIRST_ZERO).unwrap().abs() < 1e-15);
}

#[test]
fn odd_and_bounded() {
    for i in 0..2000 {
        let x = i as f64 * 0.173;
        let v = bessel_j1(x).unwrap();
        assert_eq!(bessel_j1(-x).unwrap(), -v);
        assert!(v.abs() <= 0.582);
    }
}
