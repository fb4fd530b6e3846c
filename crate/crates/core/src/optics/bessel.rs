//! Bessel function of the first kind, order one.
//!
//! Three regimes, each accurate to a few ulp of absolute error:
//! ascending power series for |x| < 8, Miller backward recurrence with the
//! `J0 + 2 Σ J2k = 1` normalization for 8 ≤ |x| < 25, and the Hankel
//! asymptotic expansion beyond. The asymptotic series alone only reaches
//! ~1e-7 at x = 8 (its smallest term is about e^(-2x)), hence the middle band.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

/// First positive zero of J1.
pub const J1_FIRST_ZERO: f64 = 3.831_705_970_207_512;

const SERIES_LIMIT: f64 = 8.0;
const ASYMPTOTIC_LIMIT: f64 = 25.0;

pub fn bessel_j1(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain("bessel_j1", format!("non-finite argument {x}")));
    }
    Ok(j1(x))
}

/// Unchecked J1 for hot loops; NaN in, NaN out.
#[inline]
pub fn j1(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax < SERIES_LIMIT {
        series(ax)
    } else if ax < ASYMPTOTIC_LIMIT {
        backward_recurrence(ax)
    } else {
        asymptotic(ax)
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

fn series(x: f64) -> f64 {
    let h = 0.5 * x;
    let q = -h * h;
    let mut term = h;
    let mut sum = h;
    let mut k = 1.0;
    while term.abs() > 1e-18 * sum.abs().max(1e-300) {
        term *= q / (k * (k + 1.0));
        sum += term;
        k += 1.0;
        if k > 60.0 {
            break;
        }
    }
    sum
}

fn backward_recurrence(x: f64) -> f64 {
    // Start well above x so J_m(x) is negligible relative to J_0..J_2.
    let mut m = (x as usize) + 40;
    if m % 2 == 1 {
        m += 1;
    }
    let two_over_x = 2.0 / x;
    let mut j_next = 0.0_f64; // J_{k+1}
    let mut j_k = 1e-30_f64; // J_k, arbitrary scale
    let mut even_sum = 0.0;
    let mut j_one = 0.0;
    for k in (1..=m).rev() {
        let j_prev = k as f64 * two_over_x * j_k - j_next;
        j_next = j_k;
        j_k = j_prev;
        let order = k - 1;
        if order == 1 {
            j_one = j_k;
        }
        if order > 0 && order % 2 == 0 {
            even_sum += j_k;
        }
        if j_k.abs() > 1e250 {
            j_k *= 1e-250;
            j_next *= 1e-250;
            even_sum *= 1e-250;
            j_one *= 1e-250;
        }
    }
    j_one / (j_k + 2.0 * even_sum)
}

fn asymptotic(x: f64) -> f64 {
    const MU: f64 = 4.0;
    let eight_x = 8.0 * x;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0_f64;
    for k in 1..40 {
        let odd = (2 * k - 1) as f64;
        let next = term * (MU - odd * odd) / (k as f64 * eight_x);
        if next.abs() > term.abs() {
            break;
        }
        term = next;
        // terms alternate between Q (odd k) and P (even k) with sign (-1)^floor(k/2)
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 1 {
            q += sign * term;
        } else {
            p += sign * term;
        }
        if term.abs() < 1e-18 {
            break;
        }
    }
    let (s, c) = x.sin_cos();
    // cos(x - 3π/4) and sin(x - 3π/4) without forming the shifted argument
    let cos_chi = (s - c) * FRAC_1_SQRT_2;
    let sin_chi = -(s + c) * FRAC_1_SQRT_2;
    (2.0 / (PI * x)).sqrt() * (p * cos_chi - q * sin_chi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_and_small_argument() {
        assert_eq!(bessel_j1(0.0).unwrap(), 0.0);
        for x in [1e-3, 1e-6, 1e-9] {
            assert!((j1(x) / x - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn first_zero() {
        assert!(j1(3.831_705_970_2).abs() < 1e-9);
        assert!(j1(J1_FIRST_ZERO).abs() < 1e-15);
    }

    #[test]
    fn odd_symmetry() {
        for x in [0.3, 5.0, 9.7, 17.0, 33.3] {
            assert_eq!(j1(-x), -j1(x));
        }
    }

    #[test]
    fn non_finite_is_domain_error() {
        assert!(bessel_j1(f64::NAN).is_err());
        assert!(bessel_j1(f64::INFINITY).is_err());
    }

    #[test]
    fn regimes_agree_at_boundaries() {
        assert!((series(SERIES_LIMIT) - backward_recurrence(SERIES_LIMIT)).abs() < 1e-14);
        assert!((backward_recurrence(ASYMPTOTIC_LIMIT) - asymptotic(ASYMPTOTIC_LIMIT)).abs() < 1e-14);
        // Cross-check the three routes against each other in overlap zones.
        for x in [7.0, 7.9] {
            assert!((series(x) - backward_recurrence(x)).abs() < 1e-14);
        }
        for x in [24.0, 30.0, 45.0] {
            assert!((backward_recurrence(x) - asymptotic(x)).abs() < 1e-14);
        }
    }
}
