use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use subrayleigh_core::analytic::poisson_pmf;
use subrayleigh_core::detector::PoissonSampler;

/// pmf by explicit log-factorial summation.
fn pmf_oracle(n: u64, mu: f64) -> f64 {
    let log_fact: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
    (n as f64 * mu.ln() - mu - log_fact).exp()
}

#[test]
fn pmf_reference_values() {
    assert_eq!(poisson_pmf(0, 0.0), 1.0);
    let p = poisson_pmf(23, 14.0);
    assert!((p - 7.384_611_384_831_14e-3).abs() < 1e-14, "{p}");
    for n in [0, 1, 5, 23, 100, 255, 1000] {
        for mu in [0.1, 1.0, 14.0, 99.5, 700.0] {
            let want = pmf_oracle(n, mu);
            let got = poisson_pmf(n, mu);
            if want > 1e-300 {
                assert!((got / want - 1.0).abs() < 1e-10, "n={n} mu={mu}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn pmf_normalization() {
    let s: f64 = (0..=200).map(|n| poisson_pmf(n, 14.0)).sum();
    assert!((s - 1.0).abs() < 1e-12, "{s}");
}

proptest! {
    #[test]
    fn pmf_increases_with_mean_below_n(n in 1u64..200, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-6);
        let (m1, m2) = (lo * n as f64, hi * n as f64);
        prop_assume!(m1 > 0.0);
        prop_assert!(poisson_pmf(n, m1) < poisson_pmf(n, m2));
    }

    #[test]
    fn pmf_in_unit_interval(n in 0u64..1000, mu in 0.0f64..2000.0) {
        let p = poisson_pmf(n, mu);
        prop_assert!((0.0..=1.0).contains(&p));
    }
}

fn moments(mu: f64, draws: usize, seed: u64) -> (f64, f64, Vec<u64>) {
    let s = PoissonSampler::new(mu).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hist = vec![0u64; 1024];
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..draws {
        let k = s.sample(&mut rng);
        sum += k as f64;
        sum2 += (k * k) as f64;
        hist[(k as usize).min(1023)] += 1;
    }
    let mean = sum / draws as f64;
    (mean, sum2 / draws as f64 - mean * mean, hist)
}

/// Pearson statistic with bins merged until each expects at least 5; the
/// last bin absorbs the whole upper tail.
fn chi_square_p(hist: &[u64], mu: f64, draws: usize) -> f64 {
    let n = draws as f64;
    let mut stat = 0.0;
    let mut bins = 0;
    let (mut obs, mut exp) = (0.0, 0.0);
    let mut above = 1.0;
    for (k, &h) in hist.iter().enumerate() {
        let p = poisson_pmf(k as u64, mu);
        above -= p;
        obs += h as f64;
        exp += p * n;
        if exp >= 5.0 && above * n >= 5.0 {
            stat += (obs - exp).powi(2) / exp;
            bins += 1;
            obs = 0.0;
            exp = 0.0;
        }
    }
    exp += above.max(0.0) * n;
    stat += (obs - exp).powi(2) / exp;
    bins += 1;
    1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(stat)
}

#[test]
fn sampler_fano_and_goodness_of_fit_mu_14() {
    let draws = 1_000_000;
    let (mean, var, hist) = moments(14.0, draws, 11);
    let fano = var / mean;
    assert!((fano - 1.0).abs() < 0.005, "Fano factor {fano}");
    assert!((mean - 14.0).abs() < 4.0 * (14.0 / draws as f64).sqrt());
    let p = chi_square_p(&hist, 14.0, draws);
    assert!(p > 0.001, "chi-square p = {p}");
}

#[test]
fn sampler_large_mean_branch() {
    let draws = 400_000;
    for mu in [30.0, 57.3, 180.0] {
        let (mean, var, hist) = moments(mu, draws, 5);
        assert!((var / mean - 1.0).abs() < 0.02, "mu={mu} Fano {}", var / mean);
        let p = chi_square_p(&hist, mu, draws);
        assert!(p > 0.001, "mu={mu} chi-square p = {p}");
    }
}

#[test]
fn sampler_small_means() {
    for mu in [0.0, 1e-3, 0.1, 2.5] {
        let (mean, _, hist) = moments(mu, 200_000, 3);
        assert!((mean - mu).abs() <= 5.0 * (mu / 200_000.0).sqrt() + 1e-12, "mu={mu} mean={mean}");
        if mu > 0.05 {
            assert!(chi_square_p(&hist, mu, 200_000) > 0.001);
        }
    }
}
