use std::f64::consts::TAU;

use aqw_core::spectral::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

/// Five-point Gauss–Legendre on a mesh graded geometrically towards zero,
/// so `s^δ` cusps at the origin integrate accurately.
fn integrate(f: impl Fn(f64) -> f64, upper: f64) -> f64 {
    const X: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let mut knots = vec![0.0];
    let mut x = 1e-14;
    while x < 0.05 {
        knots.push(x);
        x *= 1.5;
    }
    let mut x = 0.05;
    while x < upper {
        knots.push(x);
        x += 0.05;
    }
    knots.push(upper);
    knots
        .windows(2)
        .map(|w| {
            let (c, h) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
            h * X.iter().zip(&W).map(|(x, w)| w * f(c + h * x)).sum::<f64>()
        })
        .sum()
}

fn laws() -> Vec<SpacingLaw> {
    let mut v = vec![SpacingLaw::Poisson, SpacingLaw::Wigner];
    for d in [0.0, 0.07, 0.15, 0.5, 0.9, 1.0] {
        v.push(SpacingLaw::brody(d).unwrap());
    }
    v
}

#[test]
fn densities_are_normalised_with_unit_mean() {
    for law in laws() {
        let mass = integrate(|s| law.pdf(s), 60.0);
        let mean = integrate(|s| s * law.pdf(s), 60.0);
        assert!((mass - 1.0).abs() < 1e-8, "{law:?}: mass {mass}");
        assert!((mean - 1.0).abs() < 1e-6, "{law:?}: mean {mean}");
    }
}

#[test]
fn closed_forms() {
    for i in 0..400 {
        let s = i as f64 * 0.01;
        let w = std::f64::consts::FRAC_PI_2 * s * (-std::f64::consts::PI * s * s / 4.0).exp();
        assert!((brody_pdf(s, 1.0).unwrap() - w).abs() < 1e-12);
        assert!((brody_pdf(s, 0.0).unwrap() - (-s).exp()).abs() < 1e-12);
    }
}

#[test]
fn wigner_mode() {
    let (mut best, mut arg) = (0.0, 0.0);
    for i in 0..=200_000 {
        let s = i as f64 * 1e-5;
        let p = wigner_pdf(s).unwrap();
        if p > best {
            best = p;
            arg = s;
        }
    }
    assert!((arg - (2.0 / std::f64::consts::PI).sqrt()).abs() < 2e-5);
}

fn brody_sample(delta: f64, n: usize, seed: u64) -> Vec<f64> {
    let (_, b) = brody_constants(delta).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            (-(1.0 - u).ln() / b).powf(1.0 / (delta + 1.0))
        })
        .collect()
}

#[test]
fn brody_fit_recovers_sampled_delta() {
    let s = brody_sample(0.5, 100_000, 7);
    let h = spacing_histogram(&s, DEFAULT_BIN_COUNT, DEFAULT_S_MAX).unwrap();
    let fit = fit_brody(&h).unwrap();
    assert!((fit.delta - 0.5).abs() <= 0.05, "delta {}", fit.delta);
    assert!(fit.rms_brody <= fit.rms_wigner && fit.rms_brody <= fit.rms_poisson);
}

#[test]
fn poisson_histogram_against_wigner() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let s: Vec<f64> = (0..100_000).map(|_| Exp1.sample(&mut rng)).collect();
    let h = spacing_histogram(&s, 20, 4.0).unwrap();
    assert!(h.first_bin_dominates());
    let rms = rms_error(&h, |x| SpacingLaw::Wigner.pdf(x));
    assert!((0.15..=0.35).contains(&rms), "rms {rms}");
    // regression value for this seed
    assert!((rms - 0.233416).abs() < 1e-6, "rms {rms}");
    assert!(rms_error(&h, |x| SpacingLaw::Poisson.pdf(x)) < 0.05);
}

#[test]
fn uniform_phases_unfold_to_poisson() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut phases: Vec<f64> = (0..10_000).map(|_| rng.random_range(0.0..TAU)).collect();
    phases.sort_by(f64::total_cmp);
    let mut s = unfold_spacings(&phases).unwrap();
    let mean = s.iter().sum::<f64>() / s.len() as f64;
    assert!((mean - 1.0).abs() < 1e-10);
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let ks = s
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = SpacingLaw::Poisson.cdf(x);
            (cdf - i as f64 / n).abs().max((cdf - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks < 0.02, "KS distance {ks}");
}

/// Independent minimiser used to cross-check the dense scan.
fn golden_section(f: impl Fn(f64) -> f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    while b - a > 1e-6 {
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    0.5 * (a + b)
}

#[test]
fn scan_agrees_with_golden_section() {
    for (k, delta) in [0.1, 0.3, 0.5, 0.8].into_iter().enumerate() {
        let s = brody_sample(delta, 20_000, 100 + k as u64);
        let h = spacing_histogram(&s, DEFAULT_BIN_COUNT, DEFAULT_S_MAX).unwrap();
        let fit = fit_brody(&h).unwrap();
        let gs = golden_section(|d| {
            let law = SpacingLaw::brody(d).unwrap();
            rms_error(&h, |x| law.pdf(x))
        });
        assert!((fit.delta - gs).abs() < 0.01, "scan {} vs golden {gs}", fit.delta);
    }
}

#[test]
fn fit_rejects_single_bin() {
    let h = spacing_histogram(&[1.0, 1.01, 1.02], 10, 4.0).unwrap();
    assert!(fit_brody(&h).is_err());
}

proptest! {
    #[test]
    fn unfolded_mean_is_one(mut phases in prop::collection::vec(0.0..TAU, 2..400)) {
        phases.sort_by(f64::total_cmp);
        let s = unfold_spacings(&phases).unwrap();
        prop_assert_eq!(s.len(), phases.len());
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        prop_assert!((mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn brody_endpoints_pointwise(s in 0.0f64..10.0) {
        prop_assert!((brody_pdf(s, 0.0).unwrap() - poisson_pdf(s).unwrap()).abs() < 1e-12);
        prop_assert!((brody_pdf(s, 1.0).unwrap() - wigner_pdf(s).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn histogram_integrates_to_one(
        s in prop::collection::vec(0.0f64..10.0, 1..300),
        bins in 5usize..60,
        s_max in 0.5f64..6.0,
    ) {
        let h = spacing_histogram(&s, bins, s_max).unwrap();
        prop_assert!((h.integral() - 1.0).abs() < 1e-12);
        prop_assert!(h.density.iter().all(|&d| d >= 0.0));
    }
}
