//! Randomised consistency checks, reproducible from a seed.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::sync::Arc;

use aqw_core::spectral::{brody_pdf, poisson_pdf, unfold_spacings, wigner_pdf, SpacingLaw};
use aqw_core::{build_step_operator, participation_ratio, CoinParameters, GridGeometry, Result, WalkerState};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_geometry(rng: &mut ChaCha8Rng) -> Result<GridGeometry> {
    if rng.random_bool(0.5) {
        GridGeometry::rectangle(rng.random_range(2..=12), rng.random_range(1..=8))
    } else {
        GridGeometry::quarter_stadium(2 * rng.random_range(1..=8))
    }
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

fn unitarity(rng: &mut ChaCha8Rng, trials: usize) -> Result<Check> {
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let g = Arc::new(random_geometry(rng)?);
        let coins = CoinParameters::with_phase(
            rng.random_range(0.0..=FRAC_PI_2),
            rng.random_range(0.0..=FRAC_PI_2),
            rng.random_range(0.0..TAU),
        )?;
        worst = worst.max(build_step_operator(g, coins)?.unitarity_defect());
    }
    Ok(Check {
        name: "unitarity of random walks",
        passed: worst < 1e-12,
        detail: format!("max defect {worst:.3e}"),
    })
}

fn norm_and_factoring(rng: &mut ChaCha8Rng, trials: usize) -> Result<Check> {
    let (mut drift, mut mismatch) = (0.0f64, 0.0f64);
    for _ in 0..trials {
        let g = Arc::new(random_geometry(rng)?);
        let op = build_step_operator(g.clone(), CoinParameters::asymmetric())?;
        let mut state = WalkerState::from_amplitudes(g.clone(), random_unit(rng, g.dimension()))?;
        for _ in 0..25 {
            let sparse = op.apply(&state)?;
            let factored = op.apply_factored(state.amplitudes())?;
            for (a, b) in sparse.amplitudes().iter().zip(&factored) {
                mismatch = mismatch.max((a - b).norm());
            }
            state = sparse;
        }
        drift = drift.max((state.norm_sqr() - 1.0).abs());
    }
    Ok(Check {
        name: "norm preservation and factored step",
        passed: drift < 1e-12 && mismatch < 1e-13,
        detail: format!("norm drift {drift:.3e}, factored mismatch {mismatch:.3e}"),
    })
}

fn sorted_phases(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut p: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
    p.sort_by(f64::total_cmp);
    p
}

fn unfolding(rng: &mut ChaCha8Rng, trials: usize) -> Result<Check> {
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let n = rng.random_range(2..500);
        let phases = sorted_phases(rng, n);
        let s = unfold_spacings(&phases)?;
        worst = worst.max((s.iter().sum::<f64>() / s.len() as f64 - 1.0).abs());
    }
    Ok(Check {
        name: "unfolded mean spacing",
        passed: worst < 1e-12,
        detail: format!("max |mean - 1| {worst:.3e}"),
    })
}

fn poisson_limit(rng: &mut ChaCha8Rng) -> Result<Check> {
    let phases = sorted_phases(rng, 10_000);
    let mut s = unfold_spacings(&phases)?;
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let ks = s
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = SpacingLaw::Poisson.cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max);
    Ok(Check {
        name: "uniform phases give Poisson spacings",
        passed: ks < 0.02,
        detail: format!("KS distance {ks:.4}"),
    })
}

fn brody_endpoints(rng: &mut ChaCha8Rng, trials: usize) -> Result<Check> {
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let s = rng.random_range(0.0..6.0);
        worst = worst
            .max((brody_pdf(s, 0.0)? - poisson_pdf(s)?).abs())
            .max((brody_pdf(s, 1.0)? - wigner_pdf(s)?).abs());
    }
    Ok(Check {
        name: "Brody endpoints",
        passed: worst < 1e-12,
        detail: format!("max deviation {worst:.3e}"),
    })
}

fn participation(rng: &mut ChaCha8Rng, trials: usize) -> Result<Check> {
    let mut ok = true;
    for _ in 0..trials {
        let n = rng.random_range(1..300);
        let v = random_unit(rng, n);
        let pr = participation_ratio(&v)?;
        let theta = rng.random_range(0.0..TAU);
        let rotated: Vec<Complex64> = v.iter().map(|z| z * Complex64::from_polar(1.0, theta)).collect();
        ok &= (1.0 - 1e-12..=n as f64 + 1e-9).contains(&pr);
        ok &= (participation_ratio(&rotated)? - pr).abs() <= 1e-9 * pr;
    }
    Ok(Check {
        name: "participation ratio bounds and phase invariance",
        passed: ok,
        detail: format!("{trials} vectors"),
    })
}

pub fn run(seed: u64, trials: usize) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(vec![
        unitarity(&mut rng, trials)?,
        norm_and_factoring(&mut rng, trials)?,
        unfolding(&mut rng, trials)?,
        poisson_limit(&mut rng)?,
        brody_endpoints(&mut rng, 10 * trials)?,
        participation(&mut rng, trials)?,
    ])
}
