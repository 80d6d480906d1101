use std::sync::Arc;

use aqw_core::localization::*;
use aqw_core::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn unit_vector(raw: &[(f64, f64)]) -> Vec<Complex64> {
    let v: Vec<Complex64> = raw.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

proptest! {
    #[test]
    fn pr_bounds_and_invariances(
        raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2..60)
            .prop_filter("non-zero", |v| v.iter().any(|&(a, b)| a.abs() + b.abs() > 1e-3)),
        theta in -3.0f64..3.0,
        shift in 0usize..30,
    ) {
        let v = unit_vector(&raw);
        let d = v.len() as f64;
        let pr = participation_ratio(&v).unwrap();
        prop_assert!(pr >= 1.0 - 1e-12 && pr <= d + 1e-9);

        let rotated: Vec<Complex64> = v.iter().map(|z| z * Complex64::from_polar(1.0, theta)).collect();
        prop_assert!((participation_ratio(&rotated).unwrap() - pr).abs() < 1e-9 * pr);

        // relabel sites, keeping each (up, down) pair together
        let pairs = v.len() / 2;
        if pairs > 0 {
            let mut relabelled = v.clone();
            for p in 0..pairs {
                let q = (p + shift) % pairs;
                relabelled[2 * q] = v[2 * p];
                relabelled[2 * q + 1] = v[2 * p + 1];
            }
            prop_assert!((participation_ratio(&relabelled).unwrap() - pr).abs() < 1e-9 * pr);
        }
    }
}

#[test]
fn eigenstates_of_a_small_stadium() {
    let g = Arc::new(GridGeometry::quarter_stadium(12).unwrap());
    let op = build_step_operator(g.clone(), CoinParameters::symmetric()).unwrap();
    let d = diagonalize(&op).unwrap();
    let report = PRReport::from_decomposition(&d).unwrap();
    assert_eq!(report.records.len(), g.dimension());
    for r in &report.records {
        assert!(r.pr >= 1.0 && r.pr <= g.dimension() as f64);
        assert!(r.eigenphase > -std::f64::consts::PI && r.eigenphase <= std::f64::consts::PI);
    }
    let everything = report.select((0.0, f64::INFINITY), (-4.0, 4.0));
    assert_eq!(everything.len(), g.dimension());
    assert!(everything.windows(2).all(|w| w[0].pr <= w[1].pr));
    assert!(report.select((2.0, 1.0), (-4.0, 4.0)).is_empty());

    let j = everything[everything.len() / 2].index;
    let p = eigenstate_probability(g.clone(), &d, j).unwrap();
    let v = d.vector(j);
    for (s, site) in g.sites().iter().enumerate() {
        let direct = v[2 * s].norm_sqr() + v[2 * s + 1].norm_sqr();
        assert!((p.get(site.m, site.n) - direct).abs() < 1e-15);
    }
    assert!((p.total() - 1.0).abs() < 1e-12);
    assert!(eigenstate_probability(g.clone(), &d, d.len()).is_err());

    let h = pr_histogram(&report, 25).unwrap();
    assert!((h.integral() - 1.0).abs() < 1e-12);
}
