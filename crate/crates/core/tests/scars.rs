use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use aqw_core::scars::*;
use aqw_core::*;
use proptest::prelude::*;

fn stadium() -> Arc<GridGeometry> {
    Arc::new(GridGeometry::quarter_stadium(50).unwrap())
}

fn tube_distance(orbit: &PeriodicOrbit, p: [f64; 2]) -> f64 {
    orbit
        .segments()
        .iter()
        .map(|s| s.project(p).1)
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn bouncing_ball_mass_within_three_sigma() {
    let g = stadium();
    let bb = default_orbit_library(&g).remove(0);
    for n in [3, 6, 10] {
        let k = level_wavenumber(&bb, n);
        let sigma = default_sigma(k).max(1.0);
        let scar = build_scar_function(g.clone(), &bb, k, sigma).unwrap();
        let inside: f64 = g
            .sites()
            .iter()
            .zip(scar.probability.values())
            .filter(|(s, _)| (s.m as f64 - 12.5).abs() <= 3.0 * sigma)
            .map(|(_, p)| p)
            .sum();
        assert!(inside > 0.95, "n = {n}: {inside}");
    }
}

#[test]
fn library_tubes_hold_their_mass() {
    let g = stadium();
    // wavenumbers of the reference eigenstates, per grid cell
    let targets = [0.660108, 1.17116, 1.19172, 1.112464];
    for (orbit, k_target) in default_orbit_library(&g).iter().zip(targets) {
        let q = scars::quantize_with_phase(orbit, k_target).unwrap();
        let sigma = default_sigma(q.k).max(1.0);
        let scar = build_scar_function(g.clone(), orbit, q.k, sigma).unwrap();
        let outside: f64 = g
            .sites()
            .iter()
            .zip(scar.probability.values())
            .filter(|(s, _)| tube_distance(orbit, [s.m as f64, s.n as f64]) > 4.0 * sigma)
            .map(|(_, p)| p)
            .sum();
        assert!(outside < 0.05, "{}: {outside}", orbit.name());
    }
}

fn antinodes_along_bouncing_ball(n: u32) -> (usize, f64) {
    let g = stadium();
    let bb = default_orbit_library(&g).remove(0);
    let k = level_wavenumber(&bb, n);
    let scar = build_scar_function(g.clone(), &bb, k, default_sigma(k).max(1.0)).unwrap();
    let column: Vec<f64> = (0..=g.n_top()).map(|y| scar.probability.get(12, y)).collect();
    let last = column.len() - 1;
    let peaks = (0..=last)
        .filter(|&i| {
            let left = if i == 0 { f64::NEG_INFINITY } else { column[i - 1] };
            let right = if i == last { f64::NEG_INFINITY } else { column[i + 1] };
            column[i] > left && column[i] > right
        })
        .count();
    (peaks, k * 25.0 / PI)
}

#[test]
fn antinode_count_follows_wavenumber() {
    for n in 2..=9 {
        let (peaks, expected) = antinodes_along_bouncing_ball(n);
        assert!((peaks as f64 - expected).abs() <= 1.0, "n = {n}: {peaks} vs {expected}");
    }
}

#[test]
fn excitation_sequence_is_increasing() {
    let counts: Vec<usize> = (1..=10).map(|n| antinodes_along_bouncing_ball(n).0).collect();
    assert!(counts.windows(2).all(|w| w[1] > w[0]), "{counts:?}");
}

#[test]
fn phase_winds_once_per_level() {
    let g = stadium();
    for orbit in default_orbit_library(&g) {
        for n in [0u32, 1, 7, 19] {
            let k = level_wavenumber(&orbit, n);
            let segs = orbit.segments();
            let mut wound = 0.0;
            for (j, s) in segs.iter().enumerate() {
                wound += k * s.length;
                let next_bounce = segs.get(j + 1).map_or(orbit.bounce_phase(), |t| t.bounce_phase);
                wound -= next_bounce - s.bounce_phase;
            }
            assert!((wound - TAU * n as f64).abs() < 1e-9, "{} n={n}", orbit.name());
            assert_eq!(build_scar_function(g.clone(), &orbit, k, 1.5).unwrap().n_bs, n as i64);
        }
    }
}

#[test]
fn whispering_gallery_chord_hugs_the_arc() {
    let g = stadium();
    let lib = default_orbit_library(&g);
    let wg = lib.iter().find(|o| o.name() == WHISPERING_GALLERY).unwrap();
    let v = wg.vertices();
    let t = wg.bounce_types();
    let r = g.n_top() as f64;
    let mut arc_angle = 0.0;
    let mut chord = 0.0;
    for i in 0..v.len() - 1 {
        if t[i] == BounceType::Arc && t[i + 1] == BounceType::Arc {
            chord += (v[i + 1][0] - v[i][0]).hypot(v[i + 1][1] - v[i][1]);
            let a = |p: [f64; 2]| p[1].atan2(p[0] - g.arc_start() as f64);
            arc_angle += a(v[i + 1]) - a(v[i]);
        }
    }
    let arc = r * arc_angle;
    assert!(arc > 0.0);
    assert!((chord - arc).abs() / arc < 0.05, "chord {chord} vs arc {arc}");
}

#[test]
fn bouncing_ball_length() {
    let bb = default_orbit_library(&stadium()).remove(0);
    assert_eq!(bb.vertices()[0][0], 12.5);
    assert!((bb.length() - 50.0).abs() < 1e-12);
    let q = quantize_wavenumber(bb.length(), 16.5027 / 25.0).unwrap();
    assert!((q.k - 16.5027 / 25.0).abs() <= PI / bb.length());
}

proptest! {
    #[test]
    fn quantisation_rounding_bound(l in 0.5f64..500.0, k in 0.05f64..5.0) {
        if let Ok(q) = quantize_wavenumber(l, k) {
            prop_assert!((q.k - k).abs() <= PI / l + 1e-12);
            prop_assert!((q.k * l - TAU * q.n as f64).abs() < 1e-9);
        } else {
            prop_assert!(k * l / TAU < 0.5);
        }
    }

    #[test]
    fn overlap_is_a_bounded_symmetric_similarity(
        a in prop::collection::vec(0.0f64..1.0, 40),
        b in prop::collection::vec(0.0f64..1.0, 40),
    ) {
        let g = Arc::new(GridGeometry::rectangle(7, 4).unwrap());
        prop_assume!(a.iter().sum::<f64>() > 0.1 && b.iter().sum::<f64>() > 0.1);
        let p = ProbabilityGrid::from_weights(g.clone(), a).unwrap();
        let q = ProbabilityGrid::from_weights(g, b).unwrap();
        let pq = overlap(&p, &q).unwrap();
        prop_assert!((0.0..=1.0).contains(&pq));
        prop_assert_eq!(pq, overlap(&q, &p).unwrap());
        prop_assert!((overlap(&p, &p).unwrap() - 1.0).abs() < 1e-12);
        if p.l1_distance(&q) > 1e-3 {
            prop_assert!(pq < 1.0 - 1e-12);
        }
    }
}

#[test]
fn disjoint_supports_do_not_overlap() {
    let g = Arc::new(GridGeometry::rectangle(3, 1).unwrap());
    let p = ProbabilityGrid::from_weights(g.clone(), vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
    let q = ProbabilityGrid::from_weights(g, vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0, 1.0]).unwrap();
    assert_eq!(overlap(&p, &q).unwrap(), 0.0);
}

#[test]
fn ranking_is_a_permutation_of_the_window() {
    let g = Arc::new(GridGeometry::quarter_stadium(16).unwrap());
    let op = build_step_operator(g.clone(), CoinParameters::symmetric()).unwrap();
    let d = diagonalize(&op).unwrap();
    let report = PRReport::from_decomposition(&d).unwrap();
    let bb = default_orbit_library(&g).remove(0);
    let scar = build_scar_function(g, &bb, level_wavenumber(&bb, 2), 1.2).unwrap();

    let window = (20.0, 60.0);
    let ranked = scars::rank_candidates(&d, &report, &scar, window).unwrap();
    let mut got: Vec<usize> = ranked.iter().map(|c| c.index).collect();
    got.sort();
    let want: Vec<usize> = report
        .records
        .iter()
        .filter(|r| r.pr >= window.0 && r.pr <= window.1)
        .map(|r| r.index)
        .collect();
    assert_eq!(got, want);
    assert!(ranked.windows(2).all(|w| w[0].overlap >= w[1].overlap));
    assert!(scars::rank_candidates(&d, &report, &scar, (1e9, 2e9)).unwrap().is_empty());
}
