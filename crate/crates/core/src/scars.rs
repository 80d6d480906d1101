//! Periodic orbits of the quarter stadium and Gaussian-tube scar functions
//! built along them.
//!
//! A scar function is a plane wave running along the orbit, dressed with a
//! Gaussian of fixed width in the transverse direction. Its wavenumber is
//! chosen so the phase closes around the orbit; its probability is compared
//! with eigenstate probabilities through the Bhattacharyya coefficient.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::{BilliardKind, GridGeometry};
use crate::dynamics::ProbabilityGrid;
use crate::error::{Error, Result};
use crate::localization::PRReport;
use crate::spectral::SpectralDecomposition;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BounceType {
    StraightWall,
    Arc,
    SymmetryAxis,
}

impl BounceType {
    /// Phase lost at the bounce: a sign flip at hard walls, nothing on a
    /// symmetry line.
    pub fn phase(self) -> f64 {
        match self {
            BounceType::StraightWall | BounceType::Arc => PI,
            BounceType::SymmetryAxis => 0.0,
        }
    }
}

/// How the vertex list closes into a loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Closure {
    /// Last vertex connects back to the first.
    Closed,
    /// The path is run forwards then backwards (orbits that hit a wall or
    /// symmetry line head-on at both ends).
    Retracing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OrbitSpec", into = "OrbitSpec")]
pub struct PeriodicOrbit {
    name: String,
    vertices: Vec<[f64; 2]>,
    bounce_types: Vec<BounceType>,
    closure: Closure,
    length: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct OrbitSpec {
    name: String,
    closure: Closure,
    vertices: Vec<[f64; 2]>,
    bounce_types: Vec<BounceType>,
}

impl TryFrom<OrbitSpec> for PeriodicOrbit {
    type Error = Error;
    fn try_from(s: OrbitSpec) -> Result<Self> {
        PeriodicOrbit::new(s.name, s.vertices, s.bounce_types, s.closure)
    }
}

impl From<PeriodicOrbit> for OrbitSpec {
    fn from(o: PeriodicOrbit) -> Self {
        OrbitSpec {
            name: o.name,
            closure: o.closure,
            vertices: o.vertices,
            bounce_types: o.bounce_types,
        }
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (b[0] - a[0]).hypot(b[1] - a[1])
}

impl PeriodicOrbit {
    pub fn new(
        name: impl Into<String>,
        vertices: Vec<[f64; 2]>,
        bounce_types: Vec<BounceType>,
        closure: Closure,
    ) -> Result<Self> {
        let name = name.into();
        if vertices.len() < 2 {
            return Err(Error::config(format!("orbit {name}: needs at least two vertices")));
        }
        if bounce_types.len() != vertices.len() {
            return Err(Error::config(format!(
                "orbit {name}: {} vertices but {} bounce types",
                vertices.len(),
                bounce_types.len()
            )));
        }
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::config(format!("orbit {name}: non-finite vertex")));
        }
        if vertices.windows(2).any(|w| dist(w[0], w[1]) < 1e-9)
            || (closure == Closure::Closed && dist(vertices[0], vertices[vertices.len() - 1]) < 1e-9)
        {
            return Err(Error::config(format!("orbit {name}: consecutive vertices coincide")));
        }
        let mut orbit = PeriodicOrbit {
            name,
            vertices,
            bounce_types,
            closure,
            length: 0.0,
        };
        orbit.length = orbit.segments().iter().map(|s| s.length).sum();
        Ok(orbit)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn bounce_types(&self) -> &[BounceType] {
        &self.bounce_types
    }

    pub fn closure(&self) -> Closure {
        self.closure
    }

    /// Length of one full circuit.
    pub fn length(&self) -> f64 {
        self.length
    }

    /// The circuit as a vertex loop, first vertex repeated at the end, with
    /// the bounce type at each loop vertex.
    fn circuit(&self) -> Vec<([f64; 2], BounceType)> {
        let fwd = self.vertices.iter().copied().zip(self.bounce_types.iter().copied());
        match self.closure {
            Closure::Closed => fwd.clone().chain(fwd.take(1)).collect(),
            Closure::Retracing => {
                let mut path: Vec<_> = fwd.collect();
                let back: Vec<_> = path.iter().rev().skip(1).copied().collect();
                path.extend(back);
                path
            }
        }
    }

    /// Segments of one circuit, with the accumulated arclength and bounce
    /// phase at each segment start.
    pub fn segments(&self) -> Vec<Segment> {
        let loop_ = self.circuit();
        let mut out = Vec::with_capacity(loop_.len() - 1);
        let mut xi = 0.0;
        let mut phase = 0.0;
        for w in loop_.windows(2) {
            let (a, b) = (w[0].0, w[1].0);
            let length = dist(a, b);
            out.push(Segment {
                start: a,
                end: b,
                length,
                arclength: xi,
                bounce_phase: phase,
            });
            xi += length;
            phase += w[1].1.phase();
        }
        out
    }

    /// Total phase lost to bounces over one circuit.
    pub fn bounce_phase(&self) -> f64 {
        self.circuit()[1..].iter().map(|(_, t)| t.phase()).sum()
    }

    /// Plane-wave phase gained over one circuit at wavenumber `k`.
    pub fn circuit_phase(&self, k: f64) -> f64 {
        k * self.length - self.bounce_phase()
    }

    /// Every vertex inside `geometry` (with a small slack for points on the
    /// curved wall).
    pub fn fits(&self, geometry: &GridGeometry) -> bool {
        self.vertices
            .iter()
            .all(|v| geometry.contains_point(v[0], v[1], 1e-9))
    }

    /// The same orbit in another geometry, if it is still a periodic orbit
    /// there: no arc bounces, every vertex inside, straight-wall bounces on
    /// the outer walls.
    pub fn transplant(&self, target: &GridGeometry) -> Option<PeriodicOrbit> {
        if !self.fits(target) {
            return None;
        }
        let on_wall = |v: [f64; 2]| {
            (v[0] - target.m_right() as f64).abs() < 1e-9 || (v[1] - target.n_top() as f64).abs() < 1e-9
        };
        let ok = self.vertices.iter().zip(&self.bounce_types).all(|(&v, t)| match t {
            BounceType::Arc => false,
            BounceType::StraightWall => on_wall(v),
            BounceType::SymmetryAxis => v[0].abs() < 1e-9 || v[1].abs() < 1e-9,
        });
        ok.then(|| self.clone())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub length: f64,
    /// Arclength from the circuit start to `start`.
    pub arclength: f64,
    /// Bounce phase accumulated before this segment.
    pub bounce_phase: f64,
}

impl Segment {
    /// Clamped projection of `p` onto the segment and its distance to it.
    pub fn project(&self, p: [f64; 2]) -> (f64, f64) {
        let t = [
            (self.end[0] - self.start[0]) / self.length,
            (self.end[1] - self.start[1]) / self.length,
        ];
        let rel = [p[0] - self.start[0], p[1] - self.start[1]];
        let s = (rel[0] * t[0] + rel[1] * t[1]).clamp(0.0, self.length);
        let foot = [self.start[0] + s * t[0], self.start[1] + s * t[1]];
        (s, dist(p, foot))
    }
}

pub const BOUNCING_BALL: &str = "bouncing_ball";
pub const RECTANGULAR: &str = "rectangular";
pub const WHISPERING_GALLERY: &str = "whispering_gallery";
pub const BOW_TIE: &str = "bow_tie";

/// The four reference orbits of the quarter stadium, scaled to `geometry`
/// (flat length `a`, radius `r`). Rectangles have none and get an empty list.
pub fn default_orbit_library(geometry: &GridGeometry) -> Vec<PeriodicOrbit> {
    if geometry.kind() == BilliardKind::Rectangle {
        return Vec::new();
    }
    use BounceType::*;
    let a = geometry.arc_start() as f64;
    let r = geometry.n_top() as f64;
    let h = r * FRAC_1_SQRT_2;
    // whispering gallery: two chords with arc bounces at π/8 and 3π/8
    let (c8, s8) = ((PI / 8.0).cos(), (PI / 8.0).sin());
    let build = |name, v, t| PeriodicOrbit::new(name, v, t, Closure::Retracing).expect("library orbit");
    vec![
        build(BOUNCING_BALL, vec![[a / 2.0, 0.0], [a / 2.0, r]], vec![SymmetryAxis, StraightWall]),
        build(
            RECTANGULAR,
            vec![[0.0, h], [a + h, h], [a + h, 0.0]],
            vec![SymmetryAxis, Arc, SymmetryAxis],
        ),
        build(
            WHISPERING_GALLERY,
            vec![[a + r * c8, 0.0], [a + r * c8, r * s8], [a + r * s8, r * c8], [0.0, r * c8]],
            vec![SymmetryAxis, Arc, Arc, SymmetryAxis],
        ),
        build(
            BOW_TIE,
            vec![[0.0, 0.0], [a + r / 2.0, r * 3f64.sqrt() / 2.0], [a + r / 2.0, 0.0]],
            vec![SymmetryAxis, Arc, SymmetryAxis],
        ),
    ]
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct OrbitLibrary {
    pub orbits: Vec<PeriodicOrbit>,
}

impl OrbitLibrary {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn get(&self, name: &str) -> Option<&PeriodicOrbit> {
        self.orbits.iter().find(|o| o.name == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantized {
    pub k: f64,
    pub n: u32,
}

/// `n = round(k_target L / 2π)`, `k = 2π n / L`.
pub fn quantize_wavenumber(length: f64, k_target: f64) -> Result<Quantized> {
    if !(length > 0.0) || !(k_target > 0.0) {
        return Err(Error::config("orbit length and target wavenumber must be positive"));
    }
    let n = (k_target * length / TAU).round();
    if n < 1.0 {
        return Err(Error::config(format!(
            "k = {k_target} is below the lowest quantised level of an orbit of length {length}"
        )));
    }
    Ok(Quantized {
        k: TAU * n / length,
        n: n as u32,
    })
}

/// `k L − Φ = 2π n`, with `Φ` the bounce phase of the orbit. `n` may be
/// zero when `Φ > 0`.
pub fn quantize_with_phase(orbit: &PeriodicOrbit, k_target: f64) -> Result<Quantized> {
    let (l, phi) = (orbit.length(), orbit.bounce_phase());
    if !(k_target > 0.0) {
        return Err(Error::config("target wavenumber must be positive"));
    }
    let n = ((k_target * l - phi) / TAU).round().max(0.0);
    let k = (TAU * n + phi) / l;
    if k <= 0.0 {
        return Err(Error::config(format!("orbit {} has no positive level", orbit.name())));
    }
    Ok(Quantized { k, n: n as u32 })
}

/// Level `n` of the phase-corrected rule.
pub fn level_wavenumber(orbit: &PeriodicOrbit, n: u32) -> f64 {
    (TAU * n as f64 + orbit.bounce_phase()) / orbit.length()
}

/// Transverse width `1/√k`, the wave-packet scale of a level.
pub fn default_sigma(k: f64) -> f64 {
    1.0 / k.sqrt()
}

#[derive(Clone, Debug)]
pub struct ScarFunction {
    pub orbit: String,
    pub k: f64,
    /// Nearest level of the phase-corrected rule for this `k`.
    pub n_bs: i64,
    pub sigma: f64,
    /// Unit-norm field per site.
    pub field: Vec<Complex64>,
    pub probability: ProbabilityGrid,
    pub warnings: Vec<String>,
}

/// `Σ_segments exp(i(k(ξ₀ + s) − φ)) exp(−d² / 2σ²)` at every site, where
/// `s` is the clamped projection onto the segment, `d` the distance to it,
/// `ξ₀` the arclength and `φ` the bounce phase at the segment start.
pub fn build_scar_function(
    geometry: Arc<GridGeometry>,
    orbit: &PeriodicOrbit,
    k: f64,
    sigma: f64,
) -> Result<ScarFunction> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::config(format!("scar width sigma = {sigma} must be positive")));
    }
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::config(format!("wavenumber k = {k} must be positive")));
    }
    if !orbit.fits(&geometry) {
        return Err(Error::GeometryMismatch(format!(
            "orbit {} leaves the {} billiard",
            orbit.name(),
            geometry.tag()
        )));
    }
    let mut warnings = Vec::new();
    if sigma < 1.0 {
        warnings.push(format!("sigma = {sigma:.3} is below one grid cell"));
    }
    let segments = orbit.segments();
    let two_s2 = 2.0 * sigma * sigma;
    let mut field: Vec<Complex64> = geometry
        .sites()
        .iter()
        .map(|site| {
            let p = [site.m as f64, site.n as f64];
            segments
                .iter()
                .map(|seg| {
                    let (s, d) = seg.project(p);
                    let envelope = (-d * d / two_s2).exp();
                    Complex64::from_polar(envelope, k * (seg.arclength + s) - seg.bounce_phase)
                })
                .sum()
        })
        .collect();
    let norm = field.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::numerical(format!(
            "scar field of orbit {} vanishes on the grid",
            orbit.name()
        )));
    }
    for z in &mut field {
        *z /= norm;
    }
    let weights = field.iter().map(|z| z.norm_sqr()).collect();
    let probability = ProbabilityGrid::from_weights(geometry, weights)?;
    Ok(ScarFunction {
        orbit: orbit.name().to_owned(),
        k,
        n_bs: (orbit.circuit_phase(k) / TAU).round() as i64,
        sigma,
        field,
        probability,
        warnings,
    })
}

/// Bhattacharyya coefficient `Σ √(p q)` of two grids on the same geometry.
pub fn overlap(p: &ProbabilityGrid, q: &ProbabilityGrid) -> Result<f64> {
    if p.geometry() != q.geometry() {
        return Err(Error::GeometryMismatch(format!(
            "{} vs {}",
            p.geometry().tag(),
            q.geometry().tag()
        )));
    }
    Ok(bhattacharyya(p.values(), q.values()))
}

fn bhattacharyya(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a * b).sqrt()).sum::<f64>().min(1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub index: usize,
    pub pr: f64,
    pub eigenphase: f64,
    pub overlap: f64,
}

/// Eigenstates with PR inside `pr_window`, by decreasing overlap with the
/// scar probability.
pub fn rank_candidates(
    d: &SpectralDecomposition,
    report: &PRReport,
    scar: &ScarFunction,
    pr_window: (f64, f64),
) -> Result<Vec<Candidate>> {
    let geometry = scar.probability.geometry();
    if d.len() != geometry.dimension() || report.records.len() != d.len() {
        return Err(Error::DimensionMismatch {
            expected: geometry.dimension(),
            found: d.len(),
        });
    }
    let q = scar.probability.values();
    let v = d.vectors();
    let mut out: Vec<Candidate> = report
        .records
        .iter()
        .filter(|r| r.pr >= pr_window.0 && r.pr <= pr_window.1)
        .map(|r| {
            let col = v.col(r.index);
            let ov = q
                .iter()
                .enumerate()
                .map(|(s, &qs)| ((col[2 * s].norm_sqr() + col[2 * s + 1].norm_sqr()) * qs).sqrt())
                .sum::<f64>()
                .min(1.0);
            Candidate {
                index: r.index,
                pr: r.pr,
                eigenphase: r.eigenphase,
                overlap: ov,
            }
        })
        .collect();
    out.sort_by(|a, b| b.overlap.total_cmp(&a.overlap).then(a.index.cmp(&b.index)));
    Ok(out)
}

/// Result of scanning levels and widths for one orbit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScarScan {
    pub orbit: String,
    pub k: f64,
    pub n: u32,
    pub sigma: f64,
    pub best: Candidate,
}

/// Top candidate for every level `n` within `level_window` of the level
/// nearest `k_target` and every width `max(1, μ/√k)` with `μ` in
/// `sigma_factors`. Combinations with an empty PR window are skipped.
#[allow(clippy::too_many_arguments)]
pub fn scan_orbit(
    geometry: Arc<GridGeometry>,
    d: &SpectralDecomposition,
    report: &PRReport,
    orbit: &PeriodicOrbit,
    k_target: f64,
    level_window: u32,
    sigma_factors: &[f64],
    pr_window: (f64, f64),
) -> Result<Vec<ScarScan>> {
    let centre = quantize_with_phase(orbit, k_target)?.n;
    let mut out = Vec::new();
    for n in centre.saturating_sub(level_window)..=centre + level_window {
        let k = level_wavenumber(orbit, n);
        if k <= 0.0 {
            continue;
        }
        for &mu in sigma_factors {
            let sigma = (mu * default_sigma(k)).max(1.0);
            let scar = build_scar_function(geometry.clone(), orbit, k, sigma)?;
            if let Some(top) = rank_candidates(d, report, &scar, pr_window)?.first() {
                out.push(ScarScan {
                    orbit: orbit.name().to_owned(),
                    k,
                    n,
                    sigma,
                    best: *top,
                });
            }
        }
    }
    Ok(out)
}

/// The scan entry with the largest overlap; earlier entries win ties.
pub fn best_scan(scans: &[ScarScan]) -> Option<&ScarScan> {
    scans
        .iter()
        .fold(None, |best: Option<&ScarScan>, s| match best {
            Some(b) if b.best.overlap >= s.best.overlap => Some(b),
            _ => Some(s),
        })
}
