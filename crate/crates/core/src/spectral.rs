//! Eigenphases of the step operator and their nearest-neighbour statistics.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;
use crate::walker::WalkOperator;

pub const DEFAULT_MAX_DIMENSION: usize = 10_000;
pub const DEFAULT_BIN_COUNT: usize = 30;
pub const DEFAULT_S_MAX: f64 = 4.0;

/// Eigenphases closer than this are treated as one cluster and their vectors
/// re-orthonormalised together.
const CLUSTER_GAP: f64 = 1e-8;
const RESIDUAL_LIMIT: f64 = 1e-8;
// clusters narrower than this share one eigenphase
const EXACT_DEGENERACY: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    phases: Vec<f64>,
    vectors: Mat<Complex64>,
    residuals: Vec<f64>,
    parameter_hash: String,
}

impl SpectralDecomposition {
    pub(crate) fn from_parts(
        phases: Vec<f64>,
        vectors: Mat<Complex64>,
        residuals: Vec<f64>,
        parameter_hash: String,
    ) -> Self {
        SpectralDecomposition {
            phases,
            vectors,
            residuals,
            parameter_hash,
        }
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// Eigenphases in `[0, 2π)`, ascending.
    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn parameter_hash(&self) -> &str {
        &self.parameter_hash
    }

    pub fn vectors(&self) -> faer::MatRef<'_, Complex64> {
        self.vectors.as_ref()
    }

    pub fn vector(&self, j: usize) -> Vec<Complex64> {
        self.vectors.col(j).iter().copied().collect()
    }

    pub fn eigenvalue(&self, j: usize) -> Complex64 {
        Complex64::from_polar(1.0, self.phases[j])
    }

    /// `max |V†V − I|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let gram = self.vectors.adjoint() * &self.vectors;
        max_identity_defect(&gram)
    }

    /// `max |Q − V Λ V†|` against the sparse operator.
    pub fn reconstruction_error(&self, matrix: &SparseMatrix) -> f64 {
        let n = self.len();
        let scaled = Mat::from_fn(n, n, |i, j| self.vectors[(i, j)] * self.eigenvalue(j));
        let product = &scaled * self.vectors.adjoint();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((product[(i, j)] - matrix.get(i, j)).norm());
            }
        }
        worst
    }

    /// `index,phase,residual` rows.
    pub fn write_phases_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "index,phase,residual")?;
        for (j, (p, r)) in self.phases.iter().zip(&self.residuals).enumerate() {
            writeln!(out, "{j},{p:.17e},{r:.6e}")?;
        }
        Ok(())
    }
}

fn max_identity_defect(m: &Mat<Complex64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((m[(i, j)] - target).norm());
        }
    }
    worst
}

pub fn diagonalize(operator: &WalkOperator) -> Result<SpectralDecomposition> {
    diagonalize_capped(operator, DEFAULT_MAX_DIMENSION)
}

/// Dense eigendecomposition of the step operator.
///
/// Columns are sorted by eigenphase, scaled to unit norm and given a fixed
/// global phase (largest component real and positive) so that repeated runs
/// produce identical output. Vectors inside a cluster of nearly degenerate
/// phases are re-orthonormalised and rotated onto a fixed probe basis.
pub fn diagonalize_capped(operator: &WalkOperator, max_dimension: usize) -> Result<SpectralDecomposition> {
    let n = operator.dimension();
    if n > max_dimension {
        return Err(Error::config(format!(
            "dimension {n} exceeds the diagonalisation cap {max_dimension}"
        )));
    }
    if n == 0 {
        return Err(Error::Empty("operator"));
    }
    let matrix = operator.matrix();
    let eig = matrix
        .to_dense()
        .eigen()
        .map_err(|e| Error::numerical(format!("eigensolver failed: {e:?}")))?;
    let values = eig.S().column_vector();
    let u = eig.U();

    let mut worst_modulus = 0.0f64;
    let mut order: Vec<(f64, usize)> = (0..n)
        .map(|j| {
            let lambda = values[j];
            worst_modulus = worst_modulus.max((lambda.norm() - 1.0).abs());
            (wrap_phase(lambda.arg()), j)
        })
        .collect();
    if worst_modulus > RESIDUAL_LIMIT {
        return Err(Error::numerical(format!(
            "eigenvalue modulus deviates from 1 by {worst_modulus:.3e}"
        )));
    }
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut phases: Vec<f64> = order.iter().map(|&(p, _)| p).collect();
    let mut vectors = Mat::from_fn(n, n, |i, j| u[(i, order[j].1)]);

    // probe rank inside each cluster; orders members whose phases coincide
    let mut rank = vec![0usize; n];
    for cluster in phase_clusters(&phases) {
        orthonormalise(&mut vectors, &cluster)?;
        if cluster.len() == 1 {
            continue;
        }
        canonicalise(&mut vectors, &cluster)?;
        let rayleigh: Vec<f64> = cluster
            .iter()
            .map(|&j| {
                let v: Vec<Complex64> = vectors.col(j).iter().copied().collect();
                let qv = matrix.mul_vec(&v);
                let rq: Complex64 = v.iter().zip(&qv).map(|(a, b)| a.conj() * b).sum();
                rq.arg()
            })
            .collect();
        // unwrap around the first member so clusters straddling 0 / 2π sort
        let r0 = rayleigh[0];
        let mut unwrapped: Vec<f64> = rayleigh.iter().map(|&r| r0 + signed_gap(r - r0)).collect();
        unwrapped.sort_by(f64::total_cmp);
        let spread = unwrapped[unwrapped.len() - 1] - unwrapped[0];
        let mean = unwrapped.iter().sum::<f64>() / unwrapped.len() as f64;
        for (a, &j) in cluster.iter().enumerate() {
            phases[j] = wrap_phase(if spread < EXACT_DEGENERACY { mean } else { unwrapped[a] });
            rank[j] = a;
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        phases[a]
            .total_cmp(&phases[b])
            .then(rank[a].cmp(&rank[b]))
            .then(a.cmp(&b))
    });
    let phases: Vec<f64> = idx.iter().map(|&j| phases[j]).collect();
    let mut vectors = Mat::from_fn(n, n, |i, j| vectors[(i, idx[j])]);

    for j in 0..n {
        fix_global_phase(&mut vectors, j);
    }

    let mut residuals = Vec::with_capacity(n);
    let mut scratch = vec![Complex64::new(0.0, 0.0); n];
    for (j, &phase) in phases.iter().enumerate() {
        let v: Vec<Complex64> = vectors.col(j).iter().copied().collect();
        matrix.mul_vec_into(&v, &mut scratch);
        let lambda = Complex64::from_polar(1.0, phase);
        let r = scratch
            .iter()
            .zip(&v)
            .map(|(qv, v)| (qv - lambda * v).norm_sqr())
            .sum::<f64>()
            .sqrt();
        residuals.push(r);
    }
    let decomposition = SpectralDecomposition {
        phases,
        vectors,
        residuals,
        parameter_hash: operator.parameter_hash(),
    };
    let worst = decomposition.max_residual();
    if worst > RESIDUAL_LIMIT {
        let j = decomposition
            .residuals
            .iter()
            .position(|&r| r == worst)
            .unwrap_or(0);
        return Err(Error::numerical(format!(
            "eigenpair residual {worst:.3e} exceeds {RESIDUAL_LIMIT:e} (index {j}, phase {:.12})",
            decomposition.phases[j]
        )));
    }
    Ok(decomposition)
}

fn wrap_phase(theta: f64) -> f64 {
    let p = theta.rem_euclid(TAU);
    if p >= TAU {
        0.0
    } else {
        p
    }
}

/// Groups of consecutive indices whose phase gaps are below `CLUSTER_GAP`,
/// treating the phases as points on a circle.
fn phase_clusters(phases: &[f64]) -> Vec<Vec<usize>> {
    let n = phases.len();
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut current = vec![0];
    for j in 1..n {
        if phases[j] - phases[j - 1] < CLUSTER_GAP {
            current.push(j);
        } else {
            clusters.push(std::mem::replace(&mut current, vec![j]));
        }
    }
    clusters.push(current);
    if clusters.len() > 1 && phases[0] + TAU - phases[n - 1] < CLUSTER_GAP {
        let last = clusters.pop().unwrap();
        clusters[0].extend(last);
    }
    clusters
}

/// Modified Gram–Schmidt, applied twice, over the given columns.
fn orthonormalise(v: &mut Mat<Complex64>, cols: &[usize]) -> Result<()> {
    let rows = v.nrows();
    for _pass in 0..2 {
        for (a, &j) in cols.iter().enumerate() {
            for &k in &cols[..a] {
                let mut dot = Complex64::new(0.0, 0.0);
                for i in 0..rows {
                    dot += v[(i, k)].conj() * v[(i, j)];
                }
                for i in 0..rows {
                    let d = dot * v[(i, k)];
                    v[(i, j)] -= d;
                }
            }
            let norm = (0..rows).map(|i| v[(i, j)].norm_sqr()).sum::<f64>().sqrt();
            if norm < 1e-8 {
                return Err(Error::numerical(format!(
                    "eigenvectors in a degenerate cluster of size {} are linearly dependent",
                    cols.len()
                )));
            }
            for i in 0..rows {
                v[(i, j)] /= norm;
            }
        }
    }
    Ok(())
}

/// `x` reduced to `(-π, π]`.
fn signed_gap(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

// Weyl sequence: distinct weights with no spatial structure
fn probe_weight(i: usize) -> f64 {
    ((i + 1) as f64 * 0.618_033_988_749_894_9).fract()
}

/// Rotates an orthonormal degenerate cluster onto the eigenbasis of a fixed
/// diagonal probe restricted to the cluster, the way a generic small
/// perturbation would split it. The result no longer depends on which basis
/// the eigensolver happened to return.
fn canonicalise(v: &mut Mat<Complex64>, cols: &[usize]) -> Result<()> {
    let (rows, k) = (v.nrows(), cols.len());
    let old = Mat::from_fn(rows, k, |i, a| v[(i, cols[a])]);
    let restricted = Mat::from_fn(k, k, |a, b| {
        (0..rows)
            .map(|i| old[(i, a)].conj() * old[(i, b)] * probe_weight(i))
            .sum::<Complex64>()
    });
    let eig = restricted
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::numerical(format!("cluster probe eigensolver failed: {e:?}")))?;
    let rotated = &old * eig.U();
    for (a, &j) in cols.iter().enumerate() {
        for i in 0..rows {
            v[(i, j)] = rotated[(i, a)];
        }
    }
    Ok(())
}

fn fix_global_phase(v: &mut Mat<Complex64>, j: usize) {
    let rows = v.nrows();
    let mut pivot = 0;
    let mut best = -1.0;
    for i in 0..rows {
        // strict comparison keeps the first of equal-modulus components
        let m = v[(i, j)].norm_sqr();
        if m > best + 1e-12 {
            best = m;
            pivot = i;
        }
    }
    let p = v[(pivot, j)];
    if p.norm() == 0.0 {
        return;
    }
    let rot = p.conj() / p.norm();
    for i in 0..rows {
        v[(i, j)] *= rot;
    }
}

/// Nearest-neighbour spacings on the unit circle, wrap-around gap included,
/// rescaled by `N / 2π` so their mean is one.
pub fn unfold_spacings(phases: &[f64]) -> Result<Vec<f64>> {
    let n = phases.len();
    if n < 2 {
        return Err(Error::Empty("at least two eigenphases are required"));
    }
    if phases.iter().any(|p| !(0.0..TAU).contains(p)) {
        return Err(Error::config("eigenphases must lie in [0, 2π)"));
    }
    if phases.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::config("eigenphases must be sorted ascending"));
    }
    let scale = n as f64 / TAU;
    let mut out: Vec<f64> = phases.windows(2).map(|w| (w[1] - w[0]) * scale).collect();
    out.push((phases[0] + TAU - phases[n - 1]) * scale);
    Ok(out)
}

fn check_s(s: f64) -> Result<()> {
    if s >= 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("spacing s = {s} must be finite and non-negative")))
    }
}

pub fn poisson_pdf(s: f64) -> Result<f64> {
    check_s(s)?;
    Ok((-s).exp())
}

pub fn wigner_pdf(s: f64) -> Result<f64> {
    check_s(s)?;
    Ok(FRAC_PI_2 * s * (-PI * s * s / 4.0).exp())
}

const FRAC_PI_2: f64 = std::f64::consts::FRAC_PI_2;

pub fn brody_pdf(s: f64, delta: f64) -> Result<f64> {
    check_s(s)?;
    Ok(SpacingLaw::brody(delta)?.pdf(s))
}

/// `(a, b)` of the Brody law with `b = Γ((δ+2)/(δ+1))^{δ+1}`, `a = (δ+1) b`.
pub fn brody_constants(delta: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::config(format!("Brody parameter {delta} outside [0, 1]")));
    }
    let b = gamma((delta + 2.0) / (delta + 1.0)).powf(delta + 1.0);
    Ok(((delta + 1.0) * b, b))
}

/// A validated spacing density, cheap to evaluate many times.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpacingLaw {
    Poisson,
    Wigner,
    Brody { delta: f64, a: f64, b: f64 },
}

impl SpacingLaw {
    pub fn brody(delta: f64) -> Result<Self> {
        let (a, b) = brody_constants(delta)?;
        Ok(SpacingLaw::Brody { delta, a, b })
    }

    /// Density at `s ≥ 0`; zero for negative `s`.
    pub fn pdf(&self, s: f64) -> f64 {
        if s < 0.0 {
            return 0.0;
        }
        match *self {
            SpacingLaw::Poisson => (-s).exp(),
            SpacingLaw::Wigner => FRAC_PI_2 * s * (-PI * s * s / 4.0).exp(),
            SpacingLaw::Brody { delta, a, b } => {
                // s^δ at s = 0 is 1 for δ = 0 and 0 otherwise; powf handles both
                a * s.powf(delta) * (-b * s.powf(delta + 1.0)).exp()
            }
        }
    }

    pub fn cdf(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match *self {
            SpacingLaw::Poisson => 1.0 - (-s).exp(),
            SpacingLaw::Wigner => 1.0 - (-PI * s * s / 4.0).exp(),
            SpacingLaw::Brody { delta, b, .. } => 1.0 - (-b * s.powf(delta + 1.0)).exp(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacingHistogram {
    pub spacings: Vec<f64>,
    pub bin_edges: Vec<f64>,
    pub density: Vec<f64>,
    /// Spacings beyond the last edge; they are counted in the last bin.
    pub overflow: usize,
}

pub fn spacing_histogram(spacings: &[f64], bin_count: usize, s_max: f64) -> Result<SpacingHistogram> {
    if spacings.is_empty() {
        return Err(Error::Empty("spacings"));
    }
    if bin_count < 5 {
        return Err(Error::config(format!("bin count {bin_count} must be at least 5")));
    }
    if !(s_max > 0.0 && s_max.is_finite()) {
        return Err(Error::config(format!("histogram range s_max = {s_max} must be positive")));
    }
    if spacings.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
        return Err(Error::config("spacings must be finite and non-negative"));
    }
    let width = s_max / bin_count as f64;
    let mut counts = vec![0usize; bin_count];
    let mut overflow = 0;
    for &s in spacings {
        if s >= s_max {
            overflow += 1;
        }
        let b = ((s / width) as usize).min(bin_count - 1);
        counts[b] += 1;
    }
    let norm = spacings.len() as f64 * width;
    Ok(SpacingHistogram {
        spacings: spacings.to_vec(),
        bin_edges: (0..=bin_count).map(|i| i as f64 * width).collect(),
        density: counts.iter().map(|&c| c as f64 / norm).collect(),
        overflow,
    })
}

impl SpacingHistogram {
    pub fn bin_count(&self) -> usize {
        self.density.len()
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_edges[1] - self.bin_edges[0]
    }

    pub fn s_max(&self) -> f64 {
        *self.bin_edges.last().unwrap()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn integral(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_width()
    }

    pub fn mean_spacing(&self) -> f64 {
        self.spacings.iter().sum::<f64>() / self.spacings.len() as f64
    }

    /// True when the first bin is the tallest, the signature of level
    /// clustering.
    pub fn first_bin_dominates(&self) -> bool {
        let first = self.density[0];
        self.density[1..].iter().all(|&d| d < first)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "bin_lo,bin_hi,center,density")?;
        for (i, d) in self.density.iter().enumerate() {
            let (lo, hi) = (self.bin_edges[i], self.bin_edges[i + 1]);
            writeln!(out, "{lo:.6},{hi:.6},{:.6},{d:.17e}", 0.5 * (lo + hi))?;
        }
        Ok(())
    }
}

/// Root-mean-square deviation between the histogram and `pdf` at the bin
/// centres.
pub fn rms_error(histogram: &SpacingHistogram, pdf: impl Fn(f64) -> f64) -> f64 {
    let centers = histogram.centers();
    let sum: f64 = centers
        .iter()
        .zip(&histogram.density)
        .map(|(&c, &d)| (d - pdf(c)).powi(2))
        .sum();
    (sum / centers.len() as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrodyFit {
    pub delta: f64,
    pub rms_brody: f64,
    pub rms_wigner: f64,
    pub rms_poisson: f64,
}

const SCAN_STEPS: usize = 1000;

/// Least-squares Brody parameter by dense scan of `δ = i / 1000`.
pub fn fit_brody(histogram: &SpacingHistogram) -> Result<BrodyFit> {
    if histogram.density.iter().filter(|&&d| d > 0.0).count() < 2 {
        return Err(Error::numerical("histogram has its mass in a single bin; cannot fit"));
    }
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=SCAN_STEPS {
        let delta = i as f64 / SCAN_STEPS as f64;
        let law = SpacingLaw::brody(delta)?;
        let rms = rms_error(histogram, |s| law.pdf(s));
        if rms < best.0 {
            best = (rms, delta);
        }
    }
    Ok(BrodyFit {
        delta: best.1,
        rms_brody: best.0,
        rms_wigner: rms_error(histogram, |s| SpacingLaw::Wigner.pdf(s)),
        rms_poisson: rms_error(histogram, |s| SpacingLaw::Poisson.pdf(s)),
    })
}
