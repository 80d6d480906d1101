//! Walker states, probability grids and time evolution.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;

use crate::domain::GridGeometry;
use crate::error::{Error, Result};
use crate::walker::{basis_index, Spin, WalkOperator};

/// Amplitudes `(U, D)` per site, interleaved as `[U_0, D_0, U_1, D_1, ...]`.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkerState {
    geometry: Arc<GridGeometry>,
    amplitudes: Vec<Complex64>,
}

impl WalkerState {
    pub(crate) fn from_parts(geometry: Arc<GridGeometry>, amplitudes: Vec<Complex64>) -> Self {
        debug_assert_eq!(amplitudes.len(), geometry.dimension());
        WalkerState { geometry, amplitudes }
    }

    /// Wraps raw amplitudes; they must have the right length and unit norm
    /// to within 1e-10.
    pub fn from_amplitudes(geometry: Arc<GridGeometry>, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != geometry.dimension() {
            return Err(Error::DimensionMismatch {
                expected: geometry.dimension(),
                found: amplitudes.len(),
            });
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized(norm));
        }
        Ok(WalkerState { geometry, amplitudes })
    }

    pub fn basis(geometry: Arc<GridGeometry>, m: usize, n: usize, spin: Spin) -> Result<Self> {
        let site = geometry.index_of(m, n).ok_or(Error::OffDomain {
            m: m as i64,
            n: n as i64,
        })?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); geometry.dimension()];
        amplitudes[basis_index(site, spin)] = Complex64::new(1.0, 0.0);
        Ok(WalkerState { geometry, amplitudes })
    }

    pub fn geometry(&self) -> &Arc<GridGeometry> {
        &self.geometry
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn up(&self, site: usize) -> Complex64 {
        self.amplitudes[basis_index(site, Spin::Up)]
    }

    pub fn down(&self, site: usize) -> Complex64 {
        self.amplitudes[basis_index(site, Spin::Down)]
    }
}

/// Single-site state at `(m0, n0)` carrying the spinor `(up, down)`.
pub fn centered_initial_state(
    geometry: Arc<GridGeometry>,
    m0: usize,
    n0: usize,
    up: Complex64,
    down: Complex64,
) -> Result<WalkerState> {
    let site = geometry.index_of(m0, n0).ok_or(Error::OffDomain {
        m: m0 as i64,
        n: n0 as i64,
    })?;
    let norm = up.norm_sqr() + down.norm_sqr();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::NotNormalized(norm));
    }
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); geometry.dimension()];
    amplitudes[basis_index(site, Spin::Up)] = up;
    amplitudes[basis_index(site, Spin::Down)] = down;
    Ok(WalkerState { geometry, amplitudes })
}

/// The spinor `(1/√2, i/√2)` used for the evolution figures.
pub fn default_spinor() -> (Complex64, Complex64) {
    let a = std::f64::consts::FRAC_1_SQRT_2;
    (Complex64::new(a, 0.0), Complex64::new(0.0, a))
}

/// Per-site probability `|U|² + |D|²`, zero outside the domain.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityGrid {
    geometry: Arc<GridGeometry>,
    values: Vec<f64>,
}

impl ProbabilityGrid {
    pub fn from_amplitudes(geometry: Arc<GridGeometry>, amplitudes: &[Complex64]) -> Result<Self> {
        if amplitudes.len() != geometry.dimension() {
            return Err(Error::DimensionMismatch {
                expected: geometry.dimension(),
                found: amplitudes.len(),
            });
        }
        let values = amplitudes
            .chunks_exact(2)
            .map(|p| p[0].norm_sqr() + p[1].norm_sqr())
            .collect();
        Ok(ProbabilityGrid { geometry, values })
    }

    /// Per-site weights, renormalised to sum to one.
    pub fn from_weights(geometry: Arc<GridGeometry>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != geometry.site_count() {
            return Err(Error::DimensionMismatch {
                expected: geometry.site_count(),
                found: weights.len(),
            });
        }
        if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::numerical("probability weights must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::Empty("probability weights"));
        }
        let values = weights.into_iter().map(|w| w / total).collect();
        Ok(ProbabilityGrid { geometry, values })
    }

    pub fn geometry(&self) -> &Arc<GridGeometry> {
        &self.geometry
    }

    /// Values indexed like `geometry.sites()`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.geometry.index_of(m, n).map_or(0.0, |i| self.values[i])
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    fn union_box(&self, other: &ProbabilityGrid) -> (usize, usize) {
        (
            self.geometry.m_right().max(other.geometry.m_right()),
            self.geometry.n_top().max(other.geometry.n_top()),
        )
    }

    /// Largest pointwise difference over the union of both domains.
    pub fn max_abs_difference(&self, other: &ProbabilityGrid) -> f64 {
        let (mr, nu) = self.union_box(other);
        let mut worst = 0.0f64;
        for n in 0..=nu {
            for m in 0..=mr {
                worst = worst.max((self.get(m, n) - other.get(m, n)).abs());
            }
        }
        worst
    }

    /// L1 distance over the union of both domains.
    pub fn l1_distance(&self, other: &ProbabilityGrid) -> f64 {
        let (mr, nu) = self.union_box(other);
        let mut acc = 0.0;
        for n in 0..=nu {
            for m in 0..=mr {
                acc += (self.get(m, n) - other.get(m, n)).abs();
            }
        }
        acc
    }

    /// `m,n,p` rows in site order, with a header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "m,n,p")?;
        for (s, p) in self.geometry.sites().iter().zip(&self.values) {
            writeln!(out, "{},{},{:.17e}", s.m, s.n, p)?;
        }
        Ok(())
    }
}

pub fn probability_grid(state: &WalkerState) -> ProbabilityGrid {
    let values = state
        .amplitudes
        .chunks_exact(2)
        .map(|p| p[0].norm_sqr() + p[1].norm_sqr())
        .collect();
    ProbabilityGrid {
        geometry: state.geometry.clone(),
        values,
    }
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: usize,
    pub grid: ProbabilityGrid,
    pub amplitudes: Option<Vec<Complex64>>,
}

#[derive(Clone, Debug)]
pub struct Evolution {
    pub snapshots: Vec<Snapshot>,
    pub final_state: WalkerState,
}

/// Applies `operator` `steps` times and records the probability grid after
/// exactly `t` applications for every `t` in `snapshot_times`.
pub fn evolve(
    state: &WalkerState,
    operator: &WalkOperator,
    steps: usize,
    snapshot_times: &[usize],
    keep_amplitudes: bool,
) -> Result<Evolution> {
    if state.amplitudes.len() != operator.dimension() {
        return Err(Error::DimensionMismatch {
            expected: operator.dimension(),
            found: state.amplitudes.len(),
        });
    }
    if snapshot_times.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::config("snapshot times must be sorted"));
    }
    if let Some(&last) = snapshot_times.last() {
        if last > steps {
            return Err(Error::config(format!("snapshot time {last} exceeds {steps} steps")));
        }
    }

    let mut snapshots = Vec::with_capacity(snapshot_times.len());
    let mut current = state.amplitudes.clone();
    let mut scratch = vec![Complex64::new(0.0, 0.0); current.len()];
    let mut pending = snapshot_times.iter().peekable();
    for t in 0..=steps {
        while pending.peek() == Some(&&t) {
            pending.next();
            snapshots.push(Snapshot {
                t,
                grid: ProbabilityGrid::from_amplitudes(state.geometry.clone(), &current)?,
                amplitudes: keep_amplitudes.then(|| current.clone()),
            });
        }
        if t < steps {
            operator.matrix().mul_vec_into(&current, &mut scratch);
            std::mem::swap(&mut current, &mut scratch);
        }
    }
    Ok(Evolution {
        snapshots,
        final_state: WalkerState::from_parts(state.geometry.clone(), current),
    })
}
