//! Coins, reflecting shifts and the one-step operator `Q = W_n C2 W_m C1`.
//!
//! Basis index of `(site, spin)` is `2 * site + spin` with spin 0 = up and
//! 1 = down, so the coins are 2×2 blocks on the diagonal.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4};
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::GridGeometry;
use crate::dynamics::WalkerState;
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

pub type Coin = [[Complex64; 2]; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(usize)]
pub enum Spin {
    Up = 0,
    Down = 1,
}

#[inline]
pub fn basis_index(site: usize, spin: Spin) -> usize {
    2 * site + spin as usize
}

/// `[[cos θ, sin θ], [−e^{iφ} sin θ, e^{iφ} cos θ]]`
pub fn coin_matrix(angle: f64, phase: f64) -> Coin {
    let (s, c) = angle.sin_cos();
    let e = Complex64::from_polar(1.0, phase);
    [
        [Complex64::new(c, 0.0), Complex64::new(s, 0.0)],
        [-e * s, e * c],
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoinParameters {
    pub alpha: f64,
    pub beta: f64,
    #[serde(default = "default_phase")]
    pub phase: f64,
}

fn default_phase() -> f64 {
    FRAC_PI_4
}

impl CoinParameters {
    pub const DEFAULT_PHASE: f64 = FRAC_PI_4;

    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        Self::with_phase(alpha, beta, Self::DEFAULT_PHASE)
    }

    pub fn with_phase(alpha: f64, beta: f64, phase: f64) -> Result<Self> {
        let p = CoinParameters { alpha, beta, phase };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(0.0..=FRAC_PI_2).contains(&v) {
                return Err(Error::config(format!("coin angle {name} = {v} outside [0, π/2]")));
            }
        }
        if !self.phase.is_finite() {
            return Err(Error::config("coin phase must be finite"));
        }
        Ok(())
    }

    /// α = β = π/4.
    pub fn symmetric() -> Self {
        CoinParameters { alpha: FRAC_PI_4, beta: FRAC_PI_4, phase: FRAC_PI_4 }
    }

    /// α = π/4, β = π/3.
    pub fn asymmetric() -> Self {
        CoinParameters { alpha: FRAC_PI_4, beta: FRAC_PI_3, phase: FRAC_PI_4 }
    }

    pub fn first(&self) -> Coin {
        coin_matrix(self.alpha, self.phase)
    }

    pub fn second(&self) -> Coin {
        coin_matrix(self.beta, self.phase)
    }
}

/// A reflecting shift: basis vector `j` goes to basis vector `target[j]`
/// with coefficient 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShiftOperator {
    target: Vec<usize>,
}

impl ShiftOperator {
    pub fn target(&self, j: usize) -> usize {
        self.target[j]
    }

    pub fn dim(&self) -> usize {
        self.target.len()
    }

    pub fn is_permutation(&self) -> bool {
        let mut seen = vec![false; self.target.len()];
        for &t in &self.target {
            if t >= seen.len() || std::mem::replace(&mut seen[t], true) {
                return false;
            }
        }
        true
    }

    pub fn apply(&self, input: &[Complex64], out: &mut [Complex64]) {
        for (j, &t) in self.target.iter().enumerate() {
            out[t] = input[j];
        }
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        SparseMatrix::from_triplets(
            self.target.len(),
            self.target.iter().enumerate().map(|(j, &t)| (t, j, Complex64::new(1.0, 0.0))),
        )
    }
}

/// Horizontal step: up-movers go to `m + 1` and flip to down at `w(n)`;
/// down-movers go to `m − 1` and flip to up at `0`.
pub fn build_shift_horizontal(geometry: &GridGeometry) -> ShiftOperator {
    let mut target = vec![0; geometry.dimension()];
    for (i, s) in geometry.sites().iter().enumerate() {
        let edge = geometry.w(s.n);
        target[basis_index(i, Spin::Up)] = if s.m < edge {
            basis_index(geometry.index_of(s.m + 1, s.n).unwrap(), Spin::Up)
        } else {
            basis_index(i, Spin::Down)
        };
        target[basis_index(i, Spin::Down)] = if s.m > 0 {
            basis_index(geometry.index_of(s.m - 1, s.n).unwrap(), Spin::Down)
        } else {
            basis_index(i, Spin::Up)
        };
    }
    ShiftOperator { target }
}

/// Vertical step, the same rule along `n` with `f(m)` as the top edge.
pub fn build_shift_vertical(geometry: &GridGeometry) -> ShiftOperator {
    let mut target = vec![0; geometry.dimension()];
    for (i, s) in geometry.sites().iter().enumerate() {
        let edge = geometry.f(s.m);
        target[basis_index(i, Spin::Up)] = if s.n < edge {
            basis_index(geometry.index_of(s.m, s.n + 1).unwrap(), Spin::Up)
        } else {
            basis_index(i, Spin::Down)
        };
        target[basis_index(i, Spin::Down)] = if s.n > 0 {
            basis_index(geometry.index_of(s.m, s.n - 1).unwrap(), Spin::Down)
        } else {
            basis_index(i, Spin::Up)
        };
    }
    ShiftOperator { target }
}

/// `I ⊗ coin` on a grid with `site_count` sites.
pub fn coin_factor(coin: &Coin, site_count: usize) -> SparseMatrix {
    SparseMatrix::from_triplets(
        2 * site_count,
        (0..site_count).flat_map(|s| {
            (0..2).flat_map(move |r| (0..2).map(move |c| (2 * s + r, 2 * s + c, coin[r][c])))
        }),
    )
}

fn apply_coin(coin: &Coin, v: &mut [Complex64]) {
    for pair in v.chunks_exact_mut(2) {
        let (u, d) = (pair[0], pair[1]);
        pair[0] = coin[0][0] * u + coin[0][1] * d;
        pair[1] = coin[1][0] * u + coin[1][1] * d;
    }
}

/// The one-step evolution operator together with its factors.
#[derive(Clone, Debug)]
pub struct WalkOperator {
    geometry: Arc<GridGeometry>,
    coins: CoinParameters,
    horizontal: ShiftOperator,
    vertical: ShiftOperator,
    matrix: SparseMatrix,
}

pub fn build_step_operator(geometry: Arc<GridGeometry>, coins: CoinParameters) -> Result<WalkOperator> {
    coins.validate()?;
    let horizontal = build_shift_horizontal(&geometry);
    let vertical = build_shift_vertical(&geometry);
    let (c1, c2) = (coins.first(), coins.second());
    let dim = geometry.dimension();

    // Push each basis vector through C1, W_m, C2, W_n; at most four outputs.
    let mut triplets = Vec::with_capacity(4 * dim);
    for col in 0..dim {
        let (site, spin) = (col / 2, col % 2);
        let shifted = [
            (horizontal.target(2 * site), c1[0][spin]),
            (horizontal.target(2 * site + 1), c1[1][spin]),
        ];
        for (idx, a) in shifted {
            let (s, sp) = (idx / 2, idx % 2);
            triplets.push((vertical.target(2 * s), col, c2[0][sp] * a));
            triplets.push((vertical.target(2 * s + 1), col, c2[1][sp] * a));
        }
    }
    let matrix = SparseMatrix::from_triplets(dim, triplets);

    Ok(WalkOperator {
        geometry,
        coins,
        horizontal,
        vertical,
        matrix,
    })
}

impl WalkOperator {
    pub fn geometry(&self) -> &Arc<GridGeometry> {
        &self.geometry
    }

    pub fn coins(&self) -> CoinParameters {
        self.coins
    }

    pub fn dimension(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn horizontal_shift(&self) -> &ShiftOperator {
        &self.horizontal
    }

    pub fn vertical_shift(&self) -> &ShiftOperator {
        &self.vertical
    }

    /// One step of the walk on `state`.
    pub fn apply(&self, state: &WalkerState) -> Result<WalkerState> {
        if !Arc::ptr_eq(state.geometry(), &self.geometry) && **state.geometry() != *self.geometry {
            return Err(Error::GeometryMismatch(format!(
                "state lives on {}, operator on {}",
                state.geometry().tag(),
                self.geometry.tag()
            )));
        }
        let out = self.apply_vec(state.amplitudes())?;
        Ok(WalkerState::from_parts(self.geometry.clone(), out))
    }

    pub fn apply_vec(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: v.len(),
            });
        }
        Ok(self.matrix.mul_vec(v))
    }

    /// Same step computed factor by factor, without the assembled matrix.
    pub fn apply_factored(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: v.len(),
            });
        }
        let mut a = v.to_vec();
        let mut b = vec![Complex64::new(0.0, 0.0); a.len()];
        apply_coin(&self.coins.first(), &mut a);
        self.horizontal.apply(&a, &mut b);
        apply_coin(&self.coins.second(), &mut b);
        self.vertical.apply(&b, &mut a);
        Ok(a)
    }

    pub fn unitarity_defect(&self) -> f64 {
        self.matrix.unitarity_defect()
    }

    /// Hex SHA-256 over geometry and coin parameters; keys the eigen cache.
    pub fn parameter_hash(&self) -> String {
        parameter_hash(&self.geometry, &self.coins)
    }

    /// `row col re im` per nonzero, preceded by a `#` header line.
    pub fn write_triplets<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# dimension {} nnz {} hash {}",
            self.dimension(),
            self.matrix.nnz(),
            self.parameter_hash()
        )?;
        for (r, c, v) in self.matrix.triplets() {
            writeln!(out, "{r} {c} {:.17e} {:.17e}", v.re, v.im)?;
        }
        Ok(())
    }
}

pub fn parameter_hash(geometry: &GridGeometry, coins: &CoinParameters) -> String {
    let mut h = Sha256::new();
    h.update(b"aqw-operator-v1");
    h.update(geometry.kind().to_string().as_bytes());
    h.update((geometry.m_right() as u64).to_le_bytes());
    h.update((geometry.n_top() as u64).to_le_bytes());
    for x in [coins.alpha, coins.beta, coins.phase] {
        h.update(x.to_bits().to_le_bytes());
    }
    hex::encode(h.finalize())
}
