//! Coined two-dimensional alternate quantum walk on billiard-shaped grids.
//!
//! The walker lives on the integer sites of a rectangle or a quarter
//! stadium. One step applies a coin, a horizontal shift, a second coin and a
//! vertical shift; walls reflect by flipping the spin component. On top of
//! the step operator sit the spectral statistics (unfolded eigenphase
//! spacings against Poisson, Wigner and Brody laws), participation ratios of
//! eigenstates, and overlaps with Gaussian tubes around periodic orbits.

pub mod cache;
pub mod domain;
pub mod dynamics;
pub mod error;
pub mod localization;
pub mod render;
pub mod scars;
pub mod sparse;
pub mod spectral;
pub mod walker;

pub use domain::{BilliardKind, GridGeometry, Site};
pub use dynamics::{centered_initial_state, evolve, probability_grid, ProbabilityGrid, WalkerState};
pub use error::{Error, Result};
pub use localization::{participation_ratio, PRReport};
pub use scars::{build_scar_function, default_orbit_library, overlap, PeriodicOrbit, ScarFunction};
pub use spectral::{diagonalize, fit_brody, spacing_histogram, unfold_spacings, BrodyFit, SpectralDecomposition};
pub use walker::{build_step_operator, CoinParameters, Spin, WalkOperator};
