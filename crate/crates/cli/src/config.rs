//! Run configuration, read from TOML.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use aqw_core::scars::OrbitLibrary;
use aqw_core::{BilliardKind, CoinParameters, Error, GridGeometry, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// An angle given either as a number of radians or as text such as
/// `"pi/4"`, `"2pi/3"` or `"0.25*pi"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Angle {
    Radians(f64),
    Expr(String),
}

impl Angle {
    pub fn radians(&self) -> Result<f64> {
        match self {
            Angle::Radians(x) => Ok(*x),
            Angle::Expr(s) => parse_angle(s),
        }
    }
}

fn parse_angle(text: &str) -> Result<f64> {
    let bad = || Error::Config(format!("cannot read angle {text:?}"));
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_lowercase();
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => (a.to_owned(), b.parse::<f64>().map_err(|_| bad())?),
        None => (s.clone(), 1.0),
    };
    let coeff = match num.strip_suffix("pi") {
        Some("") => 1.0,
        Some(c) => c.trim_end_matches('*').parse::<f64>().map_err(|_| bad())?,
        None => return num.parse::<f64>().map(|x| x / den).map_err(|_| bad()),
    };
    if den == 0.0 {
        return Err(bad());
    }
    Ok(coeff * PI / den)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub kind: BilliardKind,
    pub m_right: usize,
    pub n_top: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoinConfig {
    pub alpha: Angle,
    pub beta: Angle,
    #[serde(default = "default_phase")]
    pub phase: Angle,
}

fn default_phase() -> Angle {
    Angle::Expr("pi/4".into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionConfig {
    /// Start site; defaults to the centre `(m_R/2, n_U/2)`.
    pub start: Option<[usize; 2]>,
    pub steps: usize,
    pub snapshots: Vec<usize>,
    /// Spinor `(up, down)` as `[re, im]` pairs.
    pub spinor: [[f64; 2]; 2],
    pub keep_amplitudes: bool,
    pub pixels_per_site: u32,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        let a = std::f64::consts::FRAC_1_SQRT_2;
        EvolutionConfig {
            start: None,
            steps: 232,
            snapshots: vec![38, 76, 152, 232],
            spinor: [[a, 0.0], [0.0, a]],
            keep_amplitudes: false,
            pixels_per_site: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    pub bins: usize,
    pub s_max: f64,
    pub max_dimension: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            bins: aqw_core::spectral::DEFAULT_BIN_COUNT,
            s_max: aqw_core::spectral::DEFAULT_S_MAX,
            max_dimension: aqw_core::spectral::DEFAULT_MAX_DIMENSION,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrConfig {
    pub bins: usize,
    /// Window for the intermediate-PR state search.
    pub window: [f64; 2],
}

impl Default for PrConfig {
    fn default() -> Self {
        PrConfig {
            bins: 50,
            window: [600.0, 950.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScarConfig {
    /// Orbit library (TOML or JSON); the built-in library when absent.
    pub orbit_file: Option<PathBuf>,
    /// Target wavenumbers per orbit name, in the units of `k_scale`.
    pub k_targets: BTreeMap<String, f64>,
    /// Multiplies `k_targets` to give inverse grid cells.
    pub k_scale: f64,
    /// Levels scanned on each side of the level nearest the target.
    pub level_window: u32,
    /// Widths scanned, as multiples of `1/√k`.
    pub sigma_factors: Vec<f64>,
    pub pr_window: [f64; 2],
    /// Overlap above which a candidate counts as a scar.
    pub threshold: f64,
}

impl Default for ScarConfig {
    fn default() -> Self {
        let k_targets = [
            ("bouncing_ball", 16.5027),
            ("rectangular", 29.2790),
            ("whispering_gallery", 29.7930),
            ("bow_tie", 27.8116),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_owned(), v))
        .collect();
        ScarConfig {
            orbit_file: None,
            k_targets,
            k_scale: 1.0 / 25.0,
            level_window: 3,
            sigma_factors: vec![0.75, 1.0, 1.25],
            pr_window: [600.0, 950.0],
            threshold: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Evolve,
    Spectrum,
    Stats,
    Pr,
    Scars,
}

impl Stage {
    pub fn needs_spectrum(self) -> bool {
        !matches!(self, Stage::Evolve)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub geometry: GeometryConfig,
    pub coins: CoinConfig,
    #[serde(default = "default_stages")]
    pub stages: Vec<Stage>,
    #[serde(default)]
    pub evolution: EvolutionConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub pr: PrConfig,
    #[serde(default)]
    pub scars: ScarConfig,
    /// Seed for the randomised self-test.
    #[serde(default)]
    pub seed: u64,
    /// Output root; the `--output` flag takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Eigendecomposition cache; the `--cache-dir` flag takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
}

fn default_stages() -> Vec<Stage> {
    vec![Stage::Spectrum, Stage::Stats, Stage::Pr, Stage::Scars]
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        // orbit files are resolved relative to the config file
        if let Some(orbits) = &cfg.scars.orbit_file {
            if orbits.is_relative() {
                cfg.scars.orbit_file = Some(path.parent().unwrap_or(Path::new(".")).join(orbits));
            }
        }
        let base = path.parent().unwrap_or(Path::new("."));
        for dir in [&mut cfg.output_dir, &mut cfg.cache_dir].into_iter().flatten() {
            if dir.is_relative() {
                *dir = base.join(&*dir);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::Config(format!("run name {:?} must be a plain file name", self.name)));
        }
        self.geometry()?;
        self.coin_parameters()?;
        let mut seen = self.stages.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.stages.len() {
            return Err(Error::Config("stage list contains duplicates".into()));
        }
        let e = &self.evolution;
        if e.snapshots.windows(2).any(|w| w[0] > w[1]) || e.snapshots.last().is_some_and(|&t| t > e.steps) {
            return Err(Error::Config("snapshot times must be sorted and not exceed the step count".into()));
        }
        if self.spectrum.bins < 5 || !(self.spectrum.s_max > 0.0) {
            return Err(Error::Config("spectrum needs at least 5 bins and s_max > 0".into()));
        }
        if self.pr.bins == 0 || self.pr.window[0] > self.pr.window[1] {
            return Err(Error::Config("invalid PR histogram settings".into()));
        }
        let s = &self.scars;
        if s.sigma_factors.is_empty() || s.sigma_factors.iter().any(|&f| !(f > 0.0)) {
            return Err(Error::Config("sigma factors must be positive".into()));
        }
        if !(s.k_scale > 0.0) || s.k_targets.values().any(|&k| !(k > 0.0)) {
            return Err(Error::Config("wavenumber targets and scale must be positive".into()));
        }
        if let Some(path) = &s.orbit_file {
            if !path.exists() {
                return Err(Error::Config(format!("orbit file {} does not exist", path.display())));
            }
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<GridGeometry> {
        GridGeometry::new(self.geometry.kind, self.geometry.m_right, self.geometry.n_top)
    }

    pub fn coin_parameters(&self) -> Result<CoinParameters> {
        CoinParameters::with_phase(
            self.coins.alpha.radians()?,
            self.coins.beta.radians()?,
            self.coins.phase.radians()?,
        )
    }

    pub fn orbit_library(&self, geometry: &GridGeometry) -> Result<OrbitLibrary> {
        match &self.scars.orbit_file {
            None => Ok(OrbitLibrary {
                orbits: aqw_core::default_orbit_library(geometry),
            }),
            Some(path) => load_orbits(path),
        }
    }

    /// SHA-256 over the canonical JSON form of the configuration. Where the
    /// results are written does not change the hash.
    pub fn hash(&self) -> String {
        let mut cfg = self.clone();
        cfg.output_dir = None;
        cfg.cache_dir = None;
        let json = serde_json::to_string(&cfg).expect("config serialises");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// Stages in execution order.
    pub fn ordered_stages(&self) -> Vec<Stage> {
        let mut s = self.stages.clone();
        s.sort();
        s
    }
}

pub fn load_orbits(path: &Path) -> Result<OrbitLibrary> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let lib = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => OrbitLibrary::from_json(&text),
        _ => toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display()))),
    }?;
    Ok(lib)
}
