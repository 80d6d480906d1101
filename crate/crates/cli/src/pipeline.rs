//! Stage execution and artifact output.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use aqw_core::cache::{self, CacheOutcome};
use aqw_core::dynamics::{evolve, Snapshot};
use aqw_core::localization::{pr_histogram, PRReport};
use aqw_core::render::{self, Curve, RgbImage};
use aqw_core::scars::{self, OrbitLibrary, ScarScan};
use aqw_core::spectral::{self, SpacingLaw, SpectralDecomposition};
use aqw_core::{
    build_step_operator, centered_initial_state, BilliardKind, Error, GridGeometry, Result, WalkOperator,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{RunConfig, Stage};

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug)]
pub struct Settings {
    pub output_root: PathBuf,
    pub cache_dir: PathBuf,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RunManifest {
    pub name: String,
    pub config_hash: String,
    pub tool_version: String,
    pub geometry: String,
    pub completed: Vec<Stage>,
    pub failed: Option<StageFailure>,
    pub artifacts: Vec<Artifact>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
    pub cache: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: Stage,
    pub error: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Artifact {
    pub stage: Stage,
    /// Relative to the run directory.
    pub path: String,
}

pub struct Run<'a> {
    cfg: &'a RunConfig,
    dir: PathBuf,
    hash: String,
    geometry: Arc<GridGeometry>,
    operator: WalkOperator,
    settings: &'a Settings,
    manifest: RunManifest,
    decomposition: Option<SpectralDecomposition>,
    report: Option<PRReport>,
}

/// Runs `stages` (or the configured list when empty) and writes the
/// manifest, also after a failed stage. The returned error is the first
/// stage failure.
pub fn run(cfg: &RunConfig, stages: &[Stage], settings: &Settings) -> (RunManifest, Result<()>) {
    let mut run = match Run::new(cfg, settings) {
        Ok(r) => r,
        Err(e) => return (RunManifest::default(), Err(e)),
    };
    let mut stages: Vec<Stage> = if stages.is_empty() {
        cfg.ordered_stages()
    } else {
        stages.to_vec()
    };
    stages.sort();
    stages.dedup();
    let mut result = Ok(());
    for stage in stages {
        let t = Instant::now();
        let outcome = run.stage(stage);
        run.manifest
            .timings
            .insert(format!("{stage:?}").to_lowercase(), t.elapsed().as_secs_f64());
        match outcome {
            Ok(()) => run.manifest.completed.push(stage),
            Err(e) => {
                run.manifest.failed = Some(StageFailure {
                    stage,
                    error: e.to_string(),
                });
                result = Err(e);
                break;
            }
        }
    }
    let write = run.write_json(&run.dir.join(MANIFEST), &serde_json::to_value(&run.manifest).unwrap());
    if result.is_ok() {
        result = write;
    }
    (run.manifest, result)
}

fn tag_angle(x: f64) -> String {
    format!("{x:.4}")
}

impl<'a> Run<'a> {
    fn new(cfg: &'a RunConfig, settings: &'a Settings) -> Result<Self> {
        let geometry = Arc::new(cfg.geometry()?);
        let operator = build_step_operator(geometry.clone(), cfg.coin_parameters()?)?;
        let dir = settings.output_root.join(&cfg.name);
        fs::create_dir_all(&dir)?;
        let hash = cfg.hash();
        Ok(Run {
            manifest: RunManifest {
                name: cfg.name.clone(),
                config_hash: hash.clone(),
                tool_version: env!("CARGO_PKG_VERSION").to_owned(),
                geometry: geometry.tag(),
                ..Default::default()
            },
            cfg,
            dir,
            hash,
            geometry,
            operator,
            settings,
            decomposition: None,
            report: None,
        })
    }

    fn stage(&mut self, stage: Stage) -> Result<()> {
        if stage.needs_spectrum() {
            self.ensure_spectrum()?;
        }
        match stage {
            Stage::Evolve => self.evolve(),
            Stage::Spectrum => self.spectrum(),
            Stage::Stats => self.stats(),
            Stage::Pr => self.pr(),
            Stage::Scars => self.scars(),
        }
    }

    fn record(&mut self, stage: Stage, path: &Path) {
        let rel = path.strip_prefix(&self.dir).unwrap_or(path);
        self.manifest.artifacts.push(Artifact {
            stage,
            path: rel.to_string_lossy().into_owned(),
        });
    }

    fn write_json(&self, path: &Path, value: &Value) -> Result<()> {
        let mut f = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut f, value)?;
        writeln!(f)?;
        f.flush()?;
        Ok(())
    }

    /// Writes a CSV via `body` plus a `.json` sidecar with run metadata.
    fn csv(
        &mut self,
        stage: Stage,
        name: &str,
        meta: Value,
        body: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
    ) -> Result<()> {
        let path = self.dir.join(format!("{name}.csv"));
        let mut f = BufWriter::new(File::create(&path)?);
        body(&mut f)?;
        f.flush()?;
        self.record(stage, &path);
        let sidecar = self.dir.join(format!("{name}.json"));
        self.write_json(&sidecar, &self.sidecar(stage, meta))?;
        self.record(stage, &sidecar);
        Ok(())
    }

    fn json(&mut self, stage: Stage, name: &str, meta: Value) -> Result<()> {
        let path = self.dir.join(format!("{name}.json"));
        self.write_json(&path, &self.sidecar(stage, meta))?;
        self.record(stage, &path);
        Ok(())
    }

    fn sidecar(&self, stage: Stage, meta: Value) -> Value {
        let c = self.operator.coins();
        json!({
            "run": self.cfg.name,
            "config_hash": self.hash,
            "stage": stage,
            "geometry": self.geometry.summary_without_tables(),
            "coins": { "alpha": c.alpha, "beta": c.beta, "phase": c.phase },
            "data": meta,
        })
    }

    fn png(&mut self, stage: Stage, name: &str, img: RgbImage) -> Result<()> {
        let path = self.dir.join(format!("{name}.png"));
        render::save_png(&img, &path)?;
        self.record(stage, &path);
        Ok(())
    }

    fn evolve(&mut self) -> Result<()> {
        let e = &self.cfg.evolution;
        let (m0, n0) = match e.start {
            Some([m, n]) => (m, n),
            None => (self.geometry.m_right() / 2, self.geometry.n_top() / 2),
        };
        let up = Complex64::new(e.spinor[0][0], e.spinor[0][1]);
        let down = Complex64::new(e.spinor[1][0], e.spinor[1][1]);
        let state = centered_initial_state(self.geometry.clone(), m0, n0, up, down)?;
        let ev = evolve(&state, &self.operator, e.steps, &e.snapshots, e.keep_amplitudes)?;
        let c = self.operator.coins();
        let stem = format!(
            "evolve_{}_a{}_b{}",
            self.geometry.tag(),
            tag_angle(c.alpha),
            tag_angle(c.beta)
        );
        let scale = e.pixels_per_site;
        let mut index = Vec::new();
        for Snapshot { t, grid, amplitudes } in &ev.snapshots {
            let name = format!("{stem}_t{t:04}");
            let meta = json!({ "t": t, "start": [m0, n0], "total": grid.total(), "max": grid.max_value() });
            self.csv(Stage::Evolve, &name, meta, |f| grid.write_csv(f))?;
            self.png(Stage::Evolve, &name, render::heatmap(grid, scale))?;
            if let Some(amps) = amplitudes {
                let geometry = self.geometry.clone();
                self.csv(Stage::Evolve, &format!("{name}_amplitudes"), json!({ "t": t }), |f| {
                    writeln!(f, "m,n,up_re,up_im,down_re,down_im")?;
                    for (s, site) in geometry.sites().iter().enumerate() {
                        let (u, d) = (amps[2 * s], amps[2 * s + 1]);
                        writeln!(f, "{},{},{:.17e},{:.17e},{:.17e},{:.17e}", site.m, site.n, u.re, u.im, d.re, d.im)?;
                    }
                    Ok(())
                })?;
            }
            index.push(json!({ "t": t, "file": format!("{name}.csv") }));
        }
        self.json(
            Stage::Evolve,
            "evolve",
            json!({ "steps": e.steps, "final_norm": ev.final_state.norm_sqr(), "snapshots": index }),
        )
    }

    fn ensure_spectrum(&mut self) -> Result<()> {
        if self.decomposition.is_some() {
            return Ok(());
        }
        let cap = self.cfg.spectrum.max_dimension;
        let op = &self.operator;
        let (d, outcome) = cache::load_or_compute(
            &self.settings.cache_dir,
            &op.parameter_hash(),
            || spectral::diagonalize_capped(op, cap),
            |w| eprintln!("warning: {w}"),
        )?;
        if d.len() != op.dimension() {
            return Err(Error::Numerical("cached decomposition has the wrong dimension".into()));
        }
        self.manifest.cache = Some(
            match outcome {
                CacheOutcome::Hit => "hit",
                CacheOutcome::Miss => "miss",
                CacheOutcome::Recomputed => "recomputed",
            }
            .to_owned(),
        );
        self.report = Some(PRReport::from_decomposition(&d)?);
        self.decomposition = Some(d);
        Ok(())
    }

    fn spectrum(&mut self) -> Result<()> {
        let d = self.decomposition.take().expect("spectrum loaded");
        let meta = json!({
            "dimension": d.len(),
            "max_residual": d.max_residual(),
            "parameter_hash": d.parameter_hash(),
        });
        let r = self.csv(Stage::Spectrum, "eigenphases", meta, |f| d.write_phases_csv(f));
        self.decomposition = Some(d);
        r
    }

    fn stats(&mut self) -> Result<()> {
        let d = self.decomposition.as_ref().expect("spectrum loaded");
        let s = spectral::unfold_spacings(d.phases())?;
        let h = spectral::spacing_histogram(&s, self.cfg.spectrum.bins, self.cfg.spectrum.s_max)?;
        let fit = spectral::fit_brody(&h)?;
        let meta = json!({
            "bins": h.bin_count(),
            "s_max": h.s_max(),
            "overflow": h.overflow,
            "first_bin_dominates": h.first_bin_dominates(),
            "fit": fit,
        });
        self.csv(Stage::Stats, "spacings", json!({ "count": s.len() }), |f| {
            writeln!(f, "index,s")?;
            for (i, x) in s.iter().enumerate() {
                writeln!(f, "{i},{x:.17e}")?;
            }
            Ok(())
        })?;
        self.csv(Stage::Stats, "spacing_histogram", meta.clone(), |f| h.write_csv(f))?;
        self.json(Stage::Stats, "brody_fit", meta)?;

        let brody = SpacingLaw::brody(fit.delta)?;
        let (fp, fw, fb) = (
            |x: f64| SpacingLaw::Poisson.pdf(x),
            |x: f64| SpacingLaw::Wigner.pdf(x),
            move |x: f64| brody.pdf(x),
        );
        let curves = [
            Curve { color: render::POISSON_COLOR, f: &fp },
            Curve { color: render::WIGNER_COLOR, f: &fw },
            Curve { color: render::BRODY_COLOR, f: &fb },
        ];
        let img = render::histogram_plot(&h.bin_edges, &h.density, &curves, 640, 420);
        self.png(Stage::Stats, "spacing_histogram", img)
    }

    fn pr(&mut self) -> Result<()> {
        let report = self.report.clone().expect("spectrum loaded");
        let hist = pr_histogram(&report, self.cfg.pr.bins)?;
        let [lo, hi] = self.cfg.pr.window;
        let window = report.select((lo, hi), (-std::f64::consts::PI, std::f64::consts::PI));
        let summary = json!({
            "dimension": report.dimension,
            "site_count": self.geometry.site_count(),
            "mean": report.mean,
            "median": report.median,
            "histogram_mode": hist.mode(),
            "mean_over_dimension": report.mean / report.dimension as f64,
            "window": [lo, hi],
            "window_fraction": report.fraction_in(lo, hi),
        });
        self.csv(Stage::Pr, "pr", summary.clone(), |f| report.write_csv(f))?;
        self.csv(Stage::Pr, "pr_histogram", json!({ "bins": self.cfg.pr.bins }), |f| hist.write_csv(f))?;
        self.csv(Stage::Pr, "pr_window_states", json!({ "window": [lo, hi] }), |f| {
            writeln!(f, "index,eigenphase,pr")?;
            for r in &window {
                writeln!(f, "{},{:.17e},{:.17e}", r.index, r.eigenphase, r.pr)?;
            }
            Ok(())
        })?;
        self.json(Stage::Pr, "pr_summary", summary)?;
        let img = render::histogram_plot(&hist.bin_edges, &hist.density, &[], 640, 420);
        self.png(Stage::Pr, "pr_histogram", img)
    }

    /// The orbit library to scan, and whether it was borrowed from the
    /// quarter stadium inscribed in a rectangle.
    fn scar_library(&self) -> Result<(OrbitLibrary, bool)> {
        let own = self.cfg.orbit_library(&self.geometry)?;
        if !own.orbits.is_empty() || self.geometry.kind() != BilliardKind::Rectangle {
            return Ok((own, false));
        }
        let (m, n) = (self.geometry.m_right(), self.geometry.n_top());
        if m != 2 * n {
            return Ok((own, false));
        }
        let stadium = GridGeometry::quarter_stadium(m)?;
        let borrowed = self.cfg.orbit_library(&stadium)?;
        let orbits = borrowed
            .orbits
            .iter()
            .filter_map(|o| o.transplant(&self.geometry))
            .collect();
        Ok((OrbitLibrary { orbits }, true))
    }

    fn scars(&mut self) -> Result<()> {
        let (library, transplanted) = self.scar_library()?;
        if library.orbits.is_empty() {
            eprintln!("warning: {} has no periodic-orbit library; scar scan skipped", self.geometry.tag());
        }
        let sc = &self.cfg.scars;
        let d = self.decomposition.as_ref().expect("spectrum loaded");
        let report = self.report.as_ref().expect("spectrum loaded");
        let window = (sc.pr_window[0], sc.pr_window[1]);
        let mut all: Vec<ScarScan> = Vec::new();
        let mut summary = Vec::new();
        let mut images = Vec::new();
        for orbit in &library.orbits {
            let Some(&target) = sc.k_targets.get(orbit.name()) else {
                eprintln!("warning: no wavenumber target for orbit {}; skipped", orbit.name());
                continue;
            };
            if !orbit.fits(&self.geometry) {
                return Err(Error::GeometryMismatch(format!(
                    "orbit {} leaves the {} billiard",
                    orbit.name(),
                    self.geometry.tag()
                )));
            }
            let k_target = target * sc.k_scale;
            let scans = scars::scan_orbit(
                self.geometry.clone(),
                d,
                report,
                orbit,
                k_target,
                sc.level_window,
                &sc.sigma_factors,
                window,
            )?;
            if let Some(best) = scars::best_scan(&scans) {
                let scar = scars::build_scar_function(self.geometry.clone(), orbit, best.k, best.sigma)?;
                let state = aqw_core::localization::eigenstate_probability(self.geometry.clone(), d, best.best.index)?;
                images.push((format!("scar_{}", orbit.name()), scar.probability));
                images.push((format!("eigenstate_{}_{}", orbit.name(), best.best.index), state));
                summary.push(json!({
                    "orbit": orbit.name(),
                    "length": orbit.length(),
                    "bounce_phase": orbit.bounce_phase(),
                    "k_target": k_target,
                    "k": best.k,
                    "k_published_units": best.k / sc.k_scale,
                    "n": best.n,
                    "sigma": best.sigma,
                    "best": best.best,
                    "scar": best.best.overlap >= sc.threshold,
                }));
            }
            all.extend(scans);
        }
        let scarring = !transplanted
            && summary
                .iter()
                .any(|s| s["best"]["overlap"].as_f64().unwrap_or(0.0) >= sc.threshold);
        let meta = json!({
            "pr_window": sc.pr_window,
            "threshold": sc.threshold,
            "transplanted_library": transplanted,
            "scarring": scarring,
            "orbits": summary,
        });
        self.csv(Stage::Scars, "scar_scan", meta.clone(), |f| {
            writeln!(f, "orbit,n,k,sigma,index,pr,eigenphase,overlap")?;
            for s in &all {
                writeln!(
                    f,
                    "{},{},{:.12e},{:.12e},{},{:.12e},{:.12e},{:.12e}",
                    s.orbit, s.n, s.k, s.sigma, s.best.index, s.best.pr, s.best.eigenphase, s.best.overlap
                )?;
            }
            Ok(())
        })?;
        self.json(Stage::Scars, "scars", meta)?;
        for (name, grid) in images {
            let img = render::heatmap(&grid, self.cfg.evolution.pixels_per_site);
            self.png(Stage::Scars, &name, img)?;
        }
        Ok(())
    }
}

trait SummaryExt {
    fn summary_without_tables(&self) -> Value;
}

impl SummaryExt for GridGeometry {
    fn summary_without_tables(&self) -> Value {
        json!({
            "kind": self.kind(),
            "m_right": self.m_right(),
            "n_top": self.n_top(),
            "m_arc": self.arc_start(),
            "site_count": self.site_count(),
        })
    }
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(dir.join(MANIFEST))
        .map_err(|e| Error::Config(format!("no manifest in {}: {e}", dir.display())))?;
    Ok(serde_json::from_str(&text)?)
}
