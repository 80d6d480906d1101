//! Side-by-side summary of two finished runs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use aqw_core::{Error, Result};
use serde::Serialize;
use serde_json::Value;

use crate::config::Stage;
use crate::pipeline::{read_manifest, RunManifest};

#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub quantity: String,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub geometry_a: String,
    pub geometry_b: String,
    pub rows: Vec<Row>,
    pub scarring_a: Option<bool>,
    pub scarring_b: Option<bool>,
}

const ANALYSIS: [Stage; 3] = [Stage::Stats, Stage::Pr, Stage::Scars];

fn analysis_stages(m: &RunManifest) -> Vec<Stage> {
    ANALYSIS.iter().copied().filter(|s| m.completed.contains(s)).collect()
}

fn sidecar(dir: &Path, name: &str) -> Result<Value> {
    let text = fs::read_to_string(dir.join(name))?;
    Ok(serde_json::from_str::<Value>(&text)?["data"].clone())
}

struct Summary {
    values: Vec<(&'static str, Option<f64>)>,
    scarring: Option<bool>,
}

fn summarise(dir: &Path, stages: &[Stage]) -> Result<Summary> {
    let mut values = Vec::new();
    let mut scarring = None;
    if stages.contains(&Stage::Pr) {
        let pr = sidecar(dir, "pr_summary.json")?;
        values.push(("mean_pr", pr["mean"].as_f64()));
        values.push(("mean_pr_over_dimension", pr["mean_over_dimension"].as_f64()));
        values.push(("median_pr", pr["median"].as_f64()));
        values.push(("dimension", pr["dimension"].as_f64()));
    }
    if stages.contains(&Stage::Stats) {
        let fit = &sidecar(dir, "brody_fit.json")?["fit"];
        values.push(("brody_delta", fit["delta"].as_f64()));
        values.push(("rms_brody", fit["rms_brody"].as_f64()));
        values.push(("rms_wigner", fit["rms_wigner"].as_f64()));
        values.push(("rms_poisson", fit["rms_poisson"].as_f64()));
    }
    if stages.contains(&Stage::Scars) {
        let scars = sidecar(dir, "scars.json")?;
        scarring = scars["scarring"].as_bool();
        let best = scars["orbits"]
            .as_array()
            .into_iter()
            .flatten()
            .filter_map(|o| o["best"]["overlap"].as_f64())
            .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
        values.push(("best_scar_overlap", best));
    }
    Ok(Summary { values, scarring })
}

/// Compares the runs stored in `dir_a` and `dir_b`. Both must have completed
/// the same analysis stages.
pub fn compare(dir_a: &Path, dir_b: &Path) -> Result<Comparison> {
    let (ma, mb) = (read_manifest(dir_a)?, read_manifest(dir_b)?);
    let (sa, sb) = (analysis_stages(&ma), analysis_stages(&mb));
    if sa != sb {
        return Err(Error::Config(format!(
            "incompatible runs: {} completed {sa:?}, {} completed {sb:?}",
            ma.name, mb.name
        )));
    }
    if sa.is_empty() {
        return Err(Error::Config("neither run has completed an analysis stage".into()));
    }
    let (a, b) = (summarise(dir_a, &sa)?, summarise(dir_b, &sb)?);
    let rows = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(&(q, x), &(_, y))| Row {
            quantity: q.to_owned(),
            a: x,
            b: y,
            delta: x.zip(y).map(|(x, y)| y - x),
        })
        .collect();
    Ok(Comparison {
        a: ma.name,
        b: mb.name,
        geometry_a: ma.geometry,
        geometry_b: mb.geometry,
        rows,
        scarring_a: a.scarring,
        scarring_b: b.scarring,
    })
}

fn cell(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_owned(), |x| format!("{x:.6}"))
}

fn yes_no(x: Option<bool>) -> &'static str {
    match x {
        Some(true) => "yes",
        Some(false) => "no",
        None => "-",
    }
}

impl Comparison {
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<24} {:>18} {:>18} {:>14}", "", self.a, self.b, "delta");
        let _ = writeln!(s, "{:<24} {:>18} {:>18}", "geometry", self.geometry_a, self.geometry_b);
        for r in &self.rows {
            let _ = writeln!(s, "{:<24} {:>18} {:>18} {:>14}", r.quantity, cell(r.a), cell(r.b), cell(r.delta));
        }
        if self.scarring_a.is_some() || self.scarring_b.is_some() {
            let _ = writeln!(s, "{:<24} {:>18} {:>18}", "scarring", yes_no(self.scarring_a), yes_no(self.scarring_b));
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut s = String::from("quantity,a,b,delta\n");
        let opt = |x: Option<f64>| x.map_or(String::new(), |x| format!("{x:.17e}"));
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{}", r.quantity, opt(r.a), opt(r.b), opt(r.delta));
        }
        fs::write(path, s)?;
        Ok(())
    }
}
