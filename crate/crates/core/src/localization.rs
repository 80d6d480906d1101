//! Participation ratios of eigenstates.

use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::GridGeometry;
use crate::dynamics::ProbabilityGrid;
use crate::error::{Error, Result};
use crate::spectral::SpectralDecomposition;

/// `1 / Σ |c_i|⁴` over every site–spin component.
///
/// Vectors whose norm drifted by less than 1e-8 are renormalised first;
/// larger drifts are rejected.
pub fn participation_ratio(v: &[Complex64]) -> Result<f64> {
    let norm: f64 = v.iter().map(|c| c.norm_sqr()).sum();
    if norm == 0.0 {
        return Err(Error::Empty("zero vector"));
    }
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized(norm));
    }
    let quartic: f64 = v.iter().map(|c| c.norm_sqr().powi(2)).sum();
    Ok(norm * norm / quartic)
}

/// Maps `[0, 2π)` to `(−π, π]`.
pub fn signed_phase(theta: f64) -> f64 {
    let p = theta.rem_euclid(TAU);
    if p > PI {
        p - TAU
    } else {
        p
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PRRecord {
    pub index: usize,
    /// In `(−π, π]`.
    pub eigenphase: f64,
    pub pr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PRReport {
    pub dimension: usize,
    pub records: Vec<PRRecord>,
    pub mean: f64,
    pub median: f64,
}

impl PRReport {
    pub fn from_decomposition(d: &SpectralDecomposition) -> Result<Self> {
        let records = (0..d.len())
            .map(|j| {
                Ok(PRRecord {
                    index: j,
                    eigenphase: signed_phase(d.phases()[j]),
                    pr: participation_ratio(&d.vector(j))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_records(d.len(), records)
    }

    pub fn from_records(dimension: usize, records: Vec<PRRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Empty("participation ratio records"));
        }
        let mean = records.iter().map(|r| r.pr).sum::<f64>() / records.len() as f64;
        let mut sorted: Vec<f64> = records.iter().map(|r| r.pr).collect();
        sorted.sort_by(f64::total_cmp);
        let k = sorted.len();
        let median = if k % 2 == 1 {
            sorted[k / 2]
        } else {
            0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
        };
        Ok(PRReport {
            dimension,
            records,
            mean,
            median,
        })
    }

    /// Fraction of states with PR in `[lo, hi]`.
    pub fn fraction_in(&self, lo: f64, hi: f64) -> f64 {
        let hits = self.records.iter().filter(|r| r.pr >= lo && r.pr <= hi).count();
        hits as f64 / self.records.len() as f64
    }

    /// States inside both windows (inclusive), sorted by PR.
    pub fn select(&self, pr_range: (f64, f64), phase_range: (f64, f64)) -> Vec<PRRecord> {
        let mut out: Vec<PRRecord> = self
            .records
            .iter()
            .filter(|r| r.pr >= pr_range.0 && r.pr <= pr_range.1)
            .filter(|r| r.eigenphase >= phase_range.0 && r.eigenphase <= phase_range.1)
            .copied()
            .collect();
        out.sort_by(|a, b| a.pr.total_cmp(&b.pr).then(a.index.cmp(&b.index)));
        out
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "index,eigenphase,pr")?;
        for r in &self.records {
            writeln!(out, "{},{:.17e},{:.17e}", r.index, r.eigenphase, r.pr)?;
        }
        Ok(())
    }
}

pub fn select_states(
    d: &SpectralDecomposition,
    pr_range: (f64, f64),
    phase_range: (f64, f64),
) -> Result<Vec<PRRecord>> {
    Ok(PRReport::from_decomposition(d)?.select(pr_range, phase_range))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PRHistogram {
    pub bin_edges: Vec<f64>,
    pub density: Vec<f64>,
}

impl PRHistogram {
    pub fn integral(&self) -> f64 {
        self.density
            .iter()
            .zip(self.bin_edges.windows(2))
            .map(|(d, w)| d * (w[1] - w[0]))
            .sum()
    }

    /// Centre of the tallest bin.
    pub fn mode(&self) -> f64 {
        let (i, _) = self
            .density
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
        0.5 * (self.bin_edges[i] + self.bin_edges[i + 1])
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "bin_lo,bin_hi,density")?;
        for (i, d) in self.density.iter().enumerate() {
            writeln!(out, "{:.6},{:.6},{d:.17e}", self.bin_edges[i], self.bin_edges[i + 1])?;
        }
        Ok(())
    }
}

/// Density histogram of PR values over `[1, dimension]`.
pub fn pr_histogram(report: &PRReport, bin_count: usize) -> Result<PRHistogram> {
    if report.records.is_empty() {
        return Err(Error::Empty("participation ratio records"));
    }
    if bin_count == 0 {
        return Err(Error::config("PR histogram needs at least one bin"));
    }
    let lo = 1.0;
    let hi = (report.dimension as f64).max(1.0 + 1e-9);
    let width = (hi - lo) / bin_count as f64;
    let mut counts = vec![0usize; bin_count];
    for r in &report.records {
        let b = (((r.pr - lo) / width).floor().max(0.0) as usize).min(bin_count - 1);
        counts[b] += 1;
    }
    let norm = report.records.len() as f64 * width;
    Ok(PRHistogram {
        bin_edges: (0..=bin_count).map(|i| lo + i as f64 * width).collect(),
        density: counts.iter().map(|&c| c as f64 / norm).collect(),
    })
}

/// Per-site probability of eigenvector `index`.
pub fn eigenstate_probability(
    geometry: Arc<GridGeometry>,
    d: &SpectralDecomposition,
    index: usize,
) -> Result<ProbabilityGrid> {
    if d.len() != geometry.dimension() {
        return Err(Error::DimensionMismatch {
            expected: geometry.dimension(),
            found: d.len(),
        });
    }
    if index >= d.len() {
        return Err(Error::OutOfRange {
            what: "eigenstate index",
            value: index as i64,
            lo: 0,
            hi: d.len() as i64 - 1,
        });
    }
    ProbabilityGrid::from_amplitudes(geometry, &d.vector(index))
}
