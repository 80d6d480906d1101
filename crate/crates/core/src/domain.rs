//! Discrete billiard domains.
//!
//! A domain is a set of integer lattice sites `(m, n)` with `0 <= m <= m_right`
//! and `0 <= n <= n_top`, cut by two shape functions: `f(m)` is the highest
//! row available in column `m`, `w(n)` is the rightmost column available in
//! row `n`. For the quarter stadium the arc is centred on `(m_arc, 0)` with
//! radius `n_top`, and both shape functions use the floor of the square root,
//! which makes `n <= f(m)` and `m <= w(n)` the same condition on every
//! integer site.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BilliardKind {
    Rectangle,
    QuarterStadium,
}

impl std::fmt::Display for BilliardKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BilliardKind::Rectangle => f.write_str("rectangle"),
            BilliardKind::QuarterStadium => f.write_str("quarter_stadium"),
        }
    }
}

impl std::str::FromStr for BilliardKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rectangle" | "rect" => Ok(BilliardKind::Rectangle),
            "quarter_stadium" | "stadium" => Ok(BilliardKind::QuarterStadium),
            other => Err(Error::config(format!("unknown billiard kind `{other}`"))),
        }
    }
}

/// A lattice site: column `m`, row `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site {
    pub m: usize,
    pub n: usize,
}

impl Site {
    pub const fn new(m: usize, n: usize) -> Self {
        Site { m, n }
    }
}

/// Immutable billiard grid with a contiguous site numbering.
///
/// Sites are enumerated row-major: `n` is the outer loop, `m` the inner one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridGeometry {
    kind: BilliardKind,
    m_right: usize,
    n_top: usize,
    m_arc: usize,
    f_table: Vec<usize>,
    w_table: Vec<usize>,
    sites: Vec<Site>,
    lookup: Vec<Option<usize>>,
}

/// JSON-friendly description of a geometry, used in run manifests.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeometrySummary {
    pub kind: BilliardKind,
    pub m_right: usize,
    pub n_top: usize,
    pub m_arc: usize,
    pub site_count: usize,
    pub f: Vec<usize>,
    pub w: Vec<usize>,
}

fn isqrt(x: usize) -> usize {
    (x as u64).isqrt() as usize
}

impl GridGeometry {
    /// Builds the grid for `kind` with rightmost column `m_right` and top row
    /// `n_top`. The quarter stadium needs `m_right` even and
    /// `n_top == m_right / 2`.
    pub fn new(kind: BilliardKind, m_right: usize, n_top: usize) -> Result<Self> {
        if m_right < 2 || n_top < 1 {
            return Err(Error::config(format!(
                "grid needs m_R >= 2 and n_U >= 1, got ({m_right}, {n_top})"
            )));
        }
        let m_arc = match kind {
            BilliardKind::Rectangle => m_right,
            BilliardKind::QuarterStadium => {
                if m_right % 2 != 0 {
                    return Err(Error::config(format!(
                        "quarter stadium needs an even m_R, got {m_right}"
                    )));
                }
                if n_top != m_right / 2 {
                    return Err(Error::config(format!(
                        "quarter stadium needs n_U = m_R / 2, got ({m_right}, {n_top})"
                    )));
                }
                m_right / 2
            }
        };

        let r2 = n_top * n_top;
        let f_table: Vec<usize> = (0..=m_right)
            .map(|m| {
                if m <= m_arc {
                    n_top
                } else {
                    let dm = m - m_arc;
                    isqrt(r2 - dm * dm)
                }
            })
            .collect();
        let w_table: Vec<usize> = (0..=n_top)
            .map(|n| match kind {
                BilliardKind::Rectangle => m_right,
                BilliardKind::QuarterStadium => m_arc + isqrt(r2 - n * n),
            })
            .collect();

        let width = m_right + 1;
        let mut lookup = vec![None; width * (n_top + 1)];
        let mut sites = Vec::new();
        for n in 0..=n_top {
            for m in 0..=w_table[n] {
                lookup[n * width + m] = Some(sites.len());
                sites.push(Site { m, n });
            }
        }

        Ok(GridGeometry {
            kind,
            m_right,
            n_top,
            m_arc,
            f_table,
            w_table,
            sites,
            lookup,
        })
    }

    pub fn rectangle(m_right: usize, n_top: usize) -> Result<Self> {
        Self::new(BilliardKind::Rectangle, m_right, n_top)
    }

    pub fn quarter_stadium(m_right: usize) -> Result<Self> {
        Self::new(BilliardKind::QuarterStadium, m_right, m_right / 2)
    }

    pub fn kind(&self) -> BilliardKind {
        self.kind
    }

    pub fn m_right(&self) -> usize {
        self.m_right
    }

    pub fn n_top(&self) -> usize {
        self.n_top
    }

    /// Column where the circular arc starts; equals `m_right` for rectangles.
    pub fn arc_start(&self) -> usize {
        self.m_arc
    }

    /// Highest row in column `m`.
    pub fn shape_f(&self, m: usize) -> Result<usize> {
        self.f_table.get(m).copied().ok_or(Error::OutOfRange {
            what: "m",
            value: m as i64,
            lo: 0,
            hi: self.m_right as i64,
        })
    }

    /// Rightmost column in row `n`.
    pub fn shape_w(&self, n: usize) -> Result<usize> {
        self.w_table.get(n).copied().ok_or(Error::OutOfRange {
            what: "n",
            value: n as i64,
            lo: 0,
            hi: self.n_top as i64,
        })
    }

    #[inline]
    pub(crate) fn f(&self, m: usize) -> usize {
        self.f_table[m]
    }

    #[inline]
    pub(crate) fn w(&self, n: usize) -> usize {
        self.w_table[n]
    }

    pub fn site_count(&self) -> usize {
        self.sites.len()
    }

    /// Size of the spin ⊗ position space.
    pub fn dimension(&self) -> usize {
        2 * self.sites.len()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn site(&self, index: usize) -> Site {
        self.sites[index]
    }

    pub fn index_of(&self, m: usize, n: usize) -> Option<usize> {
        if m > self.m_right || n > self.n_top {
            return None;
        }
        self.lookup[n * (self.m_right + 1) + m]
    }

    pub fn contains(&self, m: usize, n: usize) -> bool {
        self.index_of(m, n).is_some()
    }

    /// Continuous inside test used for orbit vertices, with `tol` slack in
    /// grid cells.
    pub fn contains_point(&self, x: f64, y: f64, tol: f64) -> bool {
        if x < -tol || y < -tol || x > self.m_right as f64 + tol || y > self.n_top as f64 + tol {
            return false;
        }
        match self.kind {
            BilliardKind::Rectangle => true,
            BilliardKind::QuarterStadium => {
                let dx = x - self.m_arc as f64;
                if dx <= 0.0 {
                    return true;
                }
                let r = self.n_top as f64;
                (dx * dx + y.max(0.0) * y.max(0.0)).sqrt() <= r + tol
            }
        }
    }

    pub fn summary(&self) -> GeometrySummary {
        GeometrySummary {
            kind: self.kind,
            m_right: self.m_right,
            n_top: self.n_top,
            m_arc: self.m_arc,
            site_count: self.sites.len(),
            f: self.f_table.clone(),
            w: self.w_table.clone(),
        }
    }

    /// Short tag used in file names, e.g. `quarter_stadium_50x25`.
    pub fn tag(&self) -> String {
        format!("{}_{}x{}", self.kind, self.m_right, self.n_top)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangle_site_count_is_inclusive() {
        let g = GridGeometry::rectangle(50, 25).unwrap();
        assert_eq!(g.site_count(), 51 * 26);
        assert_eq!(g.dimension(), 2652);
        for m in 0..=50 {
            assert_eq!(g.shape_f(m).unwrap(), 25);
        }
        for n in 0..=25 {
            assert_eq!(g.shape_w(n).unwrap(), 50);
        }
    }

    #[test]
    fn stadium_shape_values() {
        let g = GridGeometry::quarter_stadium(50).unwrap();
        assert_eq!(g.arc_start(), 25);
        assert_eq!(g.shape_f(0).unwrap(), 25);
        assert_eq!(g.shape_f(25).unwrap(), 25);
        assert_eq!(g.shape_f(40).unwrap(), 20);
        // floor(sqrt(625 - 576)) = 7
        assert_eq!(g.shape_f(49).unwrap(), 7);
        assert_eq!(g.shape_f(50).unwrap(), 0);
        assert_eq!(g.shape_w(0).unwrap(), 50);
        assert_eq!(g.shape_w(15).unwrap(), 45);
        assert_eq!(g.shape_w(25).unwrap(), 25);
    }

    #[test]
    fn stadium_site_count_frozen() {
        // Exhaustive count: sum over rows of w(n) + 1.
        let g = GridGeometry::quarter_stadium(50).unwrap();
        let brute: usize = (0..=25usize)
            .map(|n| 25 + ((625 - n * n) as f64).sqrt().floor() as usize + 1)
            .sum();
        assert_eq!(brute, 1166);
        assert_eq!(g.site_count(), 1166);
    }

    #[test]
    fn out_of_range_shape_queries() {
        let g = GridGeometry::quarter_stadium(10).unwrap();
        assert!(matches!(g.shape_f(11), Err(Error::OutOfRange { .. })));
        assert!(matches!(g.shape_w(6), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn invalid_dimensions_rejected() {
        assert!(GridGeometry::new(BilliardKind::QuarterStadium, 51, 25).is_err());
        assert!(GridGeometry::new(BilliardKind::QuarterStadium, 50, 24).is_err());
        assert!(GridGeometry::new(BilliardKind::Rectangle, 1, 3).is_err());
        assert!(GridGeometry::new(BilliardKind::Rectangle, 4, 0).is_err());
        assert!(GridGeometry::new(BilliardKind::Rectangle, 5, 3).is_ok());
    }

    #[test]
    fn duality_and_monotonicity_exhaustive() {
        for m_right in (2..=40).step_by(2) {
            let g = GridGeometry::quarter_stadium(m_right).unwrap();
            for m in 0..=m_right {
                for n in 0..=g.n_top() {
                    let by_f = n <= g.f(m);
                    let by_w = m <= g.w(n);
                    assert_eq!(by_f, by_w, "duality fails at ({m}, {n}) for m_R = {m_right}");
                    assert_eq!(by_f, g.contains(m, n));
                }
            }
            for m in g.arc_start()..m_right {
                assert!(g.f(m + 1) <= g.f(m));
            }
            for n in 0..g.n_top() {
                assert!(g.w(n + 1) <= g.w(n));
            }
        }
    }

    #[test]
    fn index_is_a_row_major_bijection() {
        let g = GridGeometry::quarter_stadium(20).unwrap();
        let mut prev: Option<Site> = None;
        for (i, s) in g.sites().iter().enumerate() {
            assert_eq!(g.index_of(s.m, s.n), Some(i));
            if let Some(p) = prev {
                assert!((p.n, p.m) < (s.n, s.m));
            }
            prev = Some(*s);
        }
        assert_eq!(g.index_of(20, 10), None);
        assert_eq!(g.index_of(99, 0), None);
    }

    #[test]
    fn summary_serialises() {
        let g = GridGeometry::quarter_stadium(10).unwrap();
        let json = serde_json::to_value(g.summary()).unwrap();
        assert_eq!(json["kind"], "quarter_stadium");
        assert_eq!(json["site_count"], g.site_count());
        assert_eq!(json["f"].as_array().unwrap().len(), 11);
    }

    #[test]
    fn kind_parses() {
        assert_eq!("stadium".parse::<BilliardKind>().unwrap(), BilliardKind::QuarterStadium);
        assert_eq!("rectangle".parse::<BilliardKind>().unwrap(), BilliardKind::Rectangle);
        assert!("sinai".parse::<BilliardKind>().is_err());
    }
}
