//! Compressed-row complex sparse matrix, just enough for the walk operator.

use std::collections::HashMap;

use faer::Mat;
use num_complex::Complex64;

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl SparseMatrix {
    /// Square `dim × dim` matrix from `(row, col, value)` triplets. Duplicate
    /// positions are summed and exact zeros dropped.
    pub fn from_triplets<I>(dim: usize, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, Complex64)>,
    {
        let mut t: Vec<(usize, usize, Complex64)> = triplets.into_iter().collect();
        t.sort_unstable_by_key(|&(r, c, _)| (r, c));

        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(t.len());
        let mut vals: Vec<Complex64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        let mut rows = Vec::with_capacity(t.len());
        for (r, c, v) in t {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside {dim}x{dim}");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                cols.push(c);
                vals.push(v);
                last = Some((r, c));
            }
        }
        // drop exact zeros, then build the row pointer
        let mut keep_rows = Vec::with_capacity(rows.len());
        let mut keep_cols = Vec::with_capacity(rows.len());
        let mut keep_vals = Vec::with_capacity(rows.len());
        for ((r, c), v) in rows.into_iter().zip(cols).zip(vals) {
            if v != Complex64::new(0.0, 0.0) {
                keep_rows.push(r);
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for &r in &keep_rows {
            row_ptr[r + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix {
            dim,
            row_ptr,
            cols: keep_cols,
            vals: keep_vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.row(r)
            .find(|&(cc, _)| cc == c)
            .map(|(_, v)| v)
            .unwrap_or_default()
    }

    /// `out = self · input`
    pub fn mul_vec_into(&self, input: &[Complex64], out: &mut [Complex64]) {
        assert_eq!(input.len(), self.dim);
        assert_eq!(out.len(), self.dim);
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * input[self.cols[k]];
            }
            *o = acc;
        }
    }

    pub fn mul_vec(&self, input: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim];
        self.mul_vec_into(input, &mut out);
        out
    }

    /// max-entry norm of `A†A − I`, computed without densifying.
    pub fn unitarity_defect(&self) -> f64 {
        // (A†A)_{ij} = Σ_k conj(A_ki) A_kj: accumulate over pairs within each row.
        let mut gram: HashMap<(usize, usize), Complex64> = HashMap::new();
        for r in 0..self.dim {
            let entries: Vec<(usize, Complex64)> = self.row(r).collect();
            for &(i, a) in &entries {
                for &(j, b) in &entries {
                    *gram.entry((i, j)).or_default() += a.conj() * b;
                }
            }
        }
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            let d = gram.get(&(i, i)).copied().unwrap_or_default();
            worst = worst.max((d - 1.0).norm());
        }
        for (&(i, j), v) in &gram {
            if i != j {
                worst = worst.max(v.norm());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> Mat<Complex64> {
        let mut m = Mat::<Complex64>::zeros(self.dim, self.dim);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn duplicates_are_summed_and_zeros_dropped() {
        let m = SparseMatrix::from_triplets(
            3,
            vec![
                (0, 1, c(1.0, 0.0)),
                (0, 1, c(0.5, 1.0)),
                (2, 0, c(0.0, 0.0)),
                (1, 2, c(-1.0, 0.0)),
            ],
        );
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 1), c(1.5, 1.0));
        assert_eq!(m.get(2, 0), c(0.0, 0.0));
        let y = m.mul_vec(&[c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)]);
        assert_eq!(y, vec![c(3.0, 2.0), c(-3.0, 0.0), c(0.0, 0.0)]);
    }

    #[test]
    fn permutation_is_unitary() {
        let m = SparseMatrix::from_triplets(4, (0..4).map(|i| ((i + 1) % 4, i, c(1.0, 0.0))));
        assert_eq!(m.unitarity_defect(), 0.0);
        let scaled = SparseMatrix::from_triplets(2, vec![(0, 0, c(2.0, 0.0)), (1, 1, c(1.0, 0.0))]);
        assert!((scaled.unitarity_defect() - 3.0).abs() < 1e-15);
    }
}
