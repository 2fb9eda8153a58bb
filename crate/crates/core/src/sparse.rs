//! Coordinate-format complex blocks and compressed-row matrices.

use std::fmt::Write as _;
use std::path::Path;

use crate::C64;

/// Index space of a block dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DofSpace {
    /// Three vector-potential components per mesh node.
    A { n_nodes: usize },
    /// One scalar-potential dof per conductor node.
    V { n_conductor: usize },
}

impl DofSpace {
    pub fn size(self) -> usize {
        match self {
            DofSpace::A { n_nodes } => 3 * n_nodes,
            DofSpace::V { n_conductor } => n_conductor,
        }
    }
}

/// Triplet matrix over fixed row/column spaces.
///
/// Duplicates are allowed until [`SparseComplexBlock::canonicalize`], which
/// sorts by `(row, col)` and sums duplicates in insertion order, so the
/// result depends only on the order triplets were pushed.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseComplexBlock {
    pub rows: DofSpace,
    pub cols: DofSpace,
    pub triplets: Vec<(usize, usize, C64)>,
    canonical: bool,
}

impl SparseComplexBlock {
    pub fn new(rows: DofSpace, cols: DofSpace) -> Self {
        SparseComplexBlock {
            rows,
            cols,
            triplets: Vec::new(),
            canonical: true,
        }
    }

    pub fn with_capacity(rows: DofSpace, cols: DofSpace, cap: usize) -> Self {
        SparseComplexBlock {
            triplets: Vec::with_capacity(cap),
            ..Self::new(rows, cols)
        }
    }

    #[inline]
    pub fn push(&mut self, i: usize, j: usize, v: C64) {
        debug_assert!(i < self.rows.size() && j < self.cols.size());
        self.triplets.push((i, j, v));
        self.canonical = false;
    }

    pub fn nnz(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    pub fn is_canonical(&self) -> bool {
        self.canonical
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows.size(), self.cols.size())
    }

    /// Sort by `(row, col)` and merge duplicates.
    pub fn canonicalize(&mut self) {
        if self.canonical {
            return;
        }
        let n = self.rows.size();
        let mut start = vec![0usize; n + 1];
        for &(i, _, _) in &self.triplets {
            start[i + 1] += 1;
        }
        for i in 0..n {
            start[i + 1] += start[i];
        }
        let mut fill = start.clone();
        let mut sorted = vec![(0usize, C64::new(0.0, 0.0)); self.triplets.len()];
        for &(i, j, v) in &self.triplets {
            sorted[fill[i]] = (j, v);
            fill[i] += 1;
        }
        let mut out = Vec::with_capacity(self.triplets.len());
        for i in 0..n {
            let row = &mut sorted[start[i]..start[i + 1]];
            // stable: duplicates keep insertion order for summation
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let j = row[k].0;
                let mut v = row[k].1;
                k += 1;
                while k < row.len() && row[k].0 == j {
                    v += row[k].1;
                    k += 1;
                }
                out.push((i, j, v));
            }
        }
        self.triplets = out;
        self.canonical = true;
    }

    pub fn canonicalized(mut self) -> Self {
        self.canonicalize();
        self
    }

    pub fn transpose(&self) -> Self {
        let mut t = SparseComplexBlock::with_capacity(self.cols, self.rows, self.nnz());
        for &(i, j, v) in &self.triplets {
            t.push(j, i, v);
        }
        t.canonicalized()
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut c = self.clone();
        c.canonicalize();
        c.triplets.iter().map(|e| e.2.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `‖self − other‖_F`, merging both patterns.
    pub fn frobenius_diff(&self, other: &Self) -> f64 {
        let mut d = self.clone();
        d.canonical = false;
        for &(i, j, v) in &other.triplets {
            d.triplets.push((i, j, -v));
        }
        d.canonicalize();
        d.triplets.iter().map(|e| e.2.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `y = self · x`.
    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.rows.size()];
        for &(i, j, v) in &self.triplets {
            y[i] += v * x[j];
        }
        y
    }

    pub fn to_dense(&self) -> Vec<Vec<C64>> {
        let (m, n) = self.shape();
        let mut d = vec![vec![C64::new(0.0, 0.0); n]; m];
        for &(i, j, v) in &self.triplets {
            d[i][j] += v;
        }
        d
    }

    /// Coordinate text: `i j re im` per line, 0-based, sorted.
    pub fn to_coordinate_text(&self) -> String {
        let mut c = self.clone();
        c.canonicalize();
        let mut s = String::with_capacity(48 * c.nnz());
        for &(i, j, v) in &c.triplets {
            let _ = writeln!(s, "{i} {j} {:.17e} {:.17e}", v.re, v.im);
        }
        s
    }

    pub fn write_coordinate(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_coordinate_text())
    }
}

/// Compressed sparse row matrix with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<C64>,
}

impl CsrMatrix {
    pub fn from_canonical(block: &SparseComplexBlock) -> Self {
        assert!(block.is_canonical(), "block must be canonical");
        let (m, n) = block.shape();
        Self::from_sorted_triplets(m, n, &block.triplets)
    }

    /// Triplets must be sorted by `(row, col)` without duplicates.
    pub fn from_sorted_triplets(m: usize, n: usize, triplets: &[(usize, usize, C64)]) -> Self {
        let mut row_ptr = vec![0usize; m + 1];
        for &(i, _, _) in triplets {
            row_ptr[i + 1] += 1;
        }
        for i in 0..m {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n_rows: m,
            n_cols: n,
            row_ptr,
            col_idx: triplets.iter().map(|e| e.1).collect(),
            values: triplets.iter().map(|e| e.2).collect(),
        }
    }

    pub fn from_dense(d: &[Vec<C64>]) -> Self {
        let m = d.len();
        let n = d.first().map_or(0, |r| r.len());
        let mut t = Vec::new();
        for (i, row) in d.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != C64::new(0.0, 0.0) {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_sorted_triplets(m, n, &t)
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, C64::new(1.0, 0.0))).collect();
        Self::from_sorted_triplets(n, n, &t)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[C64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn matvec_into(&self, x: &[C64], y: &mut [C64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n_rows) {
            let mut s = C64::new(0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.n_rows];
        self.matvec_into(x, &mut y);
        y
    }

    /// `‖b − A x‖₂ / ‖b‖₂` (absolute residual when `b = 0`).
    pub fn relative_residual(&self, x: &[C64], b: &[C64]) -> f64 {
        let ax = self.matvec(x);
        let r = ax
            .iter()
            .zip(b)
            .map(|(a, b)| (b - a).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let nb = norm2(b);
        if nb > 0.0 {
            r / nb
        } else {
            r
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.n_rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                t.push((self.col_idx[k], i, self.values[k]));
            }
        }
        t.sort_by_key(|e| (e.0, e.1));
        Self::from_sorted_triplets(self.n_cols, self.n_rows, &t)
    }

    pub fn to_dense(&self) -> Vec<Vec<C64>> {
        let mut d = vec![vec![C64::new(0.0, 0.0); self.n_cols]; self.n_rows];
        for i in 0..self.n_rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                d[i][self.col_idx[k]] = self.values[k];
            }
        }
        d
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn to_coordinate_text(&self) -> String {
        let mut s = String::with_capacity(48 * self.nnz());
        for i in 0..self.n_rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let v = self.values[k];
                let _ = writeln!(s, "{i} {} {:.17e} {:.17e}", self.col_idx[k], v.re, v.im);
            }
        }
        s
    }
}

pub fn norm2(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn canonicalize_sums_duplicates() {
        let s = DofSpace::V { n_conductor: 3 };
        let mut b = SparseComplexBlock::new(s, s);
        b.push(2, 1, c(1.0));
        b.push(0, 2, c(2.0));
        b.push(2, 1, c(3.0));
        b.push(0, 0, c(4.0));
        b.canonicalize();
        assert_eq!(
            b.triplets,
            vec![(0, 0, c(4.0)), (0, 2, c(2.0)), (2, 1, c(4.0))]
        );
    }

    #[test]
    fn csr_matvec_and_transpose() {
        let d = vec![
            vec![c(1.0), c(0.0), c(2.0)],
            vec![c(0.0), c(3.0), c(0.0)],
        ];
        let a = CsrMatrix::from_dense(&d);
        let y = a.matvec(&[c(1.0), c(1.0), c(1.0)]);
        assert_eq!(y, vec![c(3.0), c(3.0)]);
        let t = a.transpose();
        assert_eq!(t.get(2, 0), c(2.0));
        assert_eq!(t.n_rows, 3);
    }
}
