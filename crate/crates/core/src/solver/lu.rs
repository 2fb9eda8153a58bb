//! Multifrontal sparse LU without pivoting for structurally symmetric
//! matrices.
//!
//! The symbolic phase builds the elimination tree of the permuted pattern,
//! postorders it, and groups columns into fundamental supernodes. The numeric
//! phase assembles one dense frontal matrix per supernode from the original
//! entries and the children's update matrices (extend-add), eliminates the
//! supernode's pivots in panels, and passes the Schur complement up the tree.

use crate::sparse::CsrMatrix;
use crate::C64;

use super::SolverError;

const ZERO: C64 = C64::new(0.0, 0.0);
const PANEL: usize = 32;

/// Supernodes with fewer columns than this may absorb their parent.
const RELAX_COLS: usize = 16;

#[derive(Debug, Clone)]
struct Supernode {
    first: usize,
    ncols: usize,
    /// Row indices (new numbering) beyond the supernode's own columns.
    rows: Vec<usize>,
    /// Front columns: `m × ncols`, column-major (L11\U11 over L21).
    lcols: Vec<C64>,
    /// `ncols × (m − ncols)`, column-major (U12).
    urows: Vec<C64>,
    n_children: usize,
}

impl Supernode {
    fn m(&self) -> usize {
        self.ncols + self.rows.len()
    }
}

/// Numeric factors `P A Pᵀ = L U`.
#[derive(Debug, Clone)]
pub struct LuFactors {
    pub n: usize,
    /// `perm[new] = old`.
    pub perm: Vec<usize>,
    snodes: Vec<Supernode>,
}

impl LuFactors {
    pub fn factor_nnz(&self) -> usize {
        self.snodes
            .iter()
            .map(|s| s.lcols.len() + s.urows.len())
            .sum()
    }

    /// Real floating-point operations of the numeric factorization.
    pub fn flops(&self) -> f64 {
        let mut total = 0.0;
        for s in &self.snodes {
            let m = s.m() as f64;
            for i in 0..s.ncols {
                let r = m - i as f64 - 1.0;
                total += 8.0 * r * r + 6.0 * r;
            }
        }
        total
    }

    pub fn n_supernodes(&self) -> usize {
        self.snodes.len()
    }

    pub fn largest_front(&self) -> usize {
        self.snodes.iter().map(|s| s.m()).max().unwrap_or(0)
    }

    /// Solve `A x = b` in place (`x` holds `b` on entry).
    pub fn solve_in_place(&self, x: &mut [C64], work: &mut Vec<C64>) {
        let n = self.n;
        work.clear();
        work.extend(self.perm.iter().map(|&p| x[p]));
        let y = work.as_mut_slice();
        // forward: unit lower
        for s in &self.snodes {
            let m = s.m();
            let k = s.ncols;
            let f = s.first;
            for kk in 0..k {
                let yk = y[f + kk];
                if yk == ZERO {
                    continue;
                }
                let col = &s.lcols[kk * m..(kk + 1) * m];
                for i in kk + 1..k {
                    y[f + i] -= col[i] * yk;
                }
                for (r, &row) in s.rows.iter().enumerate() {
                    y[row] -= col[k + r] * yk;
                }
            }
        }
        // backward: upper
        for s in self.snodes.iter().rev() {
            let m = s.m();
            let k = s.ncols;
            let f = s.first;
            for (r, &row) in s.rows.iter().enumerate() {
                let xr = y[row];
                if xr == ZERO {
                    continue;
                }
                let col = &s.urows[r * k..(r + 1) * k];
                for kk in 0..k {
                    y[f + kk] -= col[kk] * xr;
                }
            }
            for kk in (0..k).rev() {
                let col = &s.lcols[kk * m..(kk + 1) * m];
                let v = y[f + kk] / col[kk];
                y[f + kk] = v;
                if v != ZERO {
                    for i in 0..kk {
                        y[f + i] -= col[i] * v;
                    }
                }
            }
        }
        for k in 0..n {
            x[self.perm[k]] = y[k];
        }
    }
}

/// Symmetrized lower pattern of `P A Pᵀ`: for each new column, sorted rows
/// strictly below the diagonal.
fn lower_pattern(a: &CsrMatrix, iperm: &[usize]) -> Vec<Vec<usize>> {
    let n = a.n_rows;
    let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
    for r in 0..n {
        let i = iperm[r];
        for &c in a.row(r).0 {
            let j = iperm[c];
            if i > j {
                cols[j].push(i);
            } else if j > i {
                cols[i].push(j);
            }
        }
    }
    for c in &mut cols {
        c.sort_unstable();
        c.dedup();
    }
    cols
}

fn etree(lower: &[Vec<usize>]) -> Vec<usize> {
    let n = lower.len();
    // upper pattern per column: rows i < k with entry (k, i)
    let mut upper: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (j, rows) in lower.iter().enumerate() {
        for &i in rows {
            upper[i].push(j);
        }
    }
    let mut parent = vec![usize::MAX; n];
    let mut ancestor = vec![usize::MAX; n];
    for k in 0..n {
        for &i0 in &upper[k] {
            let mut i = i0;
            while i != usize::MAX && i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == usize::MAX {
                    parent[i] = k;
                    break;
                }
                i = next;
            }
        }
    }
    parent
}

fn postorder(parent: &[usize]) -> Vec<usize> {
    let n = parent.len();
    let mut head = vec![usize::MAX; n];
    let mut next = vec![usize::MAX; n];
    // children lists in ascending order: insert in reverse
    for j in (0..n).rev() {
        let p = parent[j];
        if p != usize::MAX {
            next[j] = head[p];
            head[p] = j;
        }
    }
    let mut post = Vec::with_capacity(n);
    let mut stack = Vec::new();
    for root in 0..n {
        if parent[root] != usize::MAX {
            continue;
        }
        stack.push((root, head[root]));
        while let Some(&mut (v, ref mut child)) = stack.last_mut() {
            if *child == usize::MAX {
                post.push(v);
                stack.pop();
            } else {
                let c = *child;
                *child = next[c];
                stack.push((c, head[c]));
            }
        }
    }
    post
}

/// Symbolic + numeric factorization of `A` under the fill-reducing `perm`.
pub fn factorize(a: &CsrMatrix, perm: &[usize]) -> Result<LuFactors, SolverError> {
    let n = a.n_rows;
    let mut iperm = vec![0usize; n];
    for (k, &p) in perm.iter().enumerate() {
        iperm[p] = k;
    }
    // Postorder the elimination tree and fold it into the permutation.
    let lower0 = lower_pattern(a, &iperm);
    let parent0 = etree(&lower0);
    let post = postorder(&parent0);
    let perm: Vec<usize> = post.iter().map(|&k| perm[k]).collect();
    for (k, &p) in perm.iter().enumerate() {
        iperm[p] = k;
    }
    drop(lower0);
    let lower = lower_pattern(a, &iperm);
    let parent = etree(&lower);

    let mut n_children = vec![0usize; n];
    for &p in &parent {
        if p != usize::MAX {
            n_children[p] += 1;
        }
    }

    // Column structures, merged up the tree; fundamental supernodes.
    let mut pending: Vec<Option<Vec<usize>>> = vec![None; n];
    let mut child_lists: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (j, &p) in parent.iter().enumerate() {
        if p != usize::MAX {
            child_lists[p].push(j);
        }
    }
    let mut sn_first: Vec<usize> = Vec::new();
    let mut sn_struct: Vec<Vec<usize>> = Vec::new();
    let mut sn_of = vec![0usize; n];
    let mut mark = vec![usize::MAX; n];
    for j in 0..n {
        let mut s: Vec<usize> = Vec::with_capacity(lower[j].len());
        mark[j] = j;
        for &i in &lower[j] {
            if mark[i] != j {
                mark[i] = j;
                s.push(i);
            }
        }
        let mut prev_len = None;
        for &c in &child_lists[j] {
            let cs = pending[c].take().expect("child structure");
            if c + 1 == j {
                prev_len = Some(cs.len());
            }
            for &i in &cs {
                if i > j && mark[i] != j {
                    mark[i] = j;
                    s.push(i);
                }
            }
        }
        s.sort_unstable();
        let continues = j > 0
            && parent[j - 1] == j
            && n_children[j] == 1
            && prev_len == Some(s.len() + 1);
        if continues {
            sn_of[j] = sn_first.len() - 1;
        } else {
            sn_of[j] = sn_first.len();
            sn_first.push(j);
            sn_struct.push(s.clone());
        }
        if parent[j] != usize::MAX {
            pending[j] = Some(s);
        }
    }
    drop(pending);
    let nsn = sn_first.len();
    let mut sn_ncols: Vec<usize> = (0..nsn)
        .map(|s| if s + 1 < nsn { sn_first[s + 1] } else { n } - sn_first[s])
        .collect();
    let mut sn_rows: Vec<Vec<usize>> = (0..nsn)
        .map(|s| {
            let last = sn_first[s] + sn_ncols[s];
            sn_struct[s].iter().copied().filter(|&i| i >= last).collect()
        })
        .collect();
    drop(sn_struct);

    // Relaxed amalgamation: merge a small supernode into the next one when it
    // is its parent's only child and the extra structural zeros are few.
    {
        let mut keep = vec![true; nsn];
        let sn_parent = |s: usize, sn_rows: &Vec<Vec<usize>>| -> Option<usize> {
            sn_rows[s].first().map(|&r| sn_of[r])
        };
        let mut child_count = vec![0usize; nsn];
        for s in 0..nsn {
            if let Some(p) = sn_parent(s, &sn_rows) {
                child_count[p] += 1;
            }
        }
        let mut s = 0;
        let mut merged_into = vec![usize::MAX; nsn];
        while s + 1 < nsn {
            let p = s + 1;
            let is_parent = sn_parent(s, &sn_rows) == Some(p);
            if is_parent
                && child_count[p] == 1
                && sn_ncols[s] < RELAX_COLS
                && sn_ncols[p] < RELAX_COLS
            {
                // rows of merged = rows of p ∪ (rows of s beyond p's columns)
                let pf = sn_first[p];
                let pl = pf + sn_ncols[p];
                let extra = sn_rows[s].iter().filter(|&&r| r >= pl && sn_rows[p].binary_search(&r).is_err()).count();
                if extra == 0 {
                    // s's rows are p's columns plus a subset of p's rows
                    sn_first[p] = sn_first[s];
                    sn_ncols[p] += sn_ncols[s];
                    keep[s] = false;
                    merged_into[s] = p;
                    child_count[p] = child_count[s];
                }
            }
            s += 1;
        }
        let mut nf = Vec::new();
        let mut nc = Vec::new();
        let mut nr = Vec::new();
        for s in 0..nsn {
            if keep[s] {
                nf.push(sn_first[s]);
                nc.push(sn_ncols[s]);
                nr.push(std::mem::take(&mut sn_rows[s]));
            }
        }
        sn_first = nf;
        sn_ncols = nc;
        sn_rows = nr;
    }
    let nsn = sn_first.len();
    for s in 0..nsn {
        for c in sn_first[s]..sn_first[s] + sn_ncols[s] {
            sn_of[c] = s;
        }
    }
    let mut sn_nchild = vec![0usize; nsn];
    for s in 0..nsn {
        if let Some(&r) = sn_rows[s].first() {
            sn_nchild[sn_of[r]] += 1;
        }
    }

    // Permuted matrix in row and column form.
    let mut trip: Vec<(usize, usize, C64)> = Vec::with_capacity(a.nnz());
    for r in 0..n {
        let (cols, vals) = a.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            trip.push((iperm[r], iperm[c], v));
        }
    }
    trip.sort_unstable_by_key(|e| (e.0, e.1));
    let pa = CsrMatrix::from_sorted_triplets(n, n, &trip);
    drop(trip);
    let pat = pa.transpose();

    // Numeric phase.
    let mut pos = vec![usize::MAX; n];
    let mut stack: Vec<(Vec<usize>, Vec<C64>)> = Vec::new();
    let mut snodes = Vec::with_capacity(nsn);
    for s in 0..nsn {
        let f = sn_first[s];
        let k = sn_ncols[s];
        let l = f + k;
        let rows = std::mem::take(&mut sn_rows[s]);
        let m = k + rows.len();
        for i in 0..k {
            pos[f + i] = i;
        }
        for (r, &row) in rows.iter().enumerate() {
            pos[row] = k + r;
        }
        let mut front = vec![ZERO; m * m];
        for jj in 0..k {
            let j = f + jj;
            // column j, rows ≥ f
            let (rs, vs) = pat.row(j);
            let start = rs.partition_point(|&i| i < f);
            for (&i, &v) in rs[start..].iter().zip(&vs[start..]) {
                front[jj * m + pos[i]] += v;
            }
            // row j, columns beyond the supernode
            let (cs, vs) = pa.row(j);
            let start = cs.partition_point(|&c| c < l);
            for (&c, &v) in cs[start..].iter().zip(&vs[start..]) {
                front[pos[c] * m + jj] += v;
            }
        }
        for _ in 0..sn_nchild[s] {
            let (crows, upd) = stack.pop().expect("child update");
            let cm = crows.len();
            let local: Vec<usize> = crows.iter().map(|&r| pos[r]).collect();
            for (b, &lb) in local.iter().enumerate() {
                let dst = &mut front[lb * m..(lb + 1) * m];
                let src = &upd[b * cm..(b + 1) * cm];
                for (a, &la) in local.iter().enumerate() {
                    dst[la] += src[a];
                }
            }
        }
        partial_lu(&mut front, m, k).map_err(|kk| SolverError::ZeroPivot {
            dof: perm[f + kk],
        })?;
        let mu = m - k;
        let mut update = vec![ZERO; mu * mu];
        for b in 0..mu {
            update[b * mu..(b + 1) * mu].copy_from_slice(&front[(k + b) * m + k..(k + b + 1) * m]);
        }
        let mut urows = vec![ZERO; k * mu];
        for b in 0..mu {
            urows[b * k..(b + 1) * k].copy_from_slice(&front[(k + b) * m..(k + b) * m + k]);
        }
        front.truncate(m * k);
        front.shrink_to_fit();
        if mu > 0 {
            stack.push((rows.clone(), update));
        }
        for i in f..l {
            pos[i] = usize::MAX;
        }
        for &r in &rows {
            pos[r] = usize::MAX;
        }
        snodes.push(Supernode {
            first: f,
            ncols: k,
            rows,
            lcols: front,
            urows,
            n_children: sn_nchild[s],
        });
    }
    debug_assert!(stack.is_empty());
    let _ = snodes.iter().map(|s| s.n_children).sum::<usize>();
    Ok(LuFactors { n, perm, snodes })
}

/// Eliminate the first `k` pivots of the column-major `m × m` front.
/// Returns the local index of a zero or non-finite pivot.
fn partial_lu(f: &mut [C64], m: usize, k: usize) -> Result<(), usize> {
    let mut k0 = 0;
    while k0 < k {
        let k1 = (k0 + PANEL).min(k);
        // panel factorization, rows k0..m of columns k0..k1
        for kk in k0..k1 {
            let p = f[kk * m + kk];
            if p == ZERO || !p.re.is_finite() || !p.im.is_finite() {
                return Err(kk);
            }
            let inv = 1.0 / p;
            for v in &mut f[kk * m + kk + 1..(kk + 1) * m] {
                *v *= inv;
            }
            let (left, right) = f.split_at_mut((kk + 1) * m);
            let lcol = &left[kk * m..];
            for j in kk + 1..k1 {
                let col = &mut right[(j - kk - 1) * m..(j - kk) * m];
                let u = col[kk];
                if u != ZERO {
                    axpy_sub(&mut col[kk + 1..], &lcol[kk + 1..m], u);
                }
            }
        }
        if k1 < m {
            // U12 = L11⁻¹ A12 for the panel rows
            let (left, right) = f.split_at_mut(k1 * m);
            for col in right.chunks_exact_mut(m) {
                for kk in k0..k1 {
                    let u = col[kk];
                    if u != ZERO {
                        axpy_sub(&mut col[kk + 1..k1], &left[kk * m + kk + 1..kk * m + k1], u);
                    }
                }
            }
            // A22 −= L21 U12
            let rows = m - k1;
            let depth = k1 - k0;
            let base = f.as_mut_ptr() as *mut [f64; 2];
            // SAFETY: the three operands are disjoint sub-blocks of `f`
            // (columns k0..k1 rows k1..m, columns k1..m rows k0..k1, and
            // columns k1..m rows k1..m); C64 has the layout of [f64; 2].
            unsafe {
                matrixmultiply::zgemm(
                    matrixmultiply::CGemmOption::Standard,
                    matrixmultiply::CGemmOption::Standard,
                    rows,
                    depth,
                    rows,
                    [-1.0, 0.0],
                    base.add(k0 * m + k1),
                    1,
                    m as isize,
                    base.add(k1 * m + k0),
                    1,
                    m as isize,
                    [1.0, 0.0],
                    base.add(k1 * m + k1),
                    1,
                    m as isize,
                );
            }
        }
        k0 = k1;
    }
    Ok(())
}

#[inline]
fn axpy_sub(y: &mut [C64], x: &[C64], a: C64) {
    let (ar, ai) = (a.re, a.im);
    for (yv, xv) in y.iter_mut().zip(x) {
        yv.re -= xv.re * ar - xv.im * ai;
        yv.im -= xv.re * ai + xv.im * ar;
    }
}
