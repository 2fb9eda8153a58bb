//! ILU(0)-preconditioned restarted GMRES for complex sparse systems.

use crate::sparse::{norm2, CsrMatrix};
use crate::C64;

use super::SolverError;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Incomplete LU with the sparsity pattern of `A` (no fill, no pivoting).
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self, SolverError> {
        let n = a.n_rows;
        let mut lu = a.clone();
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            for k in lu.row_ptr[i]..lu.row_ptr[i + 1] {
                if lu.col_idx[k] == i {
                    diag[i] = k;
                }
            }
            if diag[i] == usize::MAX {
                return Err(SolverError::ZeroPivot { dof: i });
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for k in start..end {
                pos[lu.col_idx[k]] = k;
            }
            for k in start..end {
                let j = lu.col_idx[k];
                if j >= i {
                    break;
                }
                let piv = lu.values[diag[j]];
                let l = lu.values[k] / piv;
                lu.values[k] = l;
                for kk in diag[j] + 1..lu.row_ptr[j + 1] {
                    let c = lu.col_idx[kk];
                    let p = pos[c];
                    if p != usize::MAX {
                        let u = lu.values[kk];
                        lu.values[p] -= l * u;
                    }
                }
            }
            for k in start..end {
                pos[lu.col_idx[k]] = usize::MAX;
            }
            let d = lu.values[diag[i]];
            if d == ZERO || !d.re.is_finite() || !d.im.is_finite() {
                return Err(SolverError::ZeroPivot { dof: i });
            }
        }
        Ok(Ilu0 { lu, diag })
    }

    pub fn apply(&self, x: &mut [C64]) {
        let n = self.lu.n_rows;
        for i in 0..n {
            let mut s = x[i];
            for k in self.lu.row_ptr[i]..self.diag[i] {
                s -= self.lu.values[k] * x[self.lu.col_idx[k]];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in self.diag[i] + 1..self.lu.row_ptr[i + 1] {
                s -= self.lu.values[k] * x[self.lu.col_idx[k]];
            }
            x[i] = s / self.lu.values[self.diag[i]];
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterativeResult {
    pub x: Vec<C64>,
    /// Achieved `‖b − A x‖₂ / ‖b‖₂`, recomputed from the final iterate.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions {
            tol: 1e-10,
            max_iter: 1000,
            restart: 60,
        }
    }
}

fn dotc(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Right-preconditioned GMRES(m) with modified Gram–Schmidt and Givens
/// rotations. `max_iter` counts Arnoldi steps across restarts.
pub fn gmres(a: &CsrMatrix, b: &[C64], opts: GmresOptions) -> Result<IterativeResult, SolverError> {
    let n = a.n_rows;
    if b.len() != n {
        return Err(SolverError::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    if !(opts.tol > 0.0) {
        return Err(SolverError::InvalidOption("tolerance must be positive".into()));
    }
    let bnorm = norm2(b);
    let mut x = vec![ZERO; n];
    if bnorm == 0.0 {
        return Ok(IterativeResult {
            x,
            residual: 0.0,
            iterations: 0,
            converged: true,
        });
    }
    let pre = Ilu0::new(a)?;
    let m = opts.restart.max(1);
    let mut iterations = 0;
    let mut r = vec![ZERO; n];
    let mut w = vec![ZERO; n];
    let mut z = vec![ZERO; n];
    loop {
        a.matvec_into(&x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let beta = norm2(&r);
        if beta / bnorm <= opts.tol || iterations >= opts.max_iter {
            return Ok(IterativeResult {
                x,
                residual: beta / bnorm,
                iterations,
                converged: beta / bnorm <= opts.tol,
            });
        }
        let mut v: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|&ri| ri / beta).collect());
        let mut h = vec![vec![ZERO; m]; m + 1];
        let mut cs = vec![0.0f64; m];
        let mut sn = vec![ZERO; m];
        let mut g = vec![ZERO; m + 1];
        g[0] = C64::new(beta, 0.0);
        let mut k_used = 0;
        for k in 0..m {
            if iterations >= opts.max_iter {
                break;
            }
            iterations += 1;
            z.copy_from_slice(&v[k]);
            pre.apply(&mut z);
            a.matvec_into(&z, &mut w);
            for (i, vi) in v.iter().enumerate() {
                let hik = dotc(vi, &w);
                h[i][k] = hik;
                for (wj, vj) in w.iter_mut().zip(vi) {
                    *wj -= hik * vj;
                }
            }
            let hn = norm2(&w);
            h[k + 1][k] = C64::new(hn, 0.0);
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i].conj() * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let (c, s, rr) = givens(h[k][k], h[k + 1][k]);
            cs[k] = c;
            sn[k] = s;
            h[k][k] = rr;
            h[k + 1][k] = ZERO;
            g[k + 1] = -s.conj() * g[k];
            g[k] *= c;
            k_used = k + 1;
            let est = g[k + 1].norm() / bnorm;
            if hn == 0.0 || !est.is_finite() {
                if !est.is_finite() {
                    return Err(SolverError::Breakdown { iteration: iterations });
                }
                break;
            }
            if est <= opts.tol {
                break;
            }
            v.push(w.iter().map(|&wi| wi / hn).collect());
        }
        // back substitution for the Krylov coefficients
        let mut y = vec![ZERO; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            if h[i][i] == ZERO {
                return Err(SolverError::Breakdown { iteration: iterations });
            }
            y[i] = s / h[i][i];
        }
        let mut upd = vec![ZERO; n];
        for (j, yj) in y.iter().enumerate() {
            for (u, vj) in upd.iter_mut().zip(&v[j]) {
                *u += yj * vj;
            }
        }
        pre.apply(&mut upd);
        for (xi, u) in x.iter_mut().zip(&upd) {
            *xi += u;
        }
        if k_used == 0 {
            return Err(SolverError::Breakdown { iteration: iterations });
        }
    }
}

/// Complex Givens rotation zeroing `b` in `(a, b)`: returns `(c, s, r)` with
/// real `c`, `[c s; −s̄ c]·[a; b] = [r; 0]`.
fn givens(a: C64, b: C64) -> (f64, C64, C64) {
    let an = a.norm();
    let bn = b.norm();
    if bn == 0.0 {
        return (1.0, ZERO, a);
    }
    if an == 0.0 {
        return (0.0, (b.conj() / bn), C64::new(bn, 0.0));
    }
    let norm = an.hypot(bn);
    let alpha = a / an;
    let c = an / norm;
    let s = alpha * b.conj() / norm;
    (c, s, alpha * norm)
}
