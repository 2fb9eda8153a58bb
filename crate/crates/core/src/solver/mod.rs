//! Global system construction, direct factorization and iterative solves.
//!
//! The direct path orders the unknowns by nested dissection over mesh nodes
//! (all dofs of a node stay together), factorizes once with the multifrontal
//! LU of [`lu`] and then serves any number of right-hand sides. Solves
//! finish with iterative refinement against the original matrix and report
//! the achieved relative residual.

pub mod gmres;
pub mod lu;
pub mod ordering;

use thiserror::Error;

use crate::assembly::BlockSystem;
use crate::mesh::ConductorIndexMap;
use crate::sparse::{norm2, CsrMatrix, SparseComplexBlock};
use crate::C64;

pub use gmres::{gmres, GmresOptions, Ilu0, IterativeResult};

/// Relative residual every accepted direct solve must reach.
pub const DIRECT_TOLERANCE: f64 = 1e-10;

const MAX_REFINEMENT: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("zero pivot at dof {dof}: matrix is singular")]
    ZeroPivot { dof: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("block shapes are inconsistent: {0}")]
    BlockShape(String),
    #[error("GMRES breakdown at iteration {iteration}")]
    Breakdown { iteration: usize },
    #[error("relative residual {residual:e} above {tolerance:e} after refinement")]
    Residual { residual: f64, tolerance: f64 },
    #[error("invalid solver option: {0}")]
    InvalidOption(String),
}

/// Assemble `[[M11, M12], [M21, M22]]` into one CSR matrix.
pub fn build_global(sys: &BlockSystem) -> Result<CsrMatrix, SolverError> {
    let na = 3 * sys.n_nodes;
    let nv = sys.n_conductor;
    let b = &sys.blocks;
    let check = |blk: &SparseComplexBlock, m: usize, n: usize, name: &str| {
        if blk.shape() != (m, n) {
            Err(SolverError::BlockShape(format!(
                "{name} is {:?}, expected {:?}",
                blk.shape(),
                (m, n)
            )))
        } else {
            Ok(())
        }
    };
    check(&b.m11, na, na, "M11")?;
    check(&b.m12, na, nv, "M12")?;
    check(&b.m21, nv, na, "M21")?;
    check(&b.m22, nv, nv, "M22")?;
    let parts = [
        (&b.m11, 0, 0),
        (&b.m12, 0, na),
        (&b.m21, na, 0),
        (&b.m22, na, na),
    ];
    let mut t = Vec::with_capacity(parts.iter().map(|p| p.0.nnz()).sum());
    for (blk, ro, co) in parts {
        let mut blk = blk.clone();
        blk.canonicalize();
        t.extend(blk.triplets.iter().map(|&(i, j, v)| (i + ro, j + co, v)));
    }
    t.sort_unstable_by_key(|e| (e.0, e.1));
    Ok(CsrMatrix::from_sorted_triplets(na + nv, na + nv, &t))
}

/// Node index of every global dof, for node-blocked ordering.
pub fn dof_groups(n_nodes: usize, cmap: &ConductorIndexMap) -> Vec<usize> {
    let mut g = Vec::with_capacity(3 * n_nodes + cmap.len());
    for n in 0..n_nodes {
        g.extend([n, n, n]);
    }
    g.extend(cmap.nodes().iter().copied());
    g
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub x: Vec<C64>,
    pub residual: f64,
    pub refinements: usize,
}

/// Reusable factorization; immutable and shareable across threads.
#[derive(Debug, Clone)]
pub struct Factorization {
    matrix: CsrMatrix,
    factors: lu::LuFactors,
}

impl Factorization {
    pub fn n(&self) -> usize {
        self.matrix.n_rows
    }

    pub fn factor_nnz(&self) -> usize {
        self.factors.factor_nnz()
    }

    pub fn largest_front(&self) -> usize {
        self.factors.largest_front()
    }

    pub fn flops(&self) -> f64 {
        self.factors.flops()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn permutation(&self) -> &[usize] {
        &self.factors.perm
    }

    /// One forward/backward substitution, no refinement.
    pub fn backsolve(&self, b: &[C64]) -> Vec<C64> {
        let mut x = b.to_vec();
        self.factors.solve_in_place(&mut x, &mut Vec::new());
        x
    }

    /// Solve with iterative refinement until the relative residual is at
    /// most [`DIRECT_TOLERANCE`].
    pub fn solve(&self, b: &[C64]) -> Result<SolveReport, SolverError> {
        let n = self.n();
        if b.len() != n {
            return Err(SolverError::DimensionMismatch {
                expected: n,
                got: b.len(),
            });
        }
        let bn = norm2(b);
        if bn == 0.0 {
            return Ok(SolveReport {
                x: vec![C64::new(0.0, 0.0); n],
                residual: 0.0,
                refinements: 0,
            });
        }
        let mut work = Vec::with_capacity(n);
        let mut x = b.to_vec();
        self.factors.solve_in_place(&mut x, &mut work);
        let mut r = vec![C64::new(0.0, 0.0); n];
        let mut refinements = 0;
        loop {
            self.matrix.matvec_into(&x, &mut r);
            for (ri, bi) in r.iter_mut().zip(b) {
                *ri = bi - *ri;
            }
            let res = norm2(&r) / bn;
            if res <= DIRECT_TOLERANCE {
                return Ok(SolveReport {
                    x,
                    residual: res,
                    refinements,
                });
            }
            if refinements == MAX_REFINEMENT || !res.is_finite() {
                return Err(SolverError::Residual {
                    residual: res,
                    tolerance: DIRECT_TOLERANCE,
                });
            }
            self.factors.solve_in_place(&mut r, &mut work);
            for (xi, di) in x.iter_mut().zip(&r) {
                *xi += di;
            }
            refinements += 1;
        }
    }
}

/// Factorize with a nested-dissection ordering over `groups` (dof → group
/// id); `None` orders every dof individually.
pub fn factorize(a: &CsrMatrix, groups: Option<&[usize]>) -> Result<Factorization, SolverError> {
    factorize_with(a, groups, None)
}

/// As [`factorize`], with one position per group enabling geometric
/// separators.
pub fn factorize_with(
    a: &CsrMatrix,
    groups: Option<&[usize]>,
    coords: Option<&[[f64; 3]]>,
) -> Result<Factorization, SolverError> {
    if a.n_rows != a.n_cols {
        return Err(SolverError::DimensionMismatch {
            expected: a.n_rows,
            got: a.n_cols,
        });
    }
    let n = a.n_rows;
    let identity: Vec<usize>;
    let group_of = match groups {
        Some(g) => {
            if g.len() != n {
                return Err(SolverError::DimensionMismatch {
                    expected: n,
                    got: g.len(),
                });
            }
            g
        }
        None => {
            identity = (0..n).collect();
            &identity
        }
    };
    let n_groups = group_of.iter().copied().max().map_or(0, |m| m + 1);
    let graph = ordering::pattern_graph(a, group_of, n_groups);
    let order = match coords {
        Some(c) if c.len() == n_groups => ordering::nested_dissection_geometric(&graph, c),
        Some(c) => {
            return Err(SolverError::DimensionMismatch {
                expected: n_groups,
                got: c.len(),
            })
        }
        None => ordering::nested_dissection(&graph),
    };
    let perm = ordering::expand_groups(&order, group_of);
    let factors = lu::factorize(a, &perm)?;
    Ok(Factorization {
        matrix: a.clone(),
        factors,
    })
}

/// ILU(0)-GMRES solve; reports rather than fails on non-convergence.
pub fn solve_iterative(
    a: &CsrMatrix,
    b: &[C64],
    opts: GmresOptions,
) -> Result<IterativeResult, SolverError> {
    gmres(a, b, opts)
}
