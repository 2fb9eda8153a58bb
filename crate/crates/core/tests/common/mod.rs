//! Independent oracles and fixtures shared by the integration tests and the
//! acceptance harness.
#![allow(dead_code)]

use ectfem::assembly::{Blocks, Material, MaterialTable, L22Sigma, PhysicsParams};
use ectfem::config::RunConfig;
use ectfem::element::ElementMatrix;
use ectfem::mesh::{Mesh, Point, Region};
use ectfem::sparse::SparseComplexBlock;
use ectfem::C64;
use nalgebra::{Matrix2, Matrix3, Vector3};
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// A positively oriented tetrahedron with vertices in the unit box and no
/// sliver shape.
pub fn random_tet(r: &mut StdRng) -> [Point; 4] {
    loop {
        let mut p = [[0.0; 3]; 4];
        for q in &mut p {
            *q = [r.random::<f64>(), r.random::<f64>(), r.random::<f64>()];
        }
        let v = ectfem::mesh::signed_volume(p);
        let e = [sub(p[1], p[0]), sub(p[2], p[0]), sub(p[3], p[0])].map(|x| Vector3::from(x).norm());
        if 6.0 * v.abs() > 0.05 * e[0] * e[1] * e[2] {
            if v < 0.0 {
                p.swap(2, 3);
            }
            return p;
        }
    }
}

pub fn random_tri(r: &mut StdRng) -> [Point; 3] {
    loop {
        let mut p = [[0.0; 3]; 3];
        for q in &mut p {
            *q = [r.random::<f64>(), r.random::<f64>(), r.random::<f64>()];
        }
        let a = sub(p[1], p[0]);
        let b = sub(p[2], p[0]);
        let (a, b) = (Vector3::from(a), Vector3::from(b));
        if a.cross(&b).norm() > 0.1 * a.norm() * b.norm() {
            return p;
        }
    }
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Barycentric gradients from the inverse Jacobian, computed with nalgebra.
pub fn tet_gradients(p: [Point; 4]) -> ([Vector3<f64>; 4], f64) {
    let j = Matrix3::from_columns(&[
        Vector3::from(sub(p[1], p[0])),
        Vector3::from(sub(p[2], p[0])),
        Vector3::from(sub(p[3], p[0])),
    ]);
    let vol = j.determinant() / 6.0;
    let inv = j.try_inverse().expect("non-degenerate");
    let g1 = inv.row(0).transpose();
    let g2 = inv.row(1).transpose();
    let g3 = inv.row(2).transpose();
    ([-(g1 + g2 + g3), g1, g2, g3], vol)
}

/// Degree-2 four-point rule on the reference tetrahedron: barycentric
/// points, weights summing to 1.
pub fn tet_rule() -> [([f64; 4], f64); 4] {
    let a = 0.585_410_196_624_968_5;
    let b = 0.138_196_601_125_010_5;
    [
        ([a, b, b, b], 0.25),
        ([b, a, b, b], 0.25),
        ([b, b, a, b], 0.25),
        ([b, b, b, a], 0.25),
    ]
}

/// Degree-2 three-point rule on a triangle.
pub fn tri_rule() -> [([f64; 3], f64); 3] {
    let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
    [([a, b, b], 1.0 / 3.0), ([b, a, b], 1.0 / 3.0), ([b, b, a], 1.0 / 3.0)]
}

fn unit(c: usize) -> Vector3<f64> {
    let mut e = Vector3::zeros();
    e[c] = 1.0;
    e
}

/// A–A block by quadrature of `(1/μ) curl Φ·curl Ψ + (1/μ̃) div Φ div Ψ
/// − iωσ Φ·Ψ` with `Φ = λ_b e_d` (trial) and `Ψ = λ_a e_c` (test).
pub fn oracle_l11(p: [Point; 4], mu: f64, mu_tilde: f64, sigma: f64, omega: f64) -> ElementMatrix<12, 12> {
    let (g, vol) = tet_gradients(p);
    let mut m = ElementMatrix::<12, 12>::zeros();
    for (lam, w) in tet_rule() {
        for a in 0..4 {
            for c in 0..3 {
                for b in 0..4 {
                    for d in 0..3 {
                        let curl_t = g[a].cross(&unit(c));
                        let curl_s = g[b].cross(&unit(d));
                        let div_t = g[a][c];
                        let div_s = g[b][d];
                        let mass = lam[a] * lam[b] * if c == d { 1.0 } else { 0.0 };
                        let v = C64::new(curl_t.dot(&curl_s) / mu + div_t * div_s / mu_tilde, -omega * sigma * mass);
                        m.data[3 * a + c][3 * b + d] += v * (w * vol);
                    }
                }
            }
        }
    }
    m
}

/// `−σ ∫ ∇λ_b · (λ_a e_c)`.
pub fn oracle_l12(p: [Point; 4], sigma: f64) -> ElementMatrix<12, 4> {
    let (g, vol) = tet_gradients(p);
    let mut m = ElementMatrix::<12, 4>::zeros();
    for (lam, w) in tet_rule() {
        for a in 0..4 {
            for c in 0..3 {
                for b in 0..4 {
                    m.data[3 * a + c][b] += C64::new(-sigma * g[b].dot(&(unit(c) * lam[a])) * w * vol, 0.0);
                }
            }
        }
    }
    m
}

/// `−σ ∫ (λ_b e_d) · ∇λ_a`.
pub fn oracle_l21(p: [Point; 4], sigma: f64) -> ElementMatrix<4, 12> {
    let (g, vol) = tet_gradients(p);
    let mut m = ElementMatrix::<4, 12>::zeros();
    for (lam, w) in tet_rule() {
        for a in 0..4 {
            for b in 0..4 {
                for d in 0..3 {
                    m.data[a][3 * b + d] += C64::new(-sigma * (unit(d) * lam[b]).dot(&g[a]) * w * vol, 0.0);
                }
            }
        }
    }
    m
}

/// `−(1/iω) σ_s ∫ ∇λ_b·∇λ_a + δ μ σ ∫ λ_a λ_b`.
pub fn oracle_l22(p: [Point; 4], sigma_s: f64, sigma: f64, omega: f64, delta: f64, mu: f64) -> ElementMatrix<4, 4> {
    let (g, vol) = tet_gradients(p);
    let mut m = ElementMatrix::<4, 4>::zeros();
    let k = -1.0 / C64::new(0.0, omega);
    for (lam, w) in tet_rule() {
        for a in 0..4 {
            for b in 0..4 {
                let v = k * (sigma_s * g[a].dot(&g[b])) + delta * mu * sigma * lam[a] * lam[b];
                m.data[a][b] += v * (w * vol);
            }
        }
    }
    m
}

/// Tangential barycentric gradients from the pseudo-inverse of the edge
/// matrix.
pub fn tri_gradients(p: [Point; 3]) -> ([Vector3<f64>; 3], f64, Vector3<f64>) {
    let e1 = Vector3::from(sub(p[1], p[0]));
    let e2 = Vector3::from(sub(p[2], p[0]));
    let gram = Matrix2::new(e1.dot(&e1), e1.dot(&e2), e2.dot(&e1), e2.dot(&e2));
    let inv = gram.try_inverse().expect("non-degenerate");
    let g1 = e1 * inv[(0, 0)] + e2 * inv[(0, 1)];
    let g2 = e1 * inv[(1, 0)] + e2 * inv[(1, 1)];
    let n = e1.cross(&e2);
    let area = 0.5 * n.norm();
    ([-(g1 + g2), g1, g2], area, n.normalize())
}

/// Surface impedance blocks by quadrature of `−(1/Z) (iω A_τ + ∇_τ V)`
/// paired with `Ψ_τ` and `∇_τ φ`.
pub fn oracle_ibc(
    p: [Point; 3],
    z: C64,
    omega: f64,
) -> (ElementMatrix<9, 9>, ElementMatrix<9, 3>, ElementMatrix<3, 9>, ElementMatrix<3, 3>) {
    let (g, area, n) = tri_gradients(p);
    let tang = |v: Vector3<f64>| v - n * n.dot(&v);
    let iw = C64::new(0.0, omega);
    let mut aa = ElementMatrix::<9, 9>::zeros();
    let mut av = ElementMatrix::<9, 3>::zeros();
    let mut va = ElementMatrix::<3, 9>::zeros();
    let mut vv = ElementMatrix::<3, 3>::zeros();
    for (lam, w) in tri_rule() {
        let s = w * area;
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    let test = tang(unit(c) * lam[a]);
                    for d in 0..3 {
                        let trial = tang(unit(d) * lam[b]);
                        aa.data[3 * a + c][3 * b + d] += -iw / z * trial.dot(&test) * s;
                    }
                    av.data[3 * a + c][b] += -1.0 / z * g[b].dot(&test) * s;
                    va.data[a][3 * b + c] += -iw / z * tang(unit(c) * lam[b]).dot(&g[a]) * s;
                }
                vv.data[a][b] += -1.0 / z * g[b].dot(&g[a]) * s;
            }
        }
    }
    (aa, av, va, vv)
}

pub fn rel<const R: usize, const C: usize>(a: &ElementMatrix<R, C>, b: &ElementMatrix<R, C>) -> f64 {
    a.frobenius_diff(b) / b.frobenius_norm().max(f64::MIN_POSITIVE)
}

pub fn block_rel(a: &SparseComplexBlock, b: &SparseComplexBlock) -> f64 {
    let n = b.frobenius_norm();
    if n == 0.0 {
        a.frobenius_norm()
    } else {
        a.frobenius_diff(b) / n
    }
}

/// Largest relative Frobenius difference over the four blocks.
pub fn blocks_rel(a: &Blocks, b: &Blocks) -> f64 {
    [
        block_rel(&a.m11, &b.m11),
        block_rel(&a.m12, &b.m12),
        block_rel(&a.m21, &b.m21),
        block_rel(&a.m22, &b.m22),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// Nondimensional parameters: every region conducting with σ = μ = ω = 1.
pub fn unit_params(delta_gauge: f64) -> PhysicsParams {
    PhysicsParams {
        omega: 1.0,
        materials: MaterialTable::uniform(Material { sigma: 1.0, mu: 1.0 }),
        mu_tilde: 1.0,
        delta_gauge,
        bc_penalty: 1e8,
        sigma_eps: 1e-6,
        l22_sigma: L22Sigma::Region,
        ibc: None,
        vacuum_mass: false,
    }
}

/// Generated tube mesh configuration of roughly `tets` size; the coarse
/// grid used by fast tests.
pub fn small_run() -> RunConfig {
    let mut c = RunConfig::default();
    c.mesh.length = 0.03;
    c.mesh.enclosure_radius = 0.025;
    c.mesh.axial_resolution = 2;
    c.mesh.angular_segments = Some(12);
    c.mesh.wall_layers = 1;
    c.scan = ectfem::config::ScanPositions::Range {
        start: -2e-3,
        end: 2e-3,
        count: 3,
    };
    c
}

/// Tube mesh with a volume support plate and the default defect.
pub fn tube_mesh(c: &RunConfig) -> Mesh {
    ectfem::scan::mesh_for(c).expect("mesh")
}

pub fn count(mesh: &Mesh, r: Region) -> usize {
    mesh.count_region(r)
}

// Manufactured solution on the unit cube: a divergence-free field with
// −ΔA = 2π² A.
pub fn exact_a(p: Point) -> [f64; 3] {
    use std::f64::consts::PI;
    let s = |t: f64| (PI * t).sin();
    [s(p[1]) * s(p[2]), s(p[2]) * s(p[0]), s(p[0]) * s(p[1])]
}

/// `∂A_c/∂x_k` as `grad[c][k]`.
pub fn exact_grad(p: Point) -> [[f64; 3]; 3] {
    use std::f64::consts::PI;
    let s = |t: f64| (PI * t).sin();
    let c = |t: f64| PI * (PI * t).cos();
    [
        [0.0, c(p[1]) * s(p[2]), s(p[1]) * c(p[2])],
        [s(p[2]) * c(p[0]), 0.0, c(p[2]) * s(p[0])],
        [c(p[0]) * s(p[1]), s(p[0]) * c(p[1]), 0.0],
    ]
}

pub fn exact_rhs(p: Point) -> [f64; 3] {
    let a = exact_a(p);
    let k = 2.0 * std::f64::consts::PI.powi(2);
    [k * a[0], k * a[1], k * a[2]]
}

/// Collapsed Gauss–Legendre rule with `n³` points on the reference
/// tetrahedron; returns barycentric points and weights summing to 1.
pub fn conical_rule(n: usize) -> Vec<([f64; 4], f64)> {
    let (x, w) = gauss_legendre(n);
    let mut out = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let (u, v, t) = (x[i], x[j], x[k]);
                let l1 = u;
                let l2 = v * (1.0 - u);
                let l3 = t * (1.0 - u) * (1.0 - v);
                let jac = (1.0 - u).powi(2) * (1.0 - v);
                out.push(([1.0 - l1 - l2 - l3, l1, l2, l3], 6.0 * w[i] * w[j] * w[k] * jac));
            }
        }
    }
    out
}

/// Gauss–Legendre nodes and weights on [0, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
            let dt = p1 / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                let dp = {
                    let (mut q0, mut q1) = (1.0, t);
                    for k in 2..=n {
                        let q2 = ((2 * k - 1) as f64 * t * q1 - (k - 1) as f64 * q0) / k as f64;
                        q0 = q1;
                        q1 = q2;
                    }
                    n as f64 * (t * q1 - q0) / (t * t - 1.0)
                };
                x[i] = 0.5 * (1.0 - t);
                w[i] = 1.0 / ((1.0 - t * t) * dp * dp);
                break;
            }
        }
    }
    (x, w)
}

pub fn random_vector(r: &mut StdRng, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| C64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5))
        .collect()
}

pub fn rel_vec(a: &[C64], b: &[C64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    d / ectfem::sparse::norm2(b)
}

/// Print one acceptance line and return whether it passed.
pub fn report(name: &str, pass: bool, detail: String) -> bool {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

/// Relative difference between serial assembly over every tetrahedron and
/// the reduction of `parts` partition blocks.
pub fn assembly_equivalence(mesh: &Mesh, params: &PhysicsParams, parts: usize, workers: usize) -> f64 {
    use ectfem::assembly::Assembler;
    let asm = Assembler::new(mesh, params).unwrap();
    let all: Vec<usize> = (0..mesh.tets.len()).collect();
    let serial = asm.assemble_tets(&all, &asm.ibc_faces).unwrap();
    let map = ectfem::partition::partition_tets(mesh, parts, 7).unwrap();
    let (merged, _) = asm.assemble_parallel(&map, workers).unwrap();
    blocks_rel(&merged, &serial)
}

/// Physical parameters of a run configuration.
pub fn physics(c: &RunConfig, mesh: &Mesh, reference: bool) -> PhysicsParams {
    ectfem::scan::ScanConfig::from_run(c).physics(mesh, reference).unwrap()
}

/// Largest relative asymmetry `‖B − Bᵀ‖ / ‖B‖`.
pub fn asymmetry(b: &SparseComplexBlock) -> f64 {
    block_rel(&b.transpose().canonicalized(), b)
}

/// Conductor components of the V-dofs (connected through conductor tets).
pub fn conductor_components(mesh: &Mesh, cmap: &ectfem::mesh::ConductorIndexMap, params: &PhysicsParams) -> Vec<Vec<usize>> {
    let n = cmap.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for t in &mesh.tets {
        if !params.is_conductor(t.region) {
            continue;
        }
        let v: Vec<usize> = t.nodes.iter().map(|&k| cmap.local(k).unwrap()).collect();
        for w in &v[1..] {
            let (a, b) = (find(&mut parent, v[0]), find(&mut parent, *w));
            parent[a] = b;
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

/// L2 and H1-seminorm errors of the P1 solution of the manufactured
/// problem on the unit cube with `n` cells per axis.
pub fn manufactured(n: usize) -> (f64, f64) {
    use ectfem::assembly::{Assembler, BlockSystem};
    let mesh = ectfem::mesh::unit_cube_mesh(n, Region::Vacuum);
    let params = PhysicsParams {
        omega: 1.0,
        materials: MaterialTable::uniform(Material { sigma: 0.0, mu: 1.0 }),
        mu_tilde: 1.0,
        delta_gauge: 0.0,
        bc_penalty: 1e12,
        sigma_eps: 0.0,
        l22_sigma: L22Sigma::Region,
        ibc: None,
        vacuum_mass: false,
    };
    let asm = Assembler::new(&mesh, &params).unwrap();
    assert_eq!(asm.cmap.len(), 0);
    let all: Vec<usize> = (0..mesh.tets.len()).collect();
    let blocks = asm.assemble_tets(&all, &[]).unwrap();
    let nn = mesh.nodes.len();
    let mut sys = BlockSystem::new(blocks, nn, 0, params.bc_penalty);
    for (k, p) in mesh.nodes.iter().enumerate() {
        if p.iter().any(|&x| x == 0.0 || x == 1.0) {
            let a = exact_a(*p);
            for c in 0..3 {
                sys.pin(3 * k + c, C64::new(a[c], 0.0));
            }
        }
    }
    sys.finalize_pins();
    let mut rhs = vec![C64::new(0.0, 0.0); 3 * nn];
    let rule = conical_rule(4);
    for (t, tet) in mesh.tets.iter().enumerate() {
        let pts = mesh.tet_points(t);
        let vol = mesh.tet_volume(t);
        for (lam, w) in &rule {
            let x = interp(&pts, lam);
            let f = exact_rhs(x);
            for a in 0..4 {
                for c in 0..3 {
                    rhs[3 * tet.nodes[a] + c].re += w * vol * lam[a] * f[c];
                }
            }
        }
    }
    sys.apply_pins(&mut rhs);
    let m = ectfem::solver::build_global(&sys).unwrap();
    let f = ectfem::solver::factorize(&m, None).unwrap();
    let x = f.solve(&rhs).unwrap().x;

    let (mut l2, mut h1) = (0.0, 0.0);
    for (t, tet) in mesh.tets.iter().enumerate() {
        let pts = mesh.tet_points(t);
        let (g, vol) = tet_gradients(pts);
        let mut grad_h = [[0.0; 3]; 3];
        for a in 0..4 {
            for c in 0..3 {
                for k in 0..3 {
                    grad_h[c][k] += x[3 * tet.nodes[a] + c].re * g[a][k];
                }
            }
        }
        for (lam, w) in &rule {
            let p = interp(&pts, lam);
            let ex = exact_a(p);
            let eg = exact_grad(p);
            for c in 0..3 {
                let uh: f64 = (0..4).map(|a| lam[a] * x[3 * tet.nodes[a] + c].re).sum();
                l2 += w * vol * (uh - ex[c]).powi(2);
                for k in 0..3 {
                    h1 += w * vol * (grad_h[c][k] - eg[c][k]).powi(2);
                }
            }
        }
    }
    (l2.sqrt(), h1.sqrt())
}

fn interp(p: &[Point; 4], lam: &[f64; 4]) -> Point {
    let mut x = [0.0; 3];
    for a in 0..4 {
        for k in 0..3 {
            x[k] += lam[a] * p[a][k];
        }
    }
    x
}

/// Pinned global matrix of a run configuration and the coil-1 source at the
/// first scan position.
pub fn eddy_system(c: &RunConfig) -> (Mesh, ectfem::sparse::CsrMatrix, Vec<C64>, Vec<usize>) {
    use ectfem::assembly::{apply_essential_bc, assemble_rhs, Assembler, CoilSupport};
    let mesh = tube_mesh(c);
    let p = physics(c, &mesh, false);
    let asm = Assembler::new(&mesh, &p).unwrap();
    let map = ectfem::partition::partition_tets(&mesh, 2, 1).unwrap();
    let (b, _) = asm.assemble_parallel(&map, 1).unwrap();
    let sys = apply_essential_bc(b, &mesh, &p, asm.cmap.len()).unwrap();
    let m = ectfem::solver::build_global(&sys).unwrap();
    let z = c.positions()[0];
    let coil = CoilSupport::locate(&mesh, &p, &c.geometry.coil, Region::Coil1, z).unwrap();
    let mut rhs = assemble_rhs(&mesh, &coil, c.current_density, m.n_rows);
    sys.apply_pins(&mut rhs);
    let groups = ectfem::solver::dof_groups(mesh.nodes.len(), &asm.cmap);
    (mesh, m, rhs, groups)
}

/// Dense LU oracle by nalgebra.
pub fn dense_solve(a: &[Vec<C64>], b: &[C64]) -> Vec<C64> {
    let n = a.len();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| a[i][j]);
    let v = nalgebra::DVector::from_column_slice(b);
    m.lu().solve(&v).expect("nonsingular").iter().copied().collect()
}

/// Relative difference of two eddy-current solutions with each conductor
/// component's mean scalar potential removed: the constant V mode is fixed
/// only by the weak gauge mass and carries no field.
pub fn quotient_diff(x: &[C64], y: &[C64], n_nodes: usize, comps: &[Vec<usize>]) -> f64 {
    let na = 3 * n_nodes;
    let demean = |v: &[C64]| {
        let mut out = v[na..].to_vec();
        for comp in comps {
            let m: C64 = comp.iter().map(|&i| out[i]).sum::<C64>() / comp.len() as f64;
            for &i in comp {
                out[i] -= m;
            }
        }
        out
    };
    rel_vec(&x[..na], &y[..na]).max(rel_vec(&demean(x), &demean(y)))
}

pub fn components_of(c: &RunConfig, mesh: &Mesh) -> Vec<Vec<usize>> {
    let p = physics(c, mesh, false);
    let cmap = p.conductor_map(mesh).unwrap();
    conductor_components(mesh, &cmap, &p)
}
