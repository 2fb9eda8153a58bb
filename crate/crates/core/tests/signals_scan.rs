mod common;

use common::*;
use ectfem::config::ScanPositions;
use ectfem::mesh::{Mesh, Region, Tet};
use ectfem::scan::{run, ImpedanceTrace};
use ectfem::signals::{
    delta_impedance, electric_field, skin_depth, surface_impedance, DefectContrast, PotentialSolution,
};
use ectfem::{C64, MU_0};
use proptest::prelude::*;
use rand::RngExt;

const I: C64 = C64::new(0.0, 1.0);

#[test]
fn skin_depth_and_impedance_closed_form() {
    let omega = 2.0 * std::f64::consts::PI * 1e5;
    let d = skin_depth(omega, MU_0, 1e6).unwrap();
    assert!((d - 1.5915e-3).abs() <= 1e-7);
    let z = surface_impedance(omega, MU_0, 1e6).unwrap();
    let expect = C64::new(1.0, -1.0) / (d * 1e6);
    assert!((z - expect).norm() <= 1e-12 * expect.norm());
    assert!((z.re - 6.283e-4).abs() < 1e-6);
    assert!(skin_depth(omega, MU_0, 0.0).is_err());
}

fn single_tet(p: [[f64; 3]; 4], region: Region) -> Mesh {
    let mut m = Mesh {
        nodes: p.to_vec(),
        tets: vec![Tet {
            nodes: [0, 1, 2, 3],
            region,
        }],
        boundary_faces: Vec::new(),
    };
    m.relabel();
    m
}

fn linear_field(r: &mut rand::rngs::StdRng) -> ([[C64; 3]; 3], [C64; 3]) {
    let mut grad = [[C64::new(0.0, 0.0); 3]; 3];
    let mut c = [C64::new(0.0, 0.0); 3];
    for i in 0..3 {
        c[i] = C64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5);
        for k in 0..3 {
            grad[i][k] = C64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5);
        }
    }
    (grad, c)
}

fn eval(grad: &[[C64; 3]; 3], c: &[C64; 3], x: [f64; 3]) -> [C64; 3] {
    let mut out = *c;
    for i in 0..3 {
        for k in 0..3 {
            out[i] += grad[i][k] * x[k];
        }
    }
    out
}

#[test]
fn electric_field_matches_analytic_gradient() {
    let mut r = rng(21);
    for _ in 0..100 {
        let p = random_tet(&mut r);
        let mesh = single_tet(p, Region::Tube);
        let cmap = mesh.conductor_map().unwrap();
        let (ga, ca) = linear_field(&mut r);
        let gv: [C64; 3] = std::array::from_fn(|_| C64::new(r.random::<f64>(), r.random::<f64>()));
        let cv = C64::new(0.3, 0.1);
        let sol = PotentialSolution {
            a: p.iter().map(|&x| eval(&ga, &ca, x)).collect(),
            v: p.iter().map(|x| cv + gv[0] * x[0] + gv[1] * x[1] + gv[2] * x[2]).collect(),
            omega: 3.0,
        };
        let e = electric_field(&sol, &mesh, &cmap, |r| r.is_conductor()).unwrap()[0];
        let centroid = mesh.tet_centroid(0);
        let a = eval(&ga, &ca, centroid);
        for k in 0..3 {
            let expect = I * 3.0 * a[k] + gv[k];
            assert!((e[k] - expect).norm() <= 1e-13 * expect.norm().max(1.0));
        }
    }
}

#[test]
fn single_defect_tet_hand_value() {
    // constant A, linear V, affine A for the curl: every term in closed form
    let mut r = rng(22);
    let p = random_tet(&mut r);
    let vol = ectfem::mesh::signed_volume(p);
    let mesh = single_tet(p, Region::Defect);
    let cmap = mesh.conductor_map().unwrap();
    let omega = 2.0;
    let b = [C64::new(1.0, 0.5), C64::new(-0.3, 0.2), C64::new(0.7, 0.0)];
    // A = ½ B × x has curl B
    let a_of = |x: [f64; 3]| {
        [
            0.5 * (b[1] * x[2] - b[2] * x[1]),
            0.5 * (b[2] * x[0] - b[0] * x[2]),
            0.5 * (b[0] * x[1] - b[1] * x[0]),
        ]
    };
    let gv = [C64::new(0.2, 0.0), C64::new(0.0, -1.0), C64::new(0.5, 0.5)];
    let sol = PotentialSolution {
        a: p.iter().map(|&x| a_of(x)).collect(),
        v: p.iter().map(|x| gv[0] * x[0] + gv[1] * x[1] + gv[2] * x[2]).collect(),
        omega,
    };
    let contrast = DefectContrast {
        mu_d: 2.0,
        mu_eps: 1.0,
        sigma_d: 5.0,
        sigma_eps: 1.0,
        conjugate: false,
    };
    let dz = delta_impedance(&sol, &sol, &mesh, &cmap, &contrast).unwrap();
    let mag = (1.0 - 2.0) / 2.0;
    let curl: C64 = b.iter().map(|v| v * v).sum();
    let mut e2 = C64::new(0.0, 0.0);
    for (lam, w) in conical_rule(3) {
        let x: [f64; 3] = std::array::from_fn(|k| (0..4).map(|a| lam[a] * p[a][k]).sum());
        let a = a_of(x);
        for k in 0..3 {
            let e = I * omega * a[k] + gv[k];
            e2 += e * e * w * vol;
        }
    }
    let expect = mag / (I * omega) * curl * vol + 4.0 * e2;
    assert!((dz - expect).norm() <= 1e-13 * expect.norm(), "{dz} vs {expect}");
}

#[test]
fn matched_contrast_is_exactly_zero() {
    let mut r = rng(23);
    let p = random_tet(&mut r);
    let mesh = single_tet(p, Region::Defect);
    let cmap = mesh.conductor_map().unwrap();
    let sol = PotentialSolution {
        a: vec![[C64::new(1.0, 2.0); 3]; 4],
        v: vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(2.0, 0.0), C64::new(0.0, 0.0)],
        omega: 1.0,
    };
    let c = DefectContrast {
        mu_d: MU_0,
        mu_eps: MU_0,
        sigma_d: 1.0,
        sigma_eps: 1.0,
        conjugate: false,
    };
    assert_eq!(delta_impedance(&sol, &sol, &mesh, &cmap, &c).unwrap(), C64::new(0.0, 0.0));
}

fn scan_run() -> ectfem::config::RunConfig {
    let mut c = small_run();
    c.scan = ScanPositions::Range {
        start: -3e-3,
        end: 3e-3,
        count: 5,
    };
    c
}

#[test]
fn defect_free_scan_is_null() {
    let mut c = scan_run();
    c.geometry.defect = None;
    let t = run(&c).unwrap();
    assert_eq!(t.factorizations, 1);
    for p in &t.points {
        assert_eq!(p.z_fa, C64::new(0.0, 0.0));
        assert_eq!(p.z_f3, C64::new(0.0, 0.0));
    }
}

#[test]
fn matched_material_scan_is_null() {
    let mut c = scan_run();
    let eps = c.sigma_eps();
    c.materials.regions[Region::Defect.index()] = (eps, 1.0);
    let t = run(&c).unwrap();
    assert_eq!(t.factorizations, 1);
    assert!(t.points.iter().all(|p| p.z_fa == C64::new(0.0, 0.0) && p.z_f3 == C64::new(0.0, 0.0)));
}

#[test]
fn mirror_symmetry_cancels_differential_signal() {
    let mut c = scan_run();
    c.scan = ScanPositions::List(vec![0.0]);
    let t = run(&c).unwrap();
    assert_eq!(t.factorizations, 2);
    let p = &t.points[0];
    assert!(p.z_fa.norm() > 0.0);
    assert!(p.z_f3.norm() <= 1e-6 * p.z_fa.norm(), "{} vs {}", p.z_f3, p.z_fa);
}

#[test]
fn trace_is_mirror_symmetric_and_reciprocal() {
    let t = run(&scan_run()).unwrap();
    let n = t.points.len();
    let scale = t.points.iter().map(|p| p.z_fa.norm()).fold(0.0, f64::max);
    for i in 0..n {
        let (a, b) = (&t.points[i], &t.points[n - 1 - i]);
        assert!((a.delta.0[0][0] - b.delta.0[1][1]).norm() <= 1e-6 * scale);
        assert!((a.delta.0[0][1] - a.delta.0[1][0]).norm() <= 1e-6 * scale);
    }
}

fn rows(t: &ImpedanceTrace) -> String {
    t.to_csv().lines().filter(|l| !l.starts_with("# timing")).collect::<Vec<_>>().join("\n")
}

#[test]
fn runs_are_reproducible() {
    let c = scan_run();
    let a = run(&c).unwrap();
    let b = run(&c).unwrap();
    assert_eq!(rows(&a), rows(&b));
    let mut c4 = c.clone();
    c4.workers = 4;
    let d = run(&c4).unwrap();
    assert_eq!(d.config_hash, a.config_hash);
    assert!(a.max_deviation(&d).unwrap() <= 1e-12);
}

#[test]
fn csv_round_trip() {
    let t = run(&scan_run()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    t.write_csv(&path).unwrap();
    let back = ImpedanceTrace::read_csv(&path).unwrap();
    assert_eq!(back.points.len(), t.points.len());
    assert_eq!(back.config_hash, t.config_hash);
    assert_eq!(back.factorizations, t.factorizations);
    assert!(t.max_deviation(&back).unwrap() <= 1e-11);
    assert_eq!(rows(&back), rows(&t));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn skin_depth_scaling(sigma in 1e3f64..1e8, f in 1e2f64..1e7, mu_r in 1.0f64..100.0) {
        let omega = 2.0 * std::f64::consts::PI * f;
        let d = skin_depth(omega, mu_r * MU_0, sigma).unwrap();
        let d4 = skin_depth(4.0 * omega, mu_r * MU_0, sigma).unwrap();
        prop_assert!((d / d4 - 2.0).abs() < 1e-12);
        let z = surface_impedance(omega, mu_r * MU_0, sigma).unwrap();
        prop_assert!((z.re + z.im).abs() <= 1e-12 * z.re);
    }

    #[test]
    fn pairing_is_bilinear(s in -3.0f64..3.0, seed in 0u64..1000) {
        let mut r = rng(seed);
        let p = random_tet(&mut r);
        let mesh = single_tet(p, Region::Defect);
        let cmap = mesh.conductor_map().unwrap();
        let mk = |r: &mut rand::rngs::StdRng| PotentialSolution {
            a: (0..4).map(|_| std::array::from_fn(|_| C64::new(r.random::<f64>(), r.random::<f64>()))).collect(),
            v: (0..4).map(|_| C64::new(r.random::<f64>(), r.random::<f64>())).collect(),
            omega: 5.0,
        };
        let (x, y, w) = (mk(&mut r), mk(&mut r), mk(&mut r));
        let c = DefectContrast { mu_d: 2.0, mu_eps: 1.0, sigma_d: 3.0, sigma_eps: 1.0, conjugate: false };
        let comb = PotentialSolution {
            a: x.a.iter().zip(&y.a).map(|(p, q)| std::array::from_fn(|k| p[k] + q[k] * s)).collect(),
            v: x.v.iter().zip(&y.v).map(|(p, q)| p + q * s).collect(),
            omega: 5.0,
        };
        let lhs = delta_impedance(&comb, &w, &mesh, &cmap, &c).unwrap();
        let rhs = delta_impedance(&x, &w, &mesh, &cmap, &c).unwrap() + delta_impedance(&y, &w, &mesh, &cmap, &c).unwrap() * s;
        prop_assert!((lhs - rhs).norm() <= 1e-12 * (lhs.norm() + rhs.norm() + 1.0));
        // unconjugated pairing is symmetric
        let a = delta_impedance(&x, &w, &mesh, &cmap, &c).unwrap();
        let b = delta_impedance(&w, &x, &mesh, &cmap, &c).unwrap();
        prop_assert!((a - b).norm() <= 1e-12 * a.norm());
    }
}
