mod common;

use common::*;
use ectfem::element::{element_ibc, element_l11, element_l12, element_l21, element_l22, TetGeometry, TriGeometry};
use ectfem::C64;

const TOL: f64 = 1e-13;

#[test]
fn volume_forms_match_quadrature() {
    let mut r = rng(11);
    for i in 0..200 {
        let p = random_tet(&mut r);
        let g = TetGeometry::new(p).unwrap();
        let (mu, mt, sigma, omega) = (0.5 + i as f64 * 0.01, 1.3, 2.0 + i as f64, 7.0);
        assert!(rel(&element_l11(&g, mu, mt, sigma, omega), &oracle_l11(p, mu, mt, sigma, omega)) < TOL);
        assert!(rel(&element_l12(&g, sigma), &oracle_l12(p, sigma)) < TOL);
        assert!(rel(&element_l21(&g, sigma), &oracle_l21(p, sigma)) < TOL);
        let (d, ss) = (1e-6 * (1 + i) as f64, 0.3 * sigma);
        assert!(rel(&element_l22(&g, ss, sigma, omega, d, mu), &oracle_l22(p, ss, sigma, omega, d, mu)) < TOL);
    }
}

#[test]
fn surface_form_matches_quadrature() {
    let mut r = rng(12);
    for _ in 0..200 {
        let p = random_tri(&mut r);
        let t = TriGeometry::new(p).unwrap();
        let z = C64::new(0.3, -0.7);
        let m = element_ibc(&t, z, 3.0);
        let (aa, av, va, vv) = oracle_ibc(p, z, 3.0);
        assert!(rel(&m.aa, &aa) < TOL);
        assert!(rel(&m.av, &av) < TOL);
        assert!(rel(&m.va, &va) < TOL);
        assert!(rel(&m.vv, &vv) < TOL, "{}", rel(&m.vv, &vv));
    }
}

#[test]
fn coupling_blocks_are_transposes() {
    let mut r = rng(13);
    for _ in 0..100 {
        let g = TetGeometry::new(random_tet(&mut r)).unwrap();
        let d = element_l21(&g, 3.0).frobenius_diff(&element_l12(&g, 3.0).transpose());
        assert!(d <= 1e-15 * element_l12(&g, 3.0).frobenius_norm());
    }
}

#[test]
fn gauge_term_adds_scaled_mass() {
    let mut r = rng(14);
    let p = random_tet(&mut r);
    let g = TetGeometry::new(p).unwrap();
    let (mu, sigma, delta) = (2.0, 5.0, 1e-6);
    let with = element_l22(&g, sigma, sigma, 1.0, delta, mu);
    let without = element_l22(&g, sigma, sigma, 1.0, 0.0, mu);
    for a in 0..4 {
        for b in 0..4 {
            let expect = delta * mu * sigma * g.volume * if a == b { 2.0 } else { 1.0 } / 20.0;
            assert!((with.get(a, b) - without.get(a, b) - expect).norm() < 1e-13 * expect);
        }
    }
}

#[test]
fn conductivity_subtracts_mass_tensor() {
    let mut r = rng(15);
    let p = random_tet(&mut r);
    let g = TetGeometry::new(p).unwrap();
    let a = element_l11(&g, 1.0, 1.0, 4.0, 3.0);
    let b = element_l11(&g, 1.0, 1.0, 0.0, 3.0);
    let vol = g.volume;
    for i in 0..12 {
        for j in 0..12 {
            let m = if i % 3 == j % 3 {
                vol * if i / 3 == j / 3 { 0.1 } else { 0.05 }
            } else {
                0.0
            };
            assert!((a.get(i, j) - b.get(i, j) - C64::new(0.0, -12.0 * m)).norm() < 1e-14);
        }
    }
}

#[test]
fn unit_reference_values() {
    let p = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let g = TetGeometry::new(p).unwrap();
    assert!((element_l11(&g, 1.0, 1.0, 0.0, 1.0).get(0, 0) - C64::new(0.5, 0.0)).norm() < 1e-15);
    assert!((element_l12(&g, 1.0).get(0, 0) - C64::new(1.0 / 24.0, 0.0)).norm() < 1e-15);
    assert!((element_l21(&g, 1.0).get(0, 0) - C64::new(1.0 / 24.0, 0.0)).norm() < 1e-15);
    assert!((element_l22(&g, 1.0, 1.0, 1.0, 0.0, 1.0).get(0, 0) - C64::new(0.0, 0.5)).norm() < 1e-15);
    let t = TriGeometry::new([p[0], p[1], p[2]]).unwrap();
    let m = element_ibc(&t, C64::new(1.0, 0.0), 1.0);
    assert!((m.aa.get(0, 0) - C64::new(0.0, -1.0 / 12.0)).norm() < 1e-15);
}
