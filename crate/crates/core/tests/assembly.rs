mod common;

use common::*;
use ectfem::assembly::{apply_essential_bc, reduce_parts, Assembler};
use ectfem::config::TspMode;
use ectfem::mesh::{unit_cube_mesh, BoundaryLabel, Region};
use ectfem::partition::partition_tets;
use ectfem::C64;

#[test]
fn cube_split_matches_serial() {
    let mesh = unit_cube_mesh(1, Region::Tube);
    let p = unit_params(1e-6);
    for parts in [1, 2, 4, 8] {
        assert!(assembly_equivalence(&mesh, &p, parts, 2) <= 1e-12);
    }
}

#[test]
fn tube_split_matches_serial() {
    let mut c = small_run();
    c.geometry.tsp = TspMode::Volume;
    let mesh = tube_mesh(&c);
    let p = physics(&c, &mesh, false);
    for parts in [2, 4, 8] {
        let d = assembly_equivalence(&mesh, &p, parts, 3);
        assert!(d <= 1e-12, "P = {parts}: {d}");
    }
}

#[test]
fn ibc_split_matches_serial() {
    let mut c = small_run();
    c.geometry.tsp = TspMode::Ibc;
    let mesh = tube_mesh(&c);
    let p = physics(&c, &mesh, false);
    assert!(p.ibc.is_some());
    assert!(assembly_equivalence(&mesh, &p, 4, 2) <= 1e-12);
}

#[test]
fn reduction_order_irrelevant() {
    let c = small_run();
    let mesh = tube_mesh(&c);
    let p = physics(&c, &mesh, false);
    let asm = Assembler::new(&mesh, &p).unwrap();
    let map = partition_tets(&mesh, 4, 3).unwrap();
    let parts: Vec<_> = (0..4).map(|k| asm.assemble_part(&map, k).unwrap()).collect();
    let mut rev = parts.clone();
    rev.reverse();
    let a = reduce_parts(parts).unwrap();
    let b = reduce_parts(rev).unwrap();
    assert!(blocks_rel(&a, &b) <= 1e-15);
}

#[test]
fn nnz_matches_recount() {
    let c = small_run();
    let mesh = tube_mesh(&c);
    let p = physics(&c, &mesh, false);
    let asm = Assembler::new(&mesh, &p).unwrap();
    let (b, _) = asm.assemble_parallel(&partition_tets(&mesh, 4, 1).unwrap(), 2).unwrap();
    let mut pairs = std::collections::HashSet::new();
    let mut vpairs = std::collections::HashSet::new();
    for t in &mesh.tets {
        for &i in &t.nodes {
            for &j in &t.nodes {
                pairs.insert((i, j));
                if p.is_conductor(t.region) {
                    vpairs.insert((i, j));
                }
            }
        }
    }
    // the curl-curl plus grad-div coupling is generically dense per node pair
    assert_eq!(b.m11.nnz(), 9 * pairs.len());
    assert_eq!(b.m22.nnz(), vpairs.len());
    assert_eq!(b.m12.nnz(), 3 * vpairs.len());
}

#[test]
fn coupling_and_symmetry_structure() {
    let mut c = small_run();
    c.geometry.tsp = TspMode::Volume;
    let mesh = tube_mesh(&c);
    let p = physics(&c, &mesh, false);
    let asm = Assembler::new(&mesh, &p).unwrap();
    let (b, _) = asm.assemble_parallel(&partition_tets(&mesh, 2, 1).unwrap(), 1).unwrap();
    assert!(block_rel(&b.m21, &b.m12.transpose().canonicalized()) <= 1e-14);
    assert!(asymmetry(&b.m11) <= 1e-14);
    assert!(asymmetry(&b.m22) <= 1e-14);
}

#[test]
fn scalar_potential_constant_per_component_is_null() {
    let mut c = small_run();
    c.geometry.tsp = TspMode::Volume;
    c.materials.delta_gauge = 0.0;
    // the default deposit bridges tube and plate
    c.geometry.defect = None;
    let mesh = tube_mesh(&c);
    let p = physics(&c, &mesh, false);
    let asm = Assembler::new(&mesh, &p).unwrap();
    let (b, _) = asm.assemble_parallel(&partition_tets(&mesh, 2, 1).unwrap(), 1).unwrap();
    let comps = conductor_components(&mesh, &asm.cmap, &p);
    assert!(comps.len() >= 2, "tube and plate are separate conductors");
    let scale = b.m22.frobenius_norm();
    for comp in comps {
        let mut one = vec![C64::new(0.0, 0.0); asm.cmap.len()];
        for &i in &comp {
            one[i] = C64::new(1.0, 0.0);
        }
        let y = b.m22.matvec(&one);
        let r = ectfem::sparse::norm2(&y);
        assert!(r <= 1e-13 * scale, "{r}");
    }
}

#[test]
fn outer_boundary_is_pinned() {
    let c = small_run();
    let mesh = tube_mesh(&c);
    let p = physics(&c, &mesh, false);
    let asm = Assembler::new(&mesh, &p).unwrap();
    let (b, _) = asm.assemble_parallel(&partition_tets(&mesh, 2, 1).unwrap(), 1).unwrap();
    let sys = apply_essential_bc(b, &mesh, &p, asm.cmap.len()).unwrap();
    for f in &mesh.boundary_faces {
        let comps: &[usize] = match f.label {
            BoundaryLabel::OuterTop | BoundaryLabel::OuterBottom => &[2],
            BoundaryLabel::OuterLateral => &[0, 1],
            _ => continue,
        };
        for &n in &f.nodes {
            for &k in comps {
                assert!(sys.pins.contains_key(&(3 * n + k)));
            }
        }
    }
}
