//! Browser demo: skin-depth curve, tube mesh statistics and a small probe
//! scan, all computed by the solver crate compiled to WebAssembly.

use ectfem::config::{RunConfig, ScanPositions, TspMode};
use ectfem::mesh::{BoundaryLabel, Region};
use ectfem::signals::{skin_depth, surface_impedance};
use ectfem::MU_0;
use wasm_bindgen::prelude::*;

fn err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Rows of `[f, δ, Re Z, Im Z]` flattened, for `n` log-spaced frequencies.
#[wasm_bindgen]
pub fn skin_depth_curve(sigma: f64, mu_r: f64, f_min: f64, f_max: f64, n: usize) -> Result<Vec<f64>, JsError> {
    if !(f_min > 0.0 && f_max > f_min) || n < 2 {
        return Err(JsError::new("need 0 < f_min < f_max and n >= 2"));
    }
    let mut out = Vec::with_capacity(4 * n);
    let step = (f_max / f_min).ln() / (n - 1) as f64;
    for k in 0..n {
        let f = f_min * (step * k as f64).exp();
        let omega = 2.0 * std::f64::consts::PI * f;
        let d = skin_depth(omega, mu_r * MU_0, sigma).map_err(err)?;
        let z = surface_impedance(omega, mu_r * MU_0, sigma).map_err(err)?;
        out.extend([f, d, z.re, z.im]);
    }
    Ok(out)
}

fn demo_config(axial_resolution: usize, angular_segments: usize, tsp: bool) -> RunConfig {
    let mut c = RunConfig::default();
    c.mesh.length = 0.03;
    c.mesh.enclosure_radius = 0.025;
    c.mesh.axial_resolution = axial_resolution;
    c.mesh.angular_segments = Some(angular_segments);
    c.mesh.wall_layers = 1;
    c.geometry.tsp = if tsp { TspMode::Volume } else { TspMode::None };
    c
}

/// Node, tetrahedron, region and boundary-label counts of a generated tube
/// mesh, one `name value` pair per line.
#[wasm_bindgen]
pub fn mesh_stats(axial_resolution: usize, angular_segments: usize, tsp: bool) -> Result<String, JsError> {
    let c = demo_config(axial_resolution, angular_segments, tsp);
    let mesh = ectfem::scan::mesh_for(&c).map_err(err)?;
    let mut s = format!("nodes {}\ntets {}\n", mesh.nodes.len(), mesh.tets.len());
    for r in Region::ALL {
        s.push_str(&format!("{} {}\n", r.name(), mesh.count_region(r)));
    }
    for l in BoundaryLabel::ALL {
        s.push_str(&format!("{} {}\n", l.name(), mesh.count_label(l)));
    }
    let report = mesh.validate();
    s.push_str(if report.is_empty() { "valid\n" } else { "invalid\n" });
    Ok(s)
}

/// Probe scan over `count` positions in `[-z_max, z_max]` on a coarse mesh.
/// Returns rows of `[z, Re Z_FA, Im Z_FA, Re Z_F3, Im Z_F3]` flattened.
#[wasm_bindgen]
pub fn mini_scan(defect_sigma: f64, frequency: f64, z_max: f64, count: usize) -> Result<Vec<f64>, JsError> {
    let mut c = demo_config(2, 12, false);
    c.materials.regions[Region::Defect.index()].0 = defect_sigma;
    c.frequency = frequency;
    c.scan = ScanPositions::Range {
        start: -z_max,
        end: z_max,
        count,
    };
    c.workers = 1;
    c.validate().map_err(err)?;
    let trace = ectfem::scan::run(&c).map_err(err)?;
    let mut out = Vec::with_capacity(5 * trace.points.len());
    for p in &trace.points {
        out.extend([p.z, p.z_fa.re, p.z_fa.im, p.z_f3.re, p.z_f3.im]);
    }
    Ok(out)
}
