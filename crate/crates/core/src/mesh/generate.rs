//! Parametric tube meshes and structured box meshes.
//!
//! The tube generator builds a ring-based triangulation of the cross-section,
//! extrudes it through a stack of axial planes and splits every prism into
//! three tetrahedra. The split uses the global 2D node order, so neighbouring
//! prisms always agree on their shared quadrilateral diagonals. With
//! `mirror_symmetric` the plane stack and the split rule are reflected about
//! `z = 0`, which makes the mesh exactly symmetric under `z → −z`.

use std::f64::consts::PI;

use super::{Mesh, MeshError, Region, Tet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoilGeometry {
    pub inner_radius: f64,
    pub outer_radius: f64,
    /// Axial height of each coil.
    pub height: f64,
    /// Axial gap between the two coils.
    pub gap: f64,
}

impl CoilGeometry {
    /// Axial window `[z0, z1]` of coil 1 (below) or coil 2 (above) for a
    /// probe centred at `z`.
    pub fn window(&self, coil: Region, z: f64) -> (f64, f64) {
        let half = 0.5 * self.gap;
        match coil {
            Region::Coil2 => (z + half, z + half + self.height),
            _ => (z - half - self.height, z - half),
        }
    }

    pub fn contains_radius(&self, r: f64) -> bool {
        r >= self.inner_radius && r <= self.outer_radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TspGeometry {
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub z_min: f64,
    pub z_max: f64,
}

/// Defect box in cylindrical coordinates (angles in radians).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefectGeometry {
    pub r_min: f64,
    pub r_max: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl DefectGeometry {
    pub fn contains(&self, r: f64, theta: f64, z: f64) -> bool {
        if r < self.r_min || r > self.r_max || z < self.z_min || z > self.z_max {
            return false;
        }
        let span = self.theta_max - self.theta_min;
        if span >= 2.0 * PI {
            return true;
        }
        (theta - self.theta_min).rem_euclid(2.0 * PI) <= span
    }
}

/// Geometry descriptor of the tube / support plate / probe model.
///
/// The domain is the cylinder `r ≤ enclosure_radius`, `|z| ≤ length / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TubeGeometry {
    pub tube_inner_radius: f64,
    pub tube_outer_radius: f64,
    pub length: f64,
    pub enclosure_radius: f64,
    /// Axial extent of the tube; `None` runs it through the whole domain.
    pub tube_z_range: Option<(f64, f64)>,
    pub coil: CoilGeometry,
    /// Probe centre positions; every coil window becomes a set of planes.
    pub probe_positions: Vec<f64>,
    pub tsp: Option<TspGeometry>,
    pub defect: Option<DefectGeometry>,
    pub axial_resolution: usize,
    pub angular_segments: Option<usize>,
    /// Minimum number of radial element layers across the tube wall.
    pub wall_layers: usize,
    pub mirror_symmetric: bool,
}

impl Default for TubeGeometry {
    fn default() -> Self {
        TubeGeometry {
            tube_inner_radius: 9.84e-3,
            tube_outer_radius: 11.11e-3,
            length: 0.06,
            enclosure_radius: 0.03,
            tube_z_range: None,
            coil: CoilGeometry {
                inner_radius: 7.0e-3,
                outer_radius: 8.5e-3,
                height: 2.0e-3,
                gap: 1.0e-3,
            },
            probe_positions: vec![0.0],
            tsp: None,
            defect: None,
            axial_resolution: 8,
            angular_segments: None,
            wall_layers: 2,
            mirror_symmetric: true,
        }
    }
}

impl TubeGeometry {
    pub fn z_bounds(&self) -> (f64, f64) {
        (-0.5 * self.length, 0.5 * self.length)
    }

    pub fn segments(&self) -> usize {
        self.angular_segments
            .unwrap_or_else(|| (4 * self.axial_resolution).max(12))
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        if self.axial_resolution < 1 {
            return Err(MeshError::Resolution(self.axial_resolution));
        }
        if self.segments() < 6 {
            return Err(MeshError::Geometry(format!(
                "angular_segments must be at least 6 (got {})",
                self.segments()
            )));
        }
        let all = [
            ("tube_inner_radius", self.tube_inner_radius),
            ("tube_outer_radius", self.tube_outer_radius),
            ("length", self.length),
            ("enclosure_radius", self.enclosure_radius),
            ("coil_inner_radius", self.coil.inner_radius),
            ("coil_outer_radius", self.coil.outer_radius),
            ("coil_height", self.coil.height),
        ];
        for (name, v) in all {
            if !(v > 0.0 && v.is_finite()) {
                return Err(MeshError::Geometry(format!("{name} must be positive (got {v})")));
            }
        }
        if !(self.coil.gap >= 0.0) {
            return Err(MeshError::Geometry("coil_gap must be non-negative".into()));
        }
        let ordered = self.coil.inner_radius < self.coil.outer_radius
            && self.coil.outer_radius < self.tube_inner_radius
            && self.tube_inner_radius < self.tube_outer_radius
            && self.tube_outer_radius < self.enclosure_radius;
        if !ordered {
            return Err(MeshError::Geometry(
                "radii must satisfy coil_inner < coil_outer < tube_inner < tube_outer < enclosure"
                    .into(),
            ));
        }
        let (zlo, zhi) = self.z_bounds();
        if let Some((a, b)) = self.tube_z_range {
            if !(a < b && a >= zlo && b <= zhi) {
                return Err(MeshError::Geometry("tube z range outside the domain".into()));
            }
        }
        if let Some(t) = &self.tsp {
            if !(self.tube_outer_radius <= t.inner_radius
                && t.inner_radius < t.outer_radius
                && t.outer_radius < self.enclosure_radius)
            {
                return Err(MeshError::Geometry(
                    "radii must satisfy tube_outer <= tsp_inner < tsp_outer < enclosure".into(),
                ));
            }
            if !(t.z_min < t.z_max && t.z_min >= zlo && t.z_max <= zhi) {
                return Err(MeshError::Geometry("support plate z range invalid".into()));
            }
        }
        if let Some(d) = &self.defect {
            if !(0.0 <= d.r_min && d.r_min < d.r_max && d.r_max < self.enclosure_radius) {
                return Err(MeshError::Geometry("defect radial range invalid".into()));
            }
            if !(d.z_min < d.z_max && d.z_min >= zlo && d.z_max <= zhi) {
                return Err(MeshError::Geometry("defect z range invalid".into()));
            }
            if !(d.theta_min < d.theta_max) {
                return Err(MeshError::Geometry("defect angular range invalid".into()));
            }
        }
        for &z in &self.probe_positions {
            for coil in [Region::Coil1, Region::Coil2] {
                let (a, b) = self.coil.window(coil, z);
                if !(a > zlo && b < zhi) {
                    return Err(MeshError::Geometry(format!(
                        "coil window [{a}, {b}] at probe position {z} leaves the domain"
                    )));
                }
            }
        }
        Ok(())
    }

    fn radii(&self) -> Vec<f64> {
        let mut req = vec![
            self.coil.inner_radius,
            self.coil.outer_radius,
            self.tube_inner_radius,
            self.tube_outer_radius,
            self.enclosure_radius,
        ];
        if let Some(t) = &self.tsp {
            req.push(t.inner_radius);
            req.push(t.outer_radius);
        }
        if let Some(d) = &self.defect {
            if d.r_min > 0.0 {
                req.push(d.r_min);
            }
            req.push(d.r_max);
        }
        req.sort_by(f64::total_cmp);
        let tol = 1e-9 * self.enclosure_radius;
        req.dedup_by(|a, b| (*a - *b).abs() <= tol);

        let n = self.segments() as f64;
        let h0 = 2.0 * PI * self.tube_outer_radius / n;
        let mut out = Vec::new();
        let mut r0 = 0.0;
        for &r1 in &req {
            let wall = (r0 - self.tube_inner_radius).abs() <= tol
                && (r1 - self.tube_outer_radius).abs() <= tol;
            let mid = 0.5 * (r0 + r1);
            let h = h0 * (mid / self.tube_outer_radius).max(1.0);
            let mut k = ((r1 - r0) / h).ceil().max(1.0) as usize;
            if wall {
                k = k.max(self.wall_layers.max(1));
            }
            for s in 1..=k {
                out.push(if s == k {
                    r1
                } else {
                    r0 + (r1 - r0) * s as f64 / k as f64
                });
            }
            r0 = r1;
        }
        out
    }

    fn planes(&self) -> Vec<f64> {
        let (zlo, zhi) = self.z_bounds();
        let mut req = vec![zlo, zhi];
        for &z in &self.probe_positions {
            for coil in [Region::Coil1, Region::Coil2] {
                let (a, b) = self.coil.window(coil, z);
                req.push(a);
                req.push(b);
            }
        }
        if let Some((a, b)) = self.tube_z_range {
            req.push(a);
            req.push(b);
        }
        if let Some(t) = &self.tsp {
            req.push(t.z_min);
            req.push(t.z_max);
        }
        if let Some(d) = &self.defect {
            req.push(d.z_min);
            req.push(d.z_max);
        }
        let h = self.length / self.axial_resolution as f64;
        let tol = 1e-9 * self.length;
        if self.mirror_symmetric {
            let mut half: Vec<f64> = req.iter().map(|z| z.abs()).collect();
            half.push(0.0);
            let upper = fill_planes(half, h, tol);
            let mut out: Vec<f64> = upper.iter().rev().filter(|&&z| z > 0.0).map(|z| -z).collect();
            out.extend(upper);
            out
        } else {
            fill_planes(req, h, tol)
        }
    }
}

fn fill_planes(mut req: Vec<f64>, h: f64, tol: f64) -> Vec<f64> {
    req.sort_by(f64::total_cmp);
    req.dedup_by(|a, b| (*a - *b).abs() <= tol);
    let mut out = vec![req[0]];
    for w in req.windows(2) {
        let k = ((w[1] - w[0]) / h - 1e-9).ceil().max(1.0) as usize;
        for s in 1..=k {
            out.push(if s == k {
                w[1]
            } else {
                w[0] + (w[1] - w[0]) * s as f64 / k as f64
            });
        }
    }
    out
}

struct CrossSection {
    points: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
}

fn cross_section(radii: &[f64], segments: usize, r_ref: f64) -> CrossSection {
    let mut points = vec![[0.0, 0.0]];
    let mut rings: Vec<(usize, usize)> = Vec::new();
    for &r in radii {
        let n = if r < r_ref {
            ((segments as f64 * r / r_ref).round() as usize).clamp(6, segments)
        } else {
            segments
        };
        let start = points.len();
        for k in 0..n {
            let t = 2.0 * PI * k as f64 / n as f64;
            points.push([r * t.cos(), r * t.sin()]);
        }
        rings.push((start, n));
    }
    let mut triangles = Vec::new();
    let (s0, n0) = rings[0];
    for k in 0..n0 {
        triangles.push([0, s0 + k, s0 + (k + 1) % n0]);
    }
    for w in rings.windows(2) {
        let (sa, na) = w[0];
        let (sb, nb) = w[1];
        let (mut i, mut j) = (0usize, 0usize);
        while i < na || j < nb {
            let advance_inner = j == nb || (i < na && (i + 1) * nb <= (j + 1) * na);
            if advance_inner {
                triangles.push([sa + i % na, sa + (i + 1) % na, sb + j % nb]);
                i += 1;
            } else {
                triangles.push([sa + i % na, sb + (j + 1) % nb, sb + j % nb]);
                j += 1;
            }
        }
    }
    for t in &mut triangles {
        let [a, b, c] = t.map(|k| points[k]);
        let area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        if area2 < 0.0 {
            t.swap(1, 2);
        }
    }
    CrossSection { points, triangles }
}

/// Split the prism over triangle `tri` between planes `lo` and `hi` into
/// three tetrahedra. `flip` reflects the rule for mirrored layers.
fn split_prism(tri: [usize; 3], lo: usize, hi: usize, flip: bool) -> [[usize; 4]; 3] {
    let mut s = tri;
    s.sort_unstable();
    let [a, b, c] = s;
    let (b0, b1) = if flip { (hi, lo) } else { (lo, hi) };
    [
        [a + b0, b + b0, c + b0, c + b1],
        [a + b0, b + b0, b + b1, c + b1],
        [a + b0, a + b1, b + b1, c + b1],
    ]
}

/// Generate a conforming tetrahedral mesh of the tube model.
///
/// Coil bands are tagged `COIL_1` / `COIL_2` at the first probe position;
/// supports at other positions are located geometrically by the assembly.
pub fn generate_tube_mesh(geom: &TubeGeometry) -> Result<Mesh, MeshError> {
    geom.validate()?;
    let radii = geom.radii();
    let planes = geom.planes();
    let section = cross_section(&radii, geom.segments(), geom.coil.inner_radius);
    let n2 = section.points.len();

    let mut nodes = Vec::with_capacity(n2 * planes.len());
    for &z in &planes {
        for p in &section.points {
            nodes.push([p[0], p[1], z]);
        }
    }

    let tri_info: Vec<(f64, f64)> = section
        .triangles
        .iter()
        .map(|t| {
            let cx = t.iter().map(|&k| section.points[k][0]).sum::<f64>() / 3.0;
            let cy = t.iter().map(|&k| section.points[k][1]).sum::<f64>() / 3.0;
            // mean ring radius: the centroid radius falls below the inner
            // ring on coarse sections
            let r = t
                .iter()
                .map(|&k| section.points[k][0].hypot(section.points[k][1]))
                .sum::<f64>()
                / 3.0;
            (r, cy.atan2(cx).rem_euclid(2.0 * PI))
        })
        .collect();

    let park = geom.probe_positions.first().copied().unwrap_or(0.0);
    let tube_z = geom.tube_z_range.unwrap_or(geom.z_bounds());
    let region_at = |r: f64, theta: f64, z: f64| -> Region {
        let in_tube = r > geom.tube_inner_radius
            && r < geom.tube_outer_radius
            && z > tube_z.0
            && z < tube_z.1;
        let in_tsp = geom.tsp.as_ref().is_some_and(|t| {
            r > t.inner_radius && r < t.outer_radius && z > t.z_min && z < t.z_max
        });
        let base = if in_tsp {
            Region::Tsp
        } else if in_tube {
            Region::Tube
        } else if geom.coil.contains_radius(r) {
            let (a1, b1) = geom.coil.window(Region::Coil1, park);
            let (a2, b2) = geom.coil.window(Region::Coil2, park);
            if z > a1 && z < b1 {
                Region::Coil1
            } else if z > a2 && z < b2 {
                Region::Coil2
            } else {
                Region::Vacuum
            }
        } else {
            Region::Vacuum
        };
        match (&geom.defect, base) {
            (Some(d), Region::Tube | Region::Vacuum) if d.contains(r, theta, z) => Region::Defect,
            _ => base,
        }
    };

    let mut tets = Vec::with_capacity(3 * section.triangles.len() * (planes.len() - 1));
    for l in 0..planes.len() - 1 {
        let zmid = 0.5 * (planes[l] + planes[l + 1]);
        let flip = geom.mirror_symmetric && zmid < 0.0;
        for (t, tri) in section.triangles.iter().enumerate() {
            let (r, theta) = tri_info[t];
            let region = region_at(r, theta, zmid);
            for nodes4 in split_prism(*tri, l * n2, (l + 1) * n2, flip) {
                tets.push(Tet {
                    nodes: nodes4,
                    region,
                });
            }
        }
    }

    let mut mesh = Mesh {
        nodes,
        tets,
        boundary_faces: Vec::new(),
    };
    mesh.canonicalize_orientation();
    mesh.relabel();
    Ok(mesh)
}

/// Structured mesh of the box `[lo, hi]` with `n` cells per axis, six
/// tetrahedra per cell (Kuhn split, conforming across cells).
pub fn box_mesh(n: [usize; 3], lo: [f64; 3], hi: [f64; 3], region: Region) -> Mesh {
    let [nx, ny, nz] = n.map(|k| k.max(1));
    let id = |i: usize, j: usize, k: usize| (k * (ny + 1) + j) * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push([
                    lo[0] + (hi[0] - lo[0]) * i as f64 / nx as f64,
                    lo[1] + (hi[1] - lo[1]) * j as f64 / ny as f64,
                    lo[2] + (hi[2] - lo[2]) * k as f64 / nz as f64,
                ]);
            }
        }
    }
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut tets = Vec::with_capacity(6 * nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                for p in PERMS {
                    let mut c = [i, j, k];
                    let mut v = [id(i, j, k); 4];
                    for (s, &axis) in p.iter().enumerate() {
                        c[axis] += 1;
                        v[s + 1] = id(c[0], c[1], c[2]);
                    }
                    tets.push(Tet { nodes: v, region });
                }
            }
        }
    }
    let mut mesh = Mesh {
        nodes,
        tets,
        boundary_faces: Vec::new(),
    };
    mesh.canonicalize_orientation();
    mesh.relabel();
    mesh
}

pub fn unit_cube_mesh(n: usize, region: Region) -> Mesh {
    box_mesh([n, n, n], [0.0; 3], [1.0; 3], region)
}
