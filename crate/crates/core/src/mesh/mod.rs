//! Tetrahedral meshes with material regions and labelled faces.
//!
//! A [`Mesh`] is immutable once built. Tetrahedra carry exactly one
//! [`Region`]; the `boundary_faces` list carries the labelled faces, which
//! include both the outer boundary and the interior material interfaces
//! (conductor/insulator `Gamma`, support-plate surface `GammaP`).

pub mod generate;
pub mod gmsh;

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

pub use generate::{
    box_mesh, generate_tube_mesh, unit_cube_mesh, CoilGeometry, DefectGeometry, TspGeometry,
    TubeGeometry,
};
pub use gmsh::{format_mesh, load_mesh, parse_mesh, write_mesh, TagMap};

pub type Point = [f64; 3];

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: physical tag {tag} has no region or boundary mapping")]
    UnknownTag { line: usize, tag: i64 },
    #[error("non-conforming mesh: face {face:?} is shared by {count} tetrahedra")]
    NonConforming { face: [usize; 3], count: usize },
    #[error("tetrahedron {tet} is inverted or degenerate (signed volume {volume:e})")]
    InvertedTet { tet: usize, volume: f64 },
    #[error("degenerate geometry: {0}")]
    Geometry(String),
    #[error("resolution must be at least 1 (got {0})")]
    Resolution(usize),
    #[error("mesh has no conductor region, the scalar potential space is empty")]
    NoConductor,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Material region of a tetrahedron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Region {
    Tube,
    Tsp,
    Defect,
    Coil1,
    Coil2,
    Vacuum,
}

impl Region {
    pub const ALL: [Region; 6] = [
        Region::Tube,
        Region::Tsp,
        Region::Defect,
        Region::Coil1,
        Region::Coil2,
        Region::Vacuum,
    ];

    /// Regions that carry the scalar potential (σ ≠ 0 by construction).
    pub fn is_conductor(self) -> bool {
        matches!(self, Region::Tube | Region::Tsp | Region::Defect)
    }

    pub fn is_coil(self) -> bool {
        matches!(self, Region::Coil1 | Region::Coil2)
    }

    pub fn name(self) -> &'static str {
        match self {
            Region::Tube => "TUBE",
            Region::Tsp => "TSP",
            Region::Defect => "DEFECT",
            Region::Coil1 => "COIL_1",
            Region::Coil2 => "COIL_2",
            Region::Vacuum => "VACUUM",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Region::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(name))
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Label of a face in the `boundary_faces` list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryLabel {
    OuterLateral,
    OuterTop,
    OuterBottom,
    /// Conductor/insulator interface.
    Gamma,
    /// Surface of the tube support plate.
    GammaP,
}

impl BoundaryLabel {
    pub const ALL: [BoundaryLabel; 5] = [
        BoundaryLabel::OuterLateral,
        BoundaryLabel::OuterTop,
        BoundaryLabel::OuterBottom,
        BoundaryLabel::Gamma,
        BoundaryLabel::GammaP,
    ];

    pub fn is_outer(self) -> bool {
        matches!(
            self,
            BoundaryLabel::OuterLateral | BoundaryLabel::OuterTop | BoundaryLabel::OuterBottom
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            BoundaryLabel::OuterLateral => "OUTER_LATERAL",
            BoundaryLabel::OuterTop => "OUTER_TOP",
            BoundaryLabel::OuterBottom => "OUTER_BOTTOM",
            BoundaryLabel::Gamma => "GAMMA",
            BoundaryLabel::GammaP => "GAMMA_P",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        BoundaryLabel::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(name))
    }
}

impl fmt::Display for BoundaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tet {
    pub nodes: [usize; 4],
    pub region: Region,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFace {
    pub nodes: [usize; 3],
    pub label: BoundaryLabel,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<Point>,
    pub tets: Vec<Tet>,
    pub boundary_faces: Vec<BoundaryFace>,
}

pub fn signed_volume(p: [Point; 4]) -> f64 {
    let a = sub(p[1], p[0]);
    let b = sub(p[2], p[0]);
    let c = sub(p[3], p[0]);
    dot(a, cross(b, c)) / 6.0
}

pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn cross(a: Point, b: Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn face_key(mut nodes: [usize; 3]) -> [usize; 3] {
    nodes.sort_unstable();
    nodes
}

/// Local faces of a tetrahedron, each opposite to the omitted vertex.
pub const TET_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];

/// Face-to-tetrahedron incidence of a mesh.
#[derive(Debug, Clone, Default)]
pub struct FaceTable {
    /// Faces shared by exactly two tetrahedra: (key, lower tet, higher tet).
    pub interior: Vec<([usize; 3], usize, usize)>,
    /// Faces owned by a single tetrahedron.
    pub outer: Vec<([usize; 3], usize)>,
    /// Faces claimed by three or more tetrahedra.
    pub overfull: Vec<([usize; 3], Vec<usize>)>,
}

impl FaceTable {
    pub fn build(mesh: &Mesh) -> Self {
        let mut all: Vec<([usize; 3], usize)> = Vec::with_capacity(4 * mesh.tets.len());
        for (t, tet) in mesh.tets.iter().enumerate() {
            for lf in TET_FACES {
                all.push((
                    face_key([tet.nodes[lf[0]], tet.nodes[lf[1]], tet.nodes[lf[2]]]),
                    t,
                ));
            }
        }
        all.sort_unstable();
        let mut table = FaceTable::default();
        let mut i = 0;
        while i < all.len() {
            let mut j = i + 1;
            while j < all.len() && all[j].0 == all[i].0 {
                j += 1;
            }
            match j - i {
                1 => table.outer.push((all[i].0, all[i].1)),
                2 => table.interior.push((all[i].0, all[i].1, all[i + 1].1)),
                _ => table
                    .overfull
                    .push((all[i].0, all[i..j].iter().map(|e| e.1).collect())),
            }
            i = j;
        }
        table
    }

    /// Lookup from face key to the incident tetrahedra.
    pub fn incidence(&self) -> HashMap<[usize; 3], (usize, Option<usize>)> {
        let mut map = HashMap::with_capacity(self.interior.len() + self.outer.len());
        for &(k, a, b) in &self.interior {
            map.insert(k, (a, Some(b)));
        }
        for &(k, a) in &self.outer {
            map.insert(k, (a, None));
        }
        map
    }
}

/// Compressed adjacency lists, neighbours sorted ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Adjacency {
    pub offsets: Vec<usize>,
    pub targets: Vec<usize>,
}

impl Adjacency {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut deg = vec![0usize; n + 1];
        for &(a, b) in edges {
            deg[a + 1] += 1;
            deg[b + 1] += 1;
        }
        for i in 0..n {
            deg[i + 1] += deg[i];
        }
        let mut fill = deg.clone();
        let mut targets = vec![0usize; deg[n]];
        for &(a, b) in edges {
            targets[fill[a]] = b;
            fill[a] += 1;
            targets[fill[b]] = a;
            fill[b] += 1;
        }
        for i in 0..n {
            targets[deg[i]..deg[i + 1]].sort_unstable();
        }
        Adjacency {
            offsets: deg,
            targets,
        }
    }

    pub fn len(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }
}

/// One violated mesh invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    NodeOutOfRange { tet: usize, node: usize },
    InvertedTet { tet: usize, volume: f64 },
    NonConformingFace { face: [usize; 3], tets: Vec<usize> },
    FaceNotInMesh { index: usize, face: [usize; 3] },
    DuplicateFaceLabel { face: [usize; 3], labels: Vec<BoundaryLabel> },
    MisclassifiedFace {
        index: usize,
        face: [usize; 3],
        stored: BoundaryLabel,
        expected: Option<BoundaryLabel>,
    },
    MissingFaceLabel { face: [usize; 3], expected: BoundaryLabel },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::NodeOutOfRange { tet, node } => {
                write!(f, "tet {tet}: node index {node} out of range")
            }
            Diagnostic::InvertedTet { tet, volume } => {
                write!(f, "tet {tet}: non-positive signed volume {volume:e}")
            }
            Diagnostic::NonConformingFace { face, tets } => {
                write!(f, "face {face:?}: shared by tets {tets:?}")
            }
            Diagnostic::FaceNotInMesh { index, face } => {
                write!(f, "labelled face #{index} {face:?} is not a tetrahedron face")
            }
            Diagnostic::DuplicateFaceLabel { face, labels } => {
                write!(f, "face {face:?}: labelled more than once {labels:?}")
            }
            Diagnostic::MisclassifiedFace {
                index,
                face,
                stored,
                expected,
            } => match expected {
                Some(e) => write!(f, "face #{index} {face:?}: labelled {stored}, expected {e}"),
                None => write!(f, "face #{index} {face:?}: labelled {stored}, expected no label"),
            },
            Diagnostic::MissingFaceLabel { face, expected } => {
                write!(f, "face {face:?}: missing label, expected {expected}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub diagnostics: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.diagnostics.is_empty()
    }

    /// Tetrahedra named by any diagnostic.
    pub fn offending_tets(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for d in &self.diagnostics {
            match d {
                Diagnostic::NodeOutOfRange { tet, .. } | Diagnostic::InvertedTet { tet, .. } => {
                    out.push(*tet)
                }
                Diagnostic::NonConformingFace { tets, .. } => out.extend(tets),
                _ => {}
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.diagnostics.is_empty() {
            return writeln!(f, "mesh valid");
        }
        for d in &self.diagnostics {
            writeln!(f, "{d}")?;
        }
        Ok(())
    }
}

/// Global node index ↔ conductor-local scalar potential dof.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConductorIndexMap {
    forward: Vec<Option<usize>>,
    inverse: Vec<usize>,
}

impl ConductorIndexMap {
    /// Map without scalar potential dofs, for purely magnetic problems.
    pub fn empty(n_nodes: usize) -> Self {
        ConductorIndexMap {
            forward: vec![None; n_nodes],
            inverse: Vec::new(),
        }
    }

    pub fn local(&self, node: usize) -> Option<usize> {
        self.forward.get(node).copied().flatten()
    }

    pub fn global(&self, local: usize) -> usize {
        self.inverse[local]
    }

    pub fn len(&self) -> usize {
        self.inverse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inverse.is_empty()
    }

    pub fn n_nodes(&self) -> usize {
        self.forward.len()
    }

    pub fn nodes(&self) -> &[usize] {
        &self.inverse
    }
}

/// Axial extent tolerance used when recognising the top and bottom caps.
fn z_tolerance(zmin: f64, zmax: f64) -> f64 {
    1e-9 * (zmax - zmin).abs().max(f64::MIN_POSITIVE)
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn tet_points(&self, t: usize) -> [Point; 4] {
        let n = self.tets[t].nodes;
        [
            self.nodes[n[0]],
            self.nodes[n[1]],
            self.nodes[n[2]],
            self.nodes[n[3]],
        ]
    }

    pub fn tet_volume(&self, t: usize) -> f64 {
        signed_volume(self.tet_points(t))
    }

    pub fn tet_centroid(&self, t: usize) -> Point {
        let p = self.tet_points(t);
        let mut c = [0.0; 3];
        for q in p {
            for k in 0..3 {
                c[k] += 0.25 * q[k];
            }
        }
        c
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.tets.len()).map(|t| self.tet_volume(t)).sum()
    }

    pub fn region_volume(&self, region: Region) -> f64 {
        (0..self.tets.len())
            .filter(|&t| self.tets[t].region == region)
            .map(|t| self.tet_volume(t))
            .sum()
    }

    pub fn count_region(&self, region: Region) -> usize {
        self.tets.iter().filter(|t| t.region == region).count()
    }

    pub fn count_label(&self, label: BoundaryLabel) -> usize {
        self.boundary_faces
            .iter()
            .filter(|f| f.label == label)
            .count()
    }

    pub fn z_extent(&self) -> (f64, f64) {
        self.nodes
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p[2]), hi.max(p[2]))
            })
    }

    /// Swap two vertices of every negatively oriented tetrahedron.
    pub fn canonicalize_orientation(&mut self) {
        for t in 0..self.tets.len() {
            if self.tet_volume(t) < 0.0 {
                self.tets[t].nodes.swap(2, 3);
            }
        }
    }

    pub fn face_table(&self) -> FaceTable {
        FaceTable::build(self)
    }

    /// Face-adjacency (dual) graph of the tetrahedra.
    pub fn dual_graph(&self) -> Adjacency {
        let table = self.face_table();
        let edges: Vec<(usize, usize)> = table.interior.iter().map(|&(_, a, b)| (a, b)).collect();
        Adjacency::from_edges(self.tets.len(), &edges)
    }

    /// Label an outer face from its axial position: caps at the extreme z
    /// values, lateral otherwise.
    fn outer_label(&self, face: [usize; 3], zmin: f64, zmax: f64) -> BoundaryLabel {
        let tol = z_tolerance(zmin, zmax);
        let zs = face.map(|n| self.nodes[n][2]);
        if zs.iter().all(|z| (z - zmax).abs() <= tol) {
            BoundaryLabel::OuterTop
        } else if zs.iter().all(|z| (z - zmin).abs() <= tol) {
            BoundaryLabel::OuterBottom
        } else {
            BoundaryLabel::OuterLateral
        }
    }

    /// Label an interior face from the regions on either side.
    pub fn interface_label(a: Region, b: Region) -> Option<BoundaryLabel> {
        if (a == Region::Tsp) != (b == Region::Tsp) {
            Some(BoundaryLabel::GammaP)
        } else if a.is_conductor() != b.is_conductor() {
            Some(BoundaryLabel::Gamma)
        } else {
            None
        }
    }

    /// Recompute every face label from geometry and region adjacency.
    ///
    /// Outer labels take precedence over interface labels where the tube
    /// reaches the outer boundary.
    pub fn classify_faces(&self) -> Vec<BoundaryFace> {
        let table = self.face_table();
        self.classify_with(&table)
    }

    fn classify_with(&self, table: &FaceTable) -> Vec<BoundaryFace> {
        let (zmin, zmax) = self.z_extent();
        let mut out = Vec::new();
        for &(key, t) in &table.outer {
            out.push(BoundaryFace {
                nodes: self.oriented_face(t, key),
                label: self.outer_label(key, zmin, zmax),
            });
        }
        for &(key, a, b) in &table.interior {
            if let Some(label) = Self::interface_label(self.tets[a].region, self.tets[b].region) {
                out.push(BoundaryFace {
                    nodes: self.oriented_face(a, key),
                    label,
                });
            }
        }
        out.sort_by_key(|f| (f.label, face_key(f.nodes)));
        out
    }

    /// Face nodes ordered so the normal points out of tet `t`.
    fn oriented_face(&self, t: usize, key: [usize; 3]) -> [usize; 3] {
        let nodes = self.tets[t].nodes;
        let opposite = nodes
            .iter()
            .copied()
            .find(|n| !key.contains(n))
            .unwrap_or(nodes[0]);
        let [a, b, c] = key;
        let pa = self.nodes[a];
        let n = cross(sub(self.nodes[b], pa), sub(self.nodes[c], pa));
        if dot(n, sub(self.nodes[opposite], pa)) > 0.0 {
            [a, c, b]
        } else {
            [a, b, c]
        }
    }

    /// Replace the stored labels with the recomputed classification.
    pub fn relabel(&mut self) {
        self.boundary_faces = self.classify_faces();
    }

    /// Check every mesh invariant; the report is empty iff all hold.
    pub fn validate(&self) -> ValidationReport {
        let mut diagnostics = Vec::new();
        let n = self.nodes.len();
        let mut indices_ok = true;
        for (t, tet) in self.tets.iter().enumerate() {
            for &node in &tet.nodes {
                if node >= n {
                    diagnostics.push(Diagnostic::NodeOutOfRange { tet: t, node });
                    indices_ok = false;
                }
            }
        }
        if !indices_ok {
            return ValidationReport { diagnostics };
        }
        for t in 0..self.tets.len() {
            let v = self.tet_volume(t);
            if !(v > 0.0) {
                diagnostics.push(Diagnostic::InvertedTet { tet: t, volume: v });
            }
        }
        let table = self.face_table();
        for (face, tets) in &table.overfull {
            diagnostics.push(Diagnostic::NonConformingFace {
                face: *face,
                tets: tets.clone(),
            });
        }

        let expected: HashMap<[usize; 3], BoundaryLabel> = self
            .classify_with(&table)
            .into_iter()
            .map(|f| (face_key(f.nodes), f.label))
            .collect();
        let incidence = table.incidence();
        let mut seen: HashMap<[usize; 3], Vec<BoundaryLabel>> = HashMap::new();
        for (index, f) in self.boundary_faces.iter().enumerate() {
            let key = face_key(f.nodes);
            if !incidence.contains_key(&key) {
                diagnostics.push(Diagnostic::FaceNotInMesh { index, face: key });
                continue;
            }
            seen.entry(key).or_default().push(f.label);
            let exp = expected.get(&key).copied();
            if exp != Some(f.label) {
                diagnostics.push(Diagnostic::MisclassifiedFace {
                    index,
                    face: key,
                    stored: f.label,
                    expected: exp,
                });
            }
        }
        let mut dup: Vec<_> = seen.iter().filter(|(_, l)| l.len() > 1).collect();
        dup.sort_by_key(|(k, _)| **k);
        for (face, labels) in dup {
            diagnostics.push(Diagnostic::DuplicateFaceLabel {
                face: *face,
                labels: labels.clone(),
            });
        }
        let mut missing: Vec<_> = expected
            .iter()
            .filter(|(k, _)| !seen.contains_key(*k))
            .collect();
        missing.sort_by_key(|(k, _)| **k);
        for (face, label) in missing {
            diagnostics.push(Diagnostic::MissingFaceLabel {
                face: *face,
                expected: *label,
            });
        }
        ValidationReport { diagnostics }
    }

    /// Conductor map over the conductor-tagged regions.
    pub fn conductor_map(&self) -> Result<ConductorIndexMap, MeshError> {
        self.conductor_map_with(Region::is_conductor)
    }

    /// Conductor map over the regions selected by `is_conductor`.
    pub fn conductor_map_with(
        &self,
        is_conductor: impl Fn(Region) -> bool,
    ) -> Result<ConductorIndexMap, MeshError> {
        let mut flag = vec![false; self.nodes.len()];
        for tet in &self.tets {
            if is_conductor(tet.region) {
                for &n in &tet.nodes {
                    flag[n] = true;
                }
            }
        }
        let mut forward = vec![None; self.nodes.len()];
        let mut inverse = Vec::new();
        for (node, &f) in flag.iter().enumerate() {
            if f {
                forward[node] = Some(inverse.len());
                inverse.push(node);
            }
        }
        if inverse.is_empty() {
            return Err(MeshError::NoConductor);
        }
        Ok(ConductorIndexMap { forward, inverse })
    }

    /// Tetrahedra sorted by canonical connectivity, for comparisons that must
    /// not depend on element order or vertex rotation.
    pub fn canonical_tets(&self) -> Vec<([Point; 4], Region)> {
        let mut out: Vec<([Point; 4], Region)> = self
            .tets
            .iter()
            .map(|t| {
                let mut pts = t.nodes.map(|n| self.nodes[n]);
                pts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
                (pts, t.region)
            })
            .collect();
        out.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        out
    }

    pub fn canonical_faces(&self) -> Vec<([Point; 3], BoundaryLabel)> {
        let mut out: Vec<([Point; 3], BoundaryLabel)> = self
            .boundary_faces
            .iter()
            .map(|f| {
                let mut pts = f.nodes.map(|n| self.nodes[n]);
                pts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
                (pts, f.label)
            })
            .collect();
        out.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        out
    }
}
