//! Per-partition assembly of the 2×2 block system, reduction, essential
//! boundary conditions and coil source vectors.
//!
//! Global dof layout: the vector potential dof of node `n`, component `c`
//! is `3n + c`; the scalar potential dof of conductor-local node `k` is
//! `3 N_nodes + k`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::element::{
    element_ibc, element_l11, element_l12, element_l21, element_l22, ElementMatrix, TetGeometry,
    TriGeometry,
};
use crate::mesh::{BoundaryLabel, CoilGeometry, ConductorIndexMap, Mesh, MeshError, Region};
use crate::partition::PartitionMap;
use crate::sparse::{DofSpace, SparseComplexBlock};
use crate::workers::map_round_robin;
use crate::C64;

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("tetrahedron {0} is degenerate")]
    DegenerateTet(usize),
    #[error("support plate face {0:?} is degenerate")]
    DegenerateFace([usize; 3]),
    #[error("block spaces differ: {0}")]
    SpaceMismatch(String),
    #[error("mesh has no outer boundary labels; essential conditions cannot be applied")]
    MissingOuterBoundary,
    #[error("coil {coil} support at z = {z} is empty")]
    EmptyCoil { coil: Region, z: f64 },
    #[error("coil {coil} support at z = {z} touches the conductor at node {node}")]
    CoilTouchesConductor { coil: Region, z: f64, node: usize },
    #[error("coil {coil} support at z = {z} reaches the axis at node {node}")]
    CoilOnAxis { coil: Region, z: f64, node: usize },
    #[error("invalid physical parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    /// Conductivity in S/m.
    pub sigma: f64,
    /// Permeability in H/m.
    pub mu: f64,
}

/// Material per region, indexed by [`Region::index`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialTable {
    pub regions: [Material; 6],
}

impl MaterialTable {
    pub fn uniform(m: Material) -> Self {
        MaterialTable { regions: [m; 6] }
    }

    pub fn get(&self, r: Region) -> Material {
        self.regions[r.index()]
    }

    pub fn set(&mut self, r: Region, m: Material) {
        self.regions[r.index()] = m;
    }

    /// Volume-weighted harmonic mean of μ over the given tetrahedra.
    pub fn harmonic_mu(&self, mesh: &Mesh, active: &[bool]) -> f64 {
        let mut vol = 0.0;
        let mut inv = 0.0;
        for (t, tet) in mesh.tets.iter().enumerate() {
            if active[t] {
                let v = mesh.tet_volume(t);
                vol += v;
                inv += v / self.get(tet.region).mu;
            }
        }
        vol / inv
    }
}

/// Conductivity used in the stiffness part of the V–V block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum L22Sigma {
    #[default]
    Region,
    Epsilon,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicsParams {
    /// Angular frequency in rad/s.
    pub omega: f64,
    pub materials: MaterialTable,
    pub mu_tilde: f64,
    pub delta_gauge: f64,
    pub bc_penalty: f64,
    /// Pseudo-conductivity of low-conductivity media.
    pub sigma_eps: f64,
    pub l22_sigma: L22Sigma,
    /// Surface impedance of the support plate; `Some` replaces the plate
    /// volume by the impedance condition on its surface.
    pub ibc: Option<C64>,
    /// Add the `−iωσ_ε` mass term in insulating regions.
    pub vacuum_mass: bool,
}

impl PhysicsParams {
    pub fn validate(&self) -> Result<(), AssemblyError> {
        let bad = |m: String| Err(AssemblyError::InvalidParameter(m));
        if !(self.omega > 0.0) {
            return bad(format!("omega must be positive (got {})", self.omega));
        }
        for r in Region::ALL {
            let m = self.materials.get(r);
            if !(m.sigma >= 0.0 && m.sigma.is_finite()) {
                return bad(format!("{r} conductivity must be non-negative"));
            }
            if !(m.mu > 0.0 && m.mu.is_finite()) {
                return bad(format!("{r} permeability must be positive"));
            }
        }
        if !(self.mu_tilde > 0.0) {
            return bad("mu_tilde must be positive".into());
        }
        if !(self.delta_gauge >= 0.0 && self.sigma_eps >= 0.0 && self.bc_penalty > 0.0) {
            return bad("gauge weight, pseudo-conductivity and penalty must be non-negative".into());
        }
        if let Some(z) = self.ibc {
            if z.norm() == 0.0 || !z.norm().is_finite() {
                return bad("surface impedance must be finite and non-zero".into());
            }
        }
        Ok(())
    }

    /// Whether a region is assembled at all.
    pub fn is_active(&self, r: Region) -> bool {
        !(self.ibc.is_some() && r == Region::Tsp)
    }

    /// Whether a region carries the scalar potential.
    pub fn is_conductor(&self, r: Region) -> bool {
        r.is_conductor() && self.is_active(r)
    }

    /// Conductivity of an active conductor region (σ_ε where the table has 0).
    pub fn conductor_sigma(&self, r: Region) -> f64 {
        let s = self.materials.get(r).sigma;
        if s > 0.0 {
            s
        } else {
            self.sigma_eps
        }
    }

    /// Conductivity in the A–A mass term.
    pub fn mass_sigma(&self, r: Region) -> f64 {
        if self.is_conductor(r) {
            self.conductor_sigma(r)
        } else if self.vacuum_mass {
            self.sigma_eps
        } else {
            0.0
        }
    }

    pub fn conductor_map(&self, mesh: &Mesh) -> Result<ConductorIndexMap, MeshError> {
        mesh.conductor_map_with(|r| self.is_conductor(r))
    }

    pub fn active_tets(&self, mesh: &Mesh) -> Vec<bool> {
        mesh.tets.iter().map(|t| self.is_active(t.region)).collect()
    }
}

/// Selector for [`Assembler::assemble_block`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockKind {
    M11,
    M12,
    M21,
    M22,
    /// P1 mass ⊗ I₃ over the A-dofs, as used by the source term.
    RhsMass,
}

/// Per-part (or merged) blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Blocks {
    pub m11: SparseComplexBlock,
    pub m12: SparseComplexBlock,
    pub m21: SparseComplexBlock,
    pub m22: SparseComplexBlock,
}

impl Blocks {
    pub fn empty(a: DofSpace, v: DofSpace) -> Self {
        Blocks {
            m11: SparseComplexBlock::new(a, a),
            m12: SparseComplexBlock::new(a, v),
            m21: SparseComplexBlock::new(v, a),
            m22: SparseComplexBlock::new(v, v),
        }
    }

    pub fn get(&self, k: BlockKind) -> &SparseComplexBlock {
        match k {
            BlockKind::M12 => &self.m12,
            BlockKind::M21 => &self.m21,
            BlockKind::M22 => &self.m22,
            _ => &self.m11,
        }
    }

    fn canonicalize(&mut self) {
        self.m11.canonicalize();
        self.m12.canonicalize();
        self.m21.canonicalize();
        self.m22.canonicalize();
    }
}

/// A surface impedance face with its owning (active) tetrahedron.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IbcFace {
    pub nodes: [usize; 3],
    pub owner: usize,
}

/// Assembly context for one material configuration.
pub struct Assembler<'a> {
    pub mesh: &'a Mesh,
    pub params: &'a PhysicsParams,
    pub cmap: ConductorIndexMap,
    pub ibc_faces: Vec<IbcFace>,
    geometry: Vec<Option<TetGeometry>>,
}

impl<'a> Assembler<'a> {
    pub fn new(mesh: &'a Mesh, params: &'a PhysicsParams) -> Result<Self, AssemblyError> {
        params.validate()?;
        let cmap = match params.conductor_map(mesh) {
            Err(MeshError::NoConductor) => ConductorIndexMap::empty(mesh.nodes.len()),
            m => m?,
        };
        let mut geometry = Vec::with_capacity(mesh.tets.len());
        for (t, tet) in mesh.tets.iter().enumerate() {
            if params.is_active(tet.region) {
                let g = TetGeometry::new(mesh.tet_points(t))
                    .map_err(|_| AssemblyError::DegenerateTet(t))?;
                geometry.push(Some(g));
            } else {
                geometry.push(None);
            }
        }
        let mut ibc_faces = Vec::new();
        if params.ibc.is_some() {
            let table = mesh.face_table();
            for &(key, a, b) in &table.interior {
                let ra = mesh.tets[a].region;
                let rb = mesh.tets[b].region;
                if Mesh::interface_label(ra, rb) != Some(BoundaryLabel::GammaP) {
                    continue;
                }
                let owner = match (params.is_active(ra), params.is_active(rb)) {
                    (true, true) => a.min(b),
                    (true, false) => a,
                    (false, true) => b,
                    (false, false) => continue,
                };
                ibc_faces.push(IbcFace { nodes: key, owner });
            }
        }
        Ok(Assembler {
            mesh,
            params,
            cmap,
            ibc_faces,
            geometry,
        })
    }

    pub fn a_space(&self) -> DofSpace {
        DofSpace::A {
            n_nodes: self.mesh.nodes.len(),
        }
    }

    pub fn v_space(&self) -> DofSpace {
        DofSpace::V {
            n_conductor: self.cmap.len(),
        }
    }

    pub fn n_dofs(&self) -> usize {
        3 * self.mesh.nodes.len() + self.cmap.len()
    }

    pub fn geometry(&self, t: usize) -> Option<&TetGeometry> {
        self.geometry[t].as_ref()
    }

    /// All four blocks for the given tetrahedra and IBC faces, canonical.
    pub fn assemble_tets(&self, tets: &[usize], faces: &[IbcFace]) -> Result<Blocks, AssemblyError> {
        let mut out = Blocks::empty(self.a_space(), self.v_space());
        let n_cond = tets
            .iter()
            .filter(|&&t| self.params.is_conductor(self.mesh.tets[t].region))
            .count();
        out.m11.triplets.reserve(144 * tets.len());
        out.m12.triplets.reserve(48 * n_cond);
        out.m21.triplets.reserve(48 * n_cond);
        out.m22.triplets.reserve(16 * n_cond);
        let p = self.params;
        for &t in tets {
            let Some(g) = &self.geometry[t] else { continue };
            let tet = &self.mesh.tets[t];
            let mat = p.materials.get(tet.region);
            let n = tet.nodes;
            let k11 = element_l11(g, mat.mu, p.mu_tilde, p.mass_sigma(tet.region), p.omega);
            scatter_aa(&mut out.m11, &n, &n, &k11);
            if p.is_conductor(tet.region) {
                let sigma = p.conductor_sigma(tet.region);
                let v = n.map(|node| self.cmap.local(node).expect("conductor node"));
                let k12 = element_l12(g, sigma);
                let k21 = element_l21(g, sigma);
                let stiff = match p.l22_sigma {
                    L22Sigma::Region => sigma,
                    L22Sigma::Epsilon => p.sigma_eps,
                };
                let k22 = element_l22(g, stiff, sigma, p.omega, p.delta_gauge, mat.mu);
                for a in 0..4 {
                    for c in 0..3 {
                        for b in 0..4 {
                            out.m12.push(3 * n[a] + c, v[b], k12.data[3 * a + c][b]);
                            out.m21.push(v[b], 3 * n[a] + c, k21.data[b][3 * a + c]);
                        }
                    }
                    for b in 0..4 {
                        out.m22.push(v[a], v[b], k22.data[a][b]);
                    }
                }
            }
        }
        if let Some(z) = p.ibc {
            for f in faces {
                let pts = f.nodes.map(|n| self.mesh.nodes[n]);
                let tri = TriGeometry::new(pts).map_err(|_| AssemblyError::DegenerateFace(f.nodes))?;
                let m = element_ibc(&tri, z, p.omega);
                let n = f.nodes;
                let v = n.map(|node| self.cmap.local(node));
                for a in 0..3 {
                    for c in 0..3 {
                        for b in 0..3 {
                            for d in 0..3 {
                                out.m11.push(3 * n[a] + c, 3 * n[b] + d, m.aa.data[3 * a + c][3 * b + d]);
                            }
                            if let Some(vb) = v[b] {
                                out.m12.push(3 * n[a] + c, vb, m.av.data[3 * a + c][b]);
                            }
                            if let Some(va) = v[a] {
                                out.m21.push(va, 3 * n[b] + c, m.va.data[a][3 * b + c]);
                            }
                        }
                    }
                    for b in 0..3 {
                        if let (Some(va), Some(vb)) = (v[a], v[b]) {
                            out.m22.push(va, vb, m.vv.data[a][b]);
                        }
                    }
                }
            }
        }
        out.canonicalize();
        Ok(out)
    }

    /// Blocks of one part: its tetrahedra and the IBC faces it owns.
    pub fn assemble_part(&self, map: &PartitionMap, part: usize) -> Result<Blocks, AssemblyError> {
        let tets: Vec<usize> = (0..self.mesh.tets.len())
            .filter(|&t| map.part_of[t] == part)
            .collect();
        let faces: Vec<IbcFace> = self
            .ibc_faces
            .iter()
            .copied()
            .filter(|f| map.part_of[f.owner] == part)
            .collect();
        self.assemble_tets(&tets, &faces)
    }

    pub fn assemble_block(
        &self,
        map: &PartitionMap,
        part: usize,
        kind: BlockKind,
    ) -> Result<SparseComplexBlock, AssemblyError> {
        if kind == BlockKind::RhsMass {
            let mut b = SparseComplexBlock::new(self.a_space(), self.a_space());
            for t in (0..self.mesh.tets.len()).filter(|&t| map.part_of[t] == part) {
                let Some(g) = &self.geometry[t] else { continue };
                let n = self.mesh.tets[t].nodes;
                for a in 0..4 {
                    for bb in 0..4 {
                        let m = C64::new(g.mass(a, bb), 0.0);
                        for c in 0..3 {
                            b.push(3 * n[a] + c, 3 * n[bb] + c, m);
                        }
                    }
                }
            }
            return Ok(b.canonicalized());
        }
        let blocks = self.assemble_part(map, part)?;
        Ok(match kind {
            BlockKind::M12 => blocks.m12,
            BlockKind::M21 => blocks.m21,
            BlockKind::M22 => blocks.m22,
            _ => blocks.m11,
        })
    }

    /// Assemble every part with `workers` threads and reduce in part order.
    pub fn assemble_parallel(
        &self,
        map: &PartitionMap,
        workers: usize,
    ) -> Result<(Blocks, AssemblyTiming), AssemblyError> {
        let t0 = now();
        let parts: Vec<usize> = (0..map.parts).collect();
        let results = map_round_robin(parts, workers, |_, p| self.assemble_part(map, p));
        let mut per_part = Vec::with_capacity(results.len());
        for r in results {
            per_part.push(r?);
        }
        let t_assemble = now() - t0;
        let t1 = now();
        let merged = reduce_parts(per_part)?;
        let t_reduce = now() - t1;
        Ok((
            merged,
            AssemblyTiming {
                assemble: t_assemble,
                reduce: t_reduce,
            },
        ))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AssemblyTiming {
    pub assemble: f64,
    pub reduce: f64,
}

pub(crate) fn now() -> f64 {
    #[cfg(not(target_arch = "wasm32"))]
    {
        use std::sync::OnceLock;
        static START: OnceLock<std::time::Instant> = OnceLock::new();
        START.get_or_init(std::time::Instant::now).elapsed().as_secs_f64()
    }
    #[cfg(target_arch = "wasm32")]
    {
        0.0
    }
}

fn scatter_aa(b: &mut SparseComplexBlock, rows: &[usize; 4], cols: &[usize; 4], m: &ElementMatrix<12, 12>) {
    for a in 0..4 {
        for c in 0..3 {
            let i = 3 * rows[a] + c;
            let row = &m.data[3 * a + c];
            for bb in 0..4 {
                for d in 0..3 {
                    b.push(i, 3 * cols[bb] + d, row[3 * bb + d]);
                }
            }
        }
    }
}

/// Merge blocks: concatenate in list order, then sum duplicates.
pub fn reduce_blocks(blocks: Vec<SparseComplexBlock>) -> Result<SparseComplexBlock, AssemblyError> {
    let mut it = blocks.into_iter();
    let Some(mut first) = it.next() else {
        return Err(AssemblyError::SpaceMismatch("no blocks to reduce".into()));
    };
    for b in it {
        if b.rows != first.rows || b.cols != first.cols {
            return Err(AssemblyError::SpaceMismatch(format!(
                "{:?}×{:?} vs {:?}×{:?}",
                first.rows, first.cols, b.rows, b.cols
            )));
        }
        for t in b.triplets {
            first.push(t.0, t.1, t.2);
        }
    }
    first.canonicalize();
    Ok(first)
}

pub fn reduce_parts(parts: Vec<Blocks>) -> Result<Blocks, AssemblyError> {
    let mut m11 = Vec::with_capacity(parts.len());
    let mut m12 = Vec::with_capacity(parts.len());
    let mut m21 = Vec::with_capacity(parts.len());
    let mut m22 = Vec::with_capacity(parts.len());
    for p in parts {
        m11.push(p.m11);
        m12.push(p.m12);
        m21.push(p.m21);
        m22.push(p.m22);
    }
    Ok(Blocks {
        m11: reduce_blocks(m11)?,
        m12: reduce_blocks(m12)?,
        m21: reduce_blocks(m21)?,
        m22: reduce_blocks(m22)?,
    })
}

/// Merged blocks with essential conditions applied.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSystem {
    pub blocks: Blocks,
    pub n_nodes: usize,
    pub n_conductor: usize,
    /// Pinned dof → prescribed value (global numbering).
    pub pins: BTreeMap<usize, C64>,
    pub penalty: f64,
}

impl BlockSystem {
    pub fn new(blocks: Blocks, n_nodes: usize, n_conductor: usize, penalty: f64) -> Self {
        BlockSystem {
            blocks,
            n_nodes,
            n_conductor,
            pins: BTreeMap::new(),
            penalty,
        }
    }

    pub fn n_dofs(&self) -> usize {
        3 * self.n_nodes + self.n_conductor
    }

    /// Pin an A-dof: diagonal overwritten with the penalty, off-diagonal
    /// entries kept, right-hand side set to `penalty · value`.
    pub fn pin(&mut self, dof: usize, value: C64) {
        assert!(dof < 3 * self.n_nodes, "only vector potential dofs are pinned");
        self.pins.insert(dof, value);
    }

    /// Write the penalty diagonal of every pinned dof into M11.
    pub fn finalize_pins(&mut self) {
        let pen = C64::new(self.penalty, 0.0);
        let mut seen = std::collections::BTreeSet::new();
        for e in &mut self.blocks.m11.triplets {
            if e.0 == e.1 && self.pins.contains_key(&e.0) {
                e.2 = pen;
                seen.insert(e.0);
            }
        }
        let missing: Vec<usize> = self
            .pins
            .keys()
            .copied()
            .filter(|d| !seen.contains(d))
            .collect();
        if !missing.is_empty() {
            for d in missing {
                self.blocks.m11.push(d, d, pen);
            }
            self.blocks.m11.canonicalize();
        }
    }

    /// Impose pinned values on a right-hand side.
    pub fn apply_pins(&self, rhs: &mut [C64]) {
        for (&d, &v) in &self.pins {
            rhs[d] = v * self.penalty;
        }
    }
}

/// Pin the outer-boundary dofs: z on the caps, x and y on the lateral
/// surface. Nodes outside every assembled tetrahedron are pinned entirely.
pub fn apply_essential_bc(
    blocks: Blocks,
    mesh: &Mesh,
    params: &PhysicsParams,
    n_conductor: usize,
) -> Result<BlockSystem, AssemblyError> {
    let mut sys = BlockSystem::new(blocks, mesh.nodes.len(), n_conductor, params.bc_penalty);
    let zero = C64::new(0.0, 0.0);
    let mut any_outer = false;
    for f in &mesh.boundary_faces {
        let comps: &[usize] = match f.label {
            BoundaryLabel::OuterTop | BoundaryLabel::OuterBottom => &[2],
            BoundaryLabel::OuterLateral => &[0, 1],
            _ => continue,
        };
        any_outer = true;
        for &n in &f.nodes {
            for &c in comps {
                sys.pin(3 * n + c, zero);
            }
        }
    }
    if !any_outer {
        return Err(AssemblyError::MissingOuterBoundary);
    }
    let mut used = vec![false; mesh.nodes.len()];
    for tet in &mesh.tets {
        if params.is_active(tet.region) {
            for &n in &tet.nodes {
                used[n] = true;
            }
        }
    }
    for (n, &u) in used.iter().enumerate() {
        if !u {
            for c in 0..3 {
                sys.pin(3 * n + c, zero);
            }
        }
    }
    sys.finalize_pins();
    Ok(sys)
}

/// Tetrahedra carrying the source current of one coil at one probe position.
#[derive(Debug, Clone, PartialEq)]
pub struct CoilSupport {
    pub coil: Region,
    pub z: f64,
    pub tets: Vec<usize>,
}

impl CoilSupport {
    /// Non-conducting tetrahedra whose mean vertex radius lies in the coil's
    /// radial band and whose centroid lies in its axial window.
    pub fn locate(
        mesh: &Mesh,
        params: &PhysicsParams,
        coil_geom: &CoilGeometry,
        coil: Region,
        z: f64,
    ) -> Result<Self, AssemblyError> {
        let (z0, z1) = coil_geom.window(coil, z);
        let tets: Vec<usize> = (0..mesh.tets.len())
            .filter(|&t| {
                let r = mesh.tets[t].region;
                if r.is_conductor() || !params.is_active(r) {
                    return false;
                }
                let c = mesh.tet_centroid(t);
                let r = mesh.tets[t]
                    .nodes
                    .iter()
                    .map(|&n| mesh.nodes[n][0].hypot(mesh.nodes[n][1]))
                    .sum::<f64>()
                    / 4.0;
                coil_geom.contains_radius(r) && c[2] > z0 && c[2] < z1
            })
            .collect();
        if tets.is_empty() {
            return Err(AssemblyError::EmptyCoil { coil, z });
        }
        let mut conductor_node = vec![false; mesh.nodes.len()];
        for tet in &mesh.tets {
            if params.is_conductor(tet.region) {
                for &n in &tet.nodes {
                    conductor_node[n] = true;
                }
            }
        }
        for &t in &tets {
            for &n in &mesh.tets[t].nodes {
                if conductor_node[n] {
                    return Err(AssemblyError::CoilTouchesConductor { coil, z, node: n });
                }
                let p = mesh.nodes[n];
                if p[0].hypot(p[1]) == 0.0 {
                    return Err(AssemblyError::CoilOnAxis { coil, z, node: n });
                }
            }
        }
        Ok(CoilSupport { coil, z, tets })
    }
}

/// Azimuthal source current `J0 (−y, x, 0) / r`.
pub fn coil_current(p: [f64; 3], j0: f64) -> [f64; 3] {
    let r = p[0].hypot(p[1]);
    [-j0 * p[1] / r, j0 * p[0] / r, 0.0]
}

/// Source vector over all dofs: P1 mass applied to the nodal interpolant of
/// the coil current, zero on the scalar potential dofs.
pub fn assemble_rhs(mesh: &Mesh, support: &CoilSupport, j0: f64, n_dofs: usize) -> Vec<C64> {
    let mut rhs = vec![C64::new(0.0, 0.0); n_dofs];
    for &t in &support.tets {
        let n = mesh.tets[t].nodes;
        let vol = mesh.tet_volume(t);
        let j = n.map(|k| coil_current(mesh.nodes[k], j0));
        for a in 0..4 {
            for b in 0..4 {
                let m = vol * if a == b { 0.1 } else { 0.05 };
                for c in 0..3 {
                    rhs[3 * n[a] + c].re += m * j[b][c];
                }
            }
        }
    }
    rhs
}
