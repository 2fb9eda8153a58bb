//! Probe sweep: one mesh for every position, one factorization per material
//! configuration, four solves per position, signals sorted by z.

use std::fmt::{self, Write as _};
use std::path::Path;

use crate::assembly::{
    apply_essential_bc, assemble_rhs, now, Assembler, BlockSystem, Blocks, CoilSupport, L22Sigma,
    MaterialTable, PhysicsParams,
};
use crate::config::{MeshSource, MuTilde, RunConfig, SolverConfig, SolverKind, TspMode};
use crate::mesh::{generate_tube_mesh, load_mesh, CoilGeometry, ConductorIndexMap, Mesh, Region};
use crate::partition::partition_tets;
use crate::signals::{
    delta_impedance, surface_impedance, DefectContrast, DeltaZ, PotentialSolution, SignalPoint,
};
use crate::solver::{build_global, dof_groups, factorize_with, solve_iterative, Factorization, SolverError};
use crate::sparse::CsrMatrix;
use crate::workers::map_round_robin;
use crate::{Error, Result, C64};

/// Everything `run_scan` needs besides the mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    /// Strictly increasing probe positions (m).
    pub positions: Vec<f64>,
    pub coil: CoilGeometry,
    pub omega: f64,
    pub actual: MaterialTable,
    pub reference: MaterialTable,
    pub mu_tilde: MuTilde,
    pub delta_gauge: f64,
    pub bc_penalty: f64,
    pub sigma_eps: f64,
    pub l22_sigma: L22Sigma,
    pub vacuum_mass: bool,
    pub tsp_ibc: bool,
    pub conjugate_pairing: bool,
    pub current_density: f64,
    pub solver: SolverConfig,
    pub workers: usize,
    pub partitions: usize,
    pub seed: u64,
    pub config_hash: String,
}

impl ScanConfig {
    pub fn from_run(c: &RunConfig) -> Self {
        ScanConfig {
            positions: c.positions(),
            coil: c.geometry.coil,
            omega: c.omega(),
            actual: c.material_table(false),
            reference: c.material_table(true),
            mu_tilde: c.materials.mu_tilde,
            delta_gauge: c.materials.delta_gauge,
            bc_penalty: c.materials.bc_penalty,
            sigma_eps: c.sigma_eps(),
            l22_sigma: c.materials.l22_sigma,
            vacuum_mass: c.materials.vacuum_mass,
            tsp_ibc: c.geometry.tsp == TspMode::Ibc,
            conjugate_pairing: c.materials.conjugate_pairing,
            current_density: c.current_density,
            solver: c.solver.clone(),
            workers: c.workers,
            partitions: c.partitions,
            seed: c.seed,
            config_hash: c.hash(),
        }
    }

    /// Physical parameters of the actual or the reference configuration.
    pub fn physics(&self, mesh: &Mesh, reference: bool) -> Result<PhysicsParams> {
        let materials = if reference { self.reference } else { self.actual };
        let ibc = if self.tsp_ibc {
            let tsp = materials.get(Region::Tsp);
            Some(surface_impedance(self.omega, tsp.mu, tsp.sigma)?)
        } else {
            None
        };
        let mut p = PhysicsParams {
            omega: self.omega,
            materials,
            mu_tilde: 1.0,
            delta_gauge: self.delta_gauge,
            bc_penalty: self.bc_penalty,
            sigma_eps: self.sigma_eps,
            l22_sigma: self.l22_sigma,
            ibc,
            vacuum_mass: self.vacuum_mass,
        };
        p.mu_tilde = match self.mu_tilde {
            MuTilde::Value(v) => v,
            MuTilde::Harmonic => materials.harmonic_mu(mesh, &p.active_tets(mesh)),
        };
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.positions.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Other("probe positions must be strictly increasing".into()));
        }
        if self.workers == 0 || self.partitions == 0 {
            return Err(Error::Other("workers and partitions must be at least 1".into()));
        }
        Ok(())
    }
}

/// Wall-clock accounting of one scan, in seconds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Timings {
    /// Wall time from the start of partitioning to the last factorization.
    pub prepare: f64,
    pub partition: f64,
    pub assemble: f64,
    pub reduce: f64,
    pub factorize: f64,
    /// Wall time of the position loop.
    pub solve: f64,
    pub total: f64,
    /// Per-position time: four solves plus signal evaluation.
    pub per_position: Vec<f64>,
}

impl Timings {
    pub fn median_position(&self) -> f64 {
        if self.per_position.is_empty() {
            return 0.0;
        }
        let mut v = self.per_position.clone();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceTrace {
    /// Sorted by z.
    pub points: Vec<SignalPoint>,
    /// One note per failed position.
    pub notes: Vec<String>,
    pub timings: Timings,
    pub factorizations: usize,
    pub workers: usize,
    pub n_tets: usize,
    pub n_dofs: usize,
    pub config_hash: String,
}

/// Assembled and, for the direct path, factorized system of one material
/// configuration.
struct Prepared {
    matrix: CsrMatrix,
    factors: Option<Factorization>,
    pins: BlockSystem,
}

impl Prepared {
    fn solve(&self, b: &[C64], solver: &SolverConfig) -> std::result::Result<Vec<C64>, SolverError> {
        match &self.factors {
            Some(f) => f.solve(b).map(|r| r.x),
            None => {
                let r = solve_iterative(&self.matrix, b, solver.gmres())?;
                if r.converged {
                    Ok(r.x)
                } else {
                    Err(SolverError::Residual {
                        residual: r.residual,
                        tolerance: solver.tol,
                    })
                }
            }
        }
    }
}

/// Load or generate the mesh named by a run configuration.
pub fn mesh_for(c: &RunConfig) -> Result<Mesh> {
    Ok(match &c.mesh.source {
        MeshSource::Generate => generate_tube_mesh(&c.tube_geometry())?,
        MeshSource::File(p) => load_mesh(p, &c.mesh.tags)?,
    })
}

/// Mesh, scan configuration and sweep for a run configuration.
pub fn run(c: &RunConfig) -> Result<ImpedanceTrace> {
    let mesh = mesh_for(c)?;
    run_scan(&mesh, &ScanConfig::from_run(c))
}

/// The full sweep. Stage errors abort; a solver failure at one position
/// marks that position failed and the scan continues.
pub fn run_scan(mesh: &Mesh, cfg: &ScanConfig) -> Result<ImpedanceTrace> {
    let t_start = now();
    let prepared = PreparedScan::new(mesh, cfg)?;
    let sweep = prepared.sweep(&cfg.positions, cfg.workers)?;
    let mut trace = prepared.trace(sweep);
    trace.timings.total = now() - t_start;
    Ok(trace)
}

/// Result of sweeping a list of positions against prepared systems.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    /// Sorted by z.
    pub points: Vec<SignalPoint>,
    pub notes: Vec<String>,
    /// Wall time of the whole position loop.
    pub elapsed: f64,
    /// Per-position wall time, in position order.
    pub per_position: Vec<f64>,
}

/// Mesh partitioned, both material configurations assembled, boundary
/// conditions applied and (direct path) factorized: ready for any number of
/// probe positions.
pub struct PreparedScan<'m> {
    mesh: &'m Mesh,
    cfg: ScanConfig,
    actual: PhysicsParams,
    systems: Vec<Prepared>,
    cmap: ConductorIndexMap,
    contrast: DefectContrast,
    pub factorizations: usize,
    /// Partition, assembly, reduction and factorization times.
    pub timings: Timings,
}

impl<'m> PreparedScan<'m> {
    pub fn new(mesh: &'m Mesh, cfg: &ScanConfig) -> Result<Self> {
        cfg.validate()?;
        let t_prepare = now();
        let mut timings = Timings::default();
        let t0 = now();
        let map = partition_tets(mesh, cfg.partitions, cfg.seed)?;
        timings.partition = now() - t0;

        let actual = cfg.physics(mesh, false)?;
        let reference = cfg.physics(mesh, true)?;
        // the scan needs a conductor; assembly alone does not
        actual.conductor_map(mesh)?;
        // identical configurations share one system; without defect
        // tetrahedra the two configurations coincide
        let has_defect = mesh.count_region(Region::Defect) > 0;
        let configs: Vec<&PhysicsParams> = if has_defect && actual != reference {
            vec![&actual, &reference]
        } else {
            vec![&actual]
        };

        let mut systems = Vec::with_capacity(configs.len());
        let mut cmap: Option<ConductorIndexMap> = None;
        let mut factorizations = 0;
        for params in configs {
            let asm = Assembler::new(mesh, params)?;
            let (blocks, t) = asm.assemble_parallel(&map, cfg.workers)?;
            timings.assemble += t.assemble;
            timings.reduce += t.reduce;
            let sys = apply_essential_bc(blocks, mesh, params, asm.cmap.len())?;
            let matrix = build_global(&sys)?;
            let pins = BlockSystem {
                blocks: Blocks::empty(asm.a_space(), asm.v_space()),
                ..sys
            };
            let factors = match cfg.solver.kind {
                SolverKind::Direct => {
                    let t1 = now();
                    let groups = dof_groups(mesh.nodes.len(), &asm.cmap);
                    let f = factorize_with(&matrix, Some(&groups), Some(&mesh.nodes))?;
                    let dt = now() - t1;
                    timings.factorize += dt;
                    factorizations += 1;
                    log::info!(
                        "factorization {factorizations}: n = {}, factor nnz = {}, largest front = {}, {:.3e} flops in {:.2} s",
                        f.n(),
                        f.factor_nnz(),
                        f.largest_front(),
                        f.flops(),
                        dt
                    );
                    Some(f)
                }
                SolverKind::Iterative => None,
            };
            if cmap.is_none() {
                cmap = Some(asm.cmap.clone());
            }
            systems.push(Prepared {
                matrix,
                factors,
                pins,
            });
        }
        timings.prepare = now() - t_prepare;
        let contrast = DefectContrast {
            mu_d: cfg.actual.get(Region::Defect).mu,
            mu_eps: cfg.reference.get(Region::Defect).mu,
            sigma_d: cfg.actual.get(Region::Defect).sigma,
            sigma_eps: cfg.reference.get(Region::Defect).sigma,
            conjugate: cfg.conjugate_pairing,
        };
        Ok(PreparedScan {
            mesh,
            cfg: cfg.clone(),
            actual,
            systems,
            cmap: cmap.expect("at least one configuration"),
            contrast,
            factorizations,
            timings,
        })
    }

    pub fn n_dofs(&self) -> usize {
        self.systems[0].matrix.n_rows
    }

    /// Impedance variations at one position: one solve per coil and
    /// configuration.
    pub fn position(&self, coils: &[CoilSupport; 2]) -> Result<DeltaZ> {
        let mesh = self.mesh;
        let n_dofs = self.n_dofs();
        let n_nodes = mesh.nodes.len();
        let omega = self.cfg.omega;
        let reference = self.systems.last().expect("at least one system");
        let mut act = Vec::with_capacity(2);
        let mut refs = Vec::with_capacity(2);
        for coil in coils {
            let rhs = assemble_rhs(mesh, coil, self.cfg.current_density, n_dofs);
            for (sys, out) in [(&self.systems[0], &mut act), (reference, &mut refs)] {
                let mut b = rhs.clone();
                sys.pins.apply_pins(&mut b);
                let x = sys.solve(&b, &self.cfg.solver)?;
                out.push(PotentialSolution::from_vector(&x, n_nodes, self.cmap.len(), omega)?);
            }
        }
        let mut dz = [[C64::new(0.0, 0.0); 2]; 2];
        for k in 0..2 {
            for l in 0..2 {
                dz[k][l] = delta_impedance(&act[k], &refs[l], mesh, &self.cmap, &self.contrast)?;
            }
        }
        Ok(DeltaZ(dz))
    }

    /// Solve every position, distributing positions round-robin over
    /// `workers` threads.
    pub fn sweep(&self, positions: &[f64], workers: usize) -> Result<Sweep> {
        let mut supports = Vec::with_capacity(positions.len());
        for &z in positions {
            let c1 = CoilSupport::locate(self.mesh, &self.actual, &self.cfg.coil, Region::Coil1, z)?;
            let c2 = CoilSupport::locate(self.mesh, &self.actual, &self.cfg.coil, Region::Coil2, z)?;
            supports.push((z, [c1, c2]));
        }
        let t0 = now();
        let results = map_round_robin(supports, workers, |_, (z, coils)| {
            let tp = now();
            let r = self.position(&coils);
            (z, r, now() - tp)
        });
        let elapsed = now() - t0;
        let mut points = Vec::with_capacity(results.len());
        let mut notes = Vec::new();
        let mut per_position = Vec::with_capacity(results.len());
        for (z, r, dt) in results {
            per_position.push(dt);
            match r {
                Ok(dz) => points.push(SignalPoint::new(z, dz)),
                Err(e) => {
                    log::warn!("position z = {z}: {e}");
                    notes.push(format!("z = {z:.11e}: {e}"));
                    points.push(SignalPoint::failed(z));
                }
            }
        }
        points.sort_by(|a, b| a.z.total_cmp(&b.z));
        Ok(Sweep {
            points,
            notes,
            elapsed,
            per_position,
        })
    }

    /// Trace of a sweep, carrying this preparation's timings.
    pub fn trace(&self, sweep: Sweep) -> ImpedanceTrace {
        let mut timings = self.timings.clone();
        timings.solve = sweep.elapsed;
        timings.per_position = sweep.per_position;
        timings.total = timings.prepare + timings.solve;
        ImpedanceTrace {
            points: sweep.points,
            notes: sweep.notes,
            timings,
            factorizations: self.factorizations,
            workers: self.cfg.workers,
            n_tets: self.mesh.tets.len(),
            n_dofs: self.n_dofs(),
            config_hash: self.cfg.config_hash.clone(),
        }
    }
}

pub const CSV_COLUMNS: [&str; 13] = [
    "z_m", "re_Z11", "im_Z11", "re_Z12", "im_Z12", "re_Z21", "im_Z21", "re_Z22", "im_Z22",
    "re_ZFA", "im_ZFA", "re_ZF3", "im_ZF3",
];

fn invalid(path: &Path, msg: String) -> Error {
    Error::io(
        path.display().to_string(),
        std::io::Error::new(std::io::ErrorKind::InvalidData, msg),
    )
}

impl ImpedanceTrace {
    /// CSV text. Lines starting with `# timing` carry wall-clock data and
    /// are the only lines that differ between identical runs.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# ectfem impedance trace");
        let _ = writeln!(s, "# config_hash = {}", self.config_hash);
        let _ = writeln!(s, "# tets = {}", self.n_tets);
        let _ = writeln!(s, "# dofs = {}", self.n_dofs);
        let _ = writeln!(s, "# factorizations = {}", self.factorizations);
        for n in &self.notes {
            let _ = writeln!(s, "# failed {n}");
        }
        let t = &self.timings;
        let _ = writeln!(s, "# timing workers = {}", self.workers);
        for (k, v) in [
            ("prepare_s", t.prepare),
            ("partition_s", t.partition),
            ("assemble_s", t.assemble),
            ("reduce_s", t.reduce),
            ("factorize_s", t.factorize),
            ("solve_s", t.solve),
            ("total_s", t.total),
            ("median_position_s", t.median_position()),
        ] {
            let _ = writeln!(s, "# timing {k} = {v:.6e}");
        }
        s.push_str(&CSV_COLUMNS.join(","));
        s.push('\n');
        let mut pts = self.points.clone();
        pts.sort_by(|a, b| a.z.total_cmp(&b.z));
        for p in &pts {
            let d = p.delta.0;
            let vals = [
                p.z, d[0][0].re, d[0][0].im, d[0][1].re, d[0][1].im, d[1][0].re, d[1][0].im,
                d[1][1].re, d[1][1].im, p.z_fa.re, p.z_fa.im, p.z_f3.re, p.z_f3.im,
            ];
            let row: Vec<String> = vals.iter().map(|v| format!("{v:.11e}")).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn parse_csv(text: &str, path: &Path) -> Result<Self> {
        let mut tr = ImpedanceTrace {
            points: Vec::new(),
            notes: Vec::new(),
            timings: Timings::default(),
            factorizations: 0,
            workers: 1,
            n_tets: 0,
            n_dofs: 0,
            config_hash: String::new(),
        };
        let mut header = false;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let meta = meta.trim();
                if let Some(n) = meta.strip_prefix("failed ") {
                    tr.notes.push(n.to_string());
                    continue;
                }
                let timing = meta.strip_prefix("timing ");
                let Some((k, v)) = timing.unwrap_or(meta).split_once('=') else {
                    continue;
                };
                let (k, v) = (k.trim(), v.trim());
                let num = || v.parse::<f64>().ok();
                match (timing.is_some(), k) {
                    (false, "config_hash") => tr.config_hash = v.to_string(),
                    (false, "tets") => tr.n_tets = v.parse().unwrap_or(0),
                    (false, "dofs") => tr.n_dofs = v.parse().unwrap_or(0),
                    (false, "factorizations") => tr.factorizations = v.parse().unwrap_or(0),
                    (true, "workers") => tr.workers = v.parse().unwrap_or(1),
                    (true, "prepare_s") => tr.timings.prepare = num().unwrap_or(0.0),
                    (true, "partition_s") => tr.timings.partition = num().unwrap_or(0.0),
                    (true, "assemble_s") => tr.timings.assemble = num().unwrap_or(0.0),
                    (true, "reduce_s") => tr.timings.reduce = num().unwrap_or(0.0),
                    (true, "factorize_s") => tr.timings.factorize = num().unwrap_or(0.0),
                    (true, "solve_s") => tr.timings.solve = num().unwrap_or(0.0),
                    (true, "total_s") => tr.timings.total = num().unwrap_or(0.0),
                    _ => {}
                }
                continue;
            }
            if !header {
                let cols: Vec<&str> = line.split(',').map(str::trim).collect();
                if cols != CSV_COLUMNS {
                    return Err(invalid(path, format!("line {}: unexpected header", i + 1)));
                }
                header = true;
                continue;
            }
            let vals = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| invalid(path, format!("line {}: {e}", i + 1)))?;
            if vals.len() != CSV_COLUMNS.len() {
                return Err(invalid(path, format!("line {}: expected 13 values", i + 1)));
            }
            let c = |k: usize| C64::new(vals[k], vals[k + 1]);
            tr.points.push(SignalPoint {
                z: vals[0],
                delta: DeltaZ([[c(1), c(3)], [c(5), c(7)]]),
                z_fa: c(9),
                z_f3: c(11),
            });
        }
        if !header {
            return Err(invalid(path, "missing column header".into()));
        }
        Ok(tr)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse_csv(&text, path)
    }

    /// Largest relative deviation between matching signal values of two
    /// traces (scaled by the largest magnitude of each column).
    pub fn max_deviation(&self, other: &ImpedanceTrace) -> Result<f64> {
        if self.points.len() != other.points.len() {
            return Err(Error::Other(format!(
                "traces have {} and {} positions",
                self.points.len(),
                other.points.len()
            )));
        }
        let cols = |p: &SignalPoint| {
            let d = p.delta.0;
            [d[0][0], d[0][1], d[1][0], d[1][1], p.z_fa, p.z_f3]
        };
        let mut scale = [0.0f64; 6];
        for p in self.points.iter().chain(&other.points) {
            for (s, v) in scale.iter_mut().zip(cols(p)) {
                if v.norm().is_finite() {
                    *s = s.max(v.norm());
                }
            }
        }
        // positions survive the CSV round trip to 12 significant digits
        let z_tol = 1e-10
            * self
                .points
                .iter()
                .chain(&other.points)
                .map(|p| p.z.abs())
                .fold(f64::MIN_POSITIVE, f64::max);
        let mut dev = 0.0f64;
        for (a, b) in self.points.iter().zip(&other.points) {
            if (a.z - b.z).abs() > z_tol {
                return Err(Error::Other(format!("positions differ: {} vs {}", a.z, b.z)));
            }
            for ((x, y), s) in cols(a).into_iter().zip(cols(b)).zip(scale) {
                let d = (x - y).norm();
                if d.is_nan() {
                    if !(x.re.is_nan() && y.re.is_nan()) {
                        return Ok(f64::INFINITY);
                    }
                    continue;
                }
                if s > 0.0 {
                    dev = dev.max(d / s);
                }
            }
        }
        Ok(dev)
    }
}

/// One row of the speedup table.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupRow {
    pub workers: usize,
    pub assemble: f64,
    pub solve: f64,
    pub total: f64,
    /// `t_serial / t_p` for assembly, position loop and total.
    pub speedup_assemble: f64,
    pub speedup_solve: f64,
    pub speedup_total: f64,
    /// The inverse ratio `t_p / t_serial`.
    pub ratio_total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupReport {
    pub rows: Vec<SpeedupRow>,
}

/// Speedups relative to the run with the fewest workers.
pub fn speedup_report(traces: &[ImpedanceTrace]) -> Result<SpeedupReport> {
    let Some(first) = traces.first() else {
        return Ok(SpeedupReport { rows: Vec::new() });
    };
    if let Some(t) = traces.iter().find(|t| t.config_hash != first.config_hash) {
        return Err(Error::Other(format!(
            "mismatched configurations: {} vs {}",
            first.config_hash, t.config_hash
        )));
    }
    let mut sorted: Vec<&ImpedanceTrace> = traces.iter().collect();
    sorted.sort_by_key(|t| t.workers);
    let base = &sorted[0].timings;
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { f64::NAN };
    let rows = sorted
        .iter()
        .map(|t| {
            let tm = &t.timings;
            SpeedupRow {
                workers: t.workers,
                assemble: tm.assemble,
                solve: tm.solve,
                total: tm.total,
                speedup_assemble: ratio(base.assemble, tm.assemble),
                speedup_solve: ratio(base.solve, tm.solve),
                speedup_total: ratio(base.total, tm.total),
                ratio_total: ratio(tm.total, base.total),
            }
        })
        .collect();
    Ok(SpeedupReport { rows })
}

impl fmt::Display for SpeedupReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>7} {:>12} {:>12} {:>12} {:>9} {:>9} {:>9} {:>11}",
            "workers", "assemble_s", "solve_s", "total_s", "S_asm", "S_solve", "S_total", "t_p/t_ser"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>7} {:>12.4} {:>12.4} {:>12.4} {:>9.3} {:>9.3} {:>9.3} {:>11.3}",
                r.workers,
                r.assemble,
                r.solve,
                r.total,
                r.speedup_assemble,
                r.speedup_solve,
                r.speedup_total,
                r.ratio_total
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(z: f64, v: f64) -> SignalPoint {
        let c = C64::new(v, -v);
        SignalPoint::new(z, DeltaZ([[c, c * 2.0], [c * 3.0, c * 0.5]]))
    }

    fn trace(points: Vec<SignalPoint>) -> ImpedanceTrace {
        ImpedanceTrace {
            points,
            notes: Vec::new(),
            timings: Timings::default(),
            factorizations: 2,
            workers: 1,
            n_tets: 10,
            n_dofs: 40,
            config_hash: "abc".into(),
        }
    }

    #[test]
    fn empty_trace_is_header_only() {
        let t = trace(Vec::new());
        let csv = t.to_csv();
        let data: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data, vec![CSV_COLUMNS.join(",")]);
    }

    #[test]
    fn rows_sorted_and_round_trip() {
        let t = trace(vec![point(0.003, 1.5), point(-0.001, 0.25), point(0.001, -2.0)]);
        let back = ImpedanceTrace::parse_csv(&t.to_csv(), Path::new("mem")).unwrap();
        let zs: Vec<f64> = back.points.iter().map(|p| p.z).collect();
        assert_eq!(zs, vec![-0.001, 0.001, 0.003]);
        let mut sorted = t.clone();
        sorted.points.sort_by(|a, b| a.z.total_cmp(&b.z));
        assert!(sorted.max_deviation(&back).unwrap() < 1e-11);
        assert_eq!(back.config_hash, "abc");
        assert_eq!(back.factorizations, 2);
    }

    #[test]
    fn failed_rows_are_nan() {
        let mut t = trace(vec![SignalPoint::failed(0.0)]);
        t.notes.push("z = 0: solver".into());
        let back = ImpedanceTrace::parse_csv(&t.to_csv(), Path::new("mem")).unwrap();
        assert!(back.points[0].is_failed());
        assert_eq!(back.notes.len(), 1);
    }

    #[test]
    fn serial_speedup_is_one() {
        let mut t = trace(Vec::new());
        t.timings.assemble = 2.0;
        t.timings.solve = 1.0;
        t.timings.total = 4.0;
        let r = speedup_report(&[t]).unwrap();
        assert_eq!(r.rows[0].speedup_total, 1.0);
        assert_eq!(r.rows[0].speedup_assemble, 1.0);
    }

    #[test]
    fn mismatched_hash_rejected() {
        let a = trace(Vec::new());
        let mut b = trace(Vec::new());
        b.config_hash = "def".into();
        assert!(speedup_report(&[a, b]).is_err());
    }
}
