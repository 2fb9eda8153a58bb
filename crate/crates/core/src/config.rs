//! Run configuration: a flat `key = value` text format with `[section]`
//! headers. SI units throughout, except permeabilities which are given
//! relative to vacuum (`*_mu_r`) and the frequency, given in Hz.
//!
//! Every key has a default, so an empty file is a valid configuration.
//! Unknown sections and keys are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::assembly::{L22Sigma, Material, MaterialTable};
use crate::mesh::{
    BoundaryLabel, CoilGeometry, DefectGeometry, Region, TagMap, TspGeometry, TubeGeometry,
};
use crate::solver::GmresOptions;
use crate::MU_0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown section [{name}]")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: unknown key {key}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key {key}")]
    Duplicate { line: usize, key: String },
    #[error("{key}: {message}")]
    Value { key: String, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn value_err(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        key: key.to_string(),
        message: message.into(),
    }
}

const SECTIONS: [&str; 7] = ["mesh", "geometry", "materials", "source", "scan", "solver", "run"];

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    Generate,
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TspMode {
    None,
    Volume,
    Ibc,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuTilde {
    /// Volume-weighted harmonic mean of μ over the assembled regions.
    Harmonic,
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Direct,
    Iterative,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScanPositions {
    Range { start: f64, end: f64, count: usize },
    List(Vec<f64>),
}

impl ScanPositions {
    pub fn positions(&self) -> Vec<f64> {
        match self {
            ScanPositions::List(v) => v.clone(),
            ScanPositions::Range { start, end, count } => match count {
                0 => Vec::new(),
                1 => vec![*start],
                n => (0..*n)
                    .map(|i| start + (end - start) * i as f64 / (*n - 1) as f64)
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshConfig {
    pub source: MeshSource,
    pub tags: TagMap,
    pub length: f64,
    pub enclosure_radius: f64,
    pub axial_resolution: usize,
    pub angular_segments: Option<usize>,
    pub wall_layers: usize,
    pub mirror_symmetric: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    pub tube_inner_radius: f64,
    pub tube_outer_radius: f64,
    pub coil: CoilGeometry,
    pub tsp: TspMode,
    pub tsp_geometry: TspGeometry,
    pub defect: Option<DefectGeometry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialsConfig {
    /// `(σ, μ_r)` per region, in [`Region::ALL`] order.
    pub regions: [(f64, f64); 6],
    pub mu_tilde: MuTilde,
    pub delta_gauge: f64,
    pub bc_penalty: f64,
    /// `σ_ε` as a fraction of the tube conductivity.
    pub sigma_eps_ratio: f64,
    pub l22_sigma: L22Sigma,
    pub vacuum_mass: bool,
    pub conjugate_pairing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub kind: SolverKind,
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
}

impl SolverConfig {
    pub fn gmres(&self) -> GmresOptions {
        GmresOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            restart: self.restart,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mesh: MeshConfig,
    pub geometry: GeometryConfig,
    pub materials: MaterialsConfig,
    /// Frequency in Hz.
    pub frequency: f64,
    /// Source current density amplitude in A/m².
    pub current_density: f64,
    pub scan: ScanPositions,
    pub solver: SolverConfig,
    pub workers: usize,
    pub partitions: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TubeGeometry::default();
        RunConfig {
            mesh: MeshConfig {
                source: MeshSource::Generate,
                tags: TagMap::default(),
                length: t.length,
                enclosure_radius: t.enclosure_radius,
                axial_resolution: t.axial_resolution,
                angular_segments: None,
                wall_layers: t.wall_layers,
                mirror_symmetric: true,
            },
            geometry: GeometryConfig {
                tube_inner_radius: t.tube_inner_radius,
                tube_outer_radius: t.tube_outer_radius,
                coil: t.coil,
                tsp: TspMode::None,
                tsp_geometry: TspGeometry {
                    inner_radius: 11.5e-3,
                    outer_radius: 20.0e-3,
                    z_min: -10.0e-3,
                    z_max: 10.0e-3,
                },
                defect: Some(DefectGeometry {
                    r_min: 11.11e-3,
                    r_max: 12.11e-3,
                    theta_min: -std::f64::consts::FRAC_PI_4,
                    theta_max: std::f64::consts::FRAC_PI_4,
                    z_min: -1.5e-3,
                    z_max: 1.5e-3,
                }),
            },
            materials: MaterialsConfig {
                regions: [
                    (1.0e6, 1.0),
                    (5.0e6, 1.0),
                    (1.0e4, 1.0),
                    (0.0, 1.0),
                    (0.0, 1.0),
                    (0.0, 1.0),
                ],
                mu_tilde: MuTilde::Harmonic,
                delta_gauge: 1e-6,
                bc_penalty: 1e13,
                sigma_eps_ratio: 1e-6,
                l22_sigma: L22Sigma::Region,
                vacuum_mass: false,
                conjugate_pairing: false,
            },
            frequency: 1.0e5,
            current_density: 1.0e6,
            scan: ScanPositions::Range {
                start: -5.0e-3,
                end: 5.0e-3,
                count: 5,
            },
            solver: SolverConfig {
                kind: SolverKind::Direct,
                tol: 1e-10,
                max_iter: 2000,
                restart: 80,
            },
            workers: 1,
            partitions: 4,
            seed: 0,
        }
    }
}

/// Parsed `key = value` entries with their line numbers.
struct Table {
    entries: BTreeMap<(String, String), (String, usize)>,
}

impl Table {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.split('#').next().unwrap_or("").trim();
            if s.is_empty() {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                    line,
                    message: "unterminated section header".into(),
                })?;
                let name = name.trim().to_ascii_lowercase();
                if !SECTIONS.contains(&name.as_str()) {
                    return Err(ConfigError::UnknownSection { line, name });
                }
                section = Some(name);
                continue;
            }
            let (k, v) = s.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("expected `key = value`, found `{s}`"),
            })?;
            let sec = section.clone().ok_or_else(|| ConfigError::Syntax {
                line,
                message: "key outside of any section".into(),
            })?;
            let key = k.trim().to_ascii_lowercase();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    message: "empty key".into(),
                });
            }
            let full = format!("{sec}.{key}");
            if entries
                .insert((sec, key), (v.trim().to_string(), line))
                .is_some()
            {
                return Err(ConfigError::Duplicate { line, key: full });
            }
        }
        Ok(Table { entries })
    }

    fn take(&mut self, sec: &str, key: &str) -> Option<String> {
        self.entries
            .remove(&(sec.to_string(), key.to_string()))
            .map(|(v, _)| v)
    }

    fn f64(&mut self, sec: &str, key: &str, slot: &mut f64) -> Result<(), ConfigError> {
        if let Some(v) = self.take(sec, key) {
            *slot = parse_f64(&format!("{sec}.{key}"), &v)?;
        }
        Ok(())
    }

    fn usize(&mut self, sec: &str, key: &str, slot: &mut usize) -> Result<(), ConfigError> {
        if let Some(v) = self.take(sec, key) {
            *slot = v
                .parse()
                .map_err(|_| value_err(&format!("{sec}.{key}"), format!("expected a non-negative integer, found `{v}`")))?;
        }
        Ok(())
    }

    fn bool(&mut self, sec: &str, key: &str, slot: &mut bool) -> Result<(), ConfigError> {
        if let Some(v) = self.take(sec, key) {
            *slot = match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "on" | "1" => true,
                "false" | "no" | "off" | "0" => false,
                _ => return Err(value_err(&format!("{sec}.{key}"), format!("expected true or false, found `{v}`"))),
            };
        }
        Ok(())
    }

    fn finish(self) -> Result<(), ConfigError> {
        match self.entries.into_iter().next() {
            Some(((sec, key), (_, line))) => Err(ConfigError::UnknownKey {
                line,
                key: format!("{sec}.{key}"),
            }),
            None => Ok(()),
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    let x: f64 = v
        .parse()
        .map_err(|_| value_err(key, format!("expected a number, found `{v}`")))?;
    if !x.is_finite() {
        return Err(value_err(key, "value must be finite"));
    }
    Ok(x)
}

fn region_key(r: Region) -> String {
    r.name().to_ascii_lowercase()
}

fn label_key(l: BoundaryLabel) -> String {
    l.name().to_ascii_lowercase()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut t = Table::parse(text)?;
        let mut c = RunConfig::default();

        // [mesh]
        if let Some(v) = t.take("mesh", "source") {
            c.mesh.source = match v.as_str() {
                "generate" => MeshSource::Generate,
                "file" => MeshSource::File(PathBuf::new()),
                _ => return Err(value_err("mesh.source", format!("expected generate or file, found `{v}`"))),
            };
        }
        if let Some(v) = t.take("mesh", "file") {
            match &mut c.mesh.source {
                MeshSource::File(p) => *p = PathBuf::from(v),
                MeshSource::Generate => {
                    return Err(value_err("mesh.file", "given while mesh.source = generate"))
                }
            }
        }
        if c.mesh.source == MeshSource::File(PathBuf::new()) {
            return Err(value_err("mesh.file", "required when mesh.source = file"));
        }
        let mut tags = TagMap {
            regions: BTreeMap::new(),
            boundaries: BTreeMap::new(),
        };
        let defaults = TagMap::default();
        for (&tag, &r) in &defaults.regions {
            let key = format!("tag_{}", region_key(r));
            let mut v = tag as f64;
            t.f64("mesh", &key, &mut v)?;
            insert_tag(&mut tags.regions, v, r, &key)?;
        }
        for (&tag, &l) in &defaults.boundaries {
            let key = format!("tag_{}", label_key(l));
            let mut v = tag as f64;
            t.f64("mesh", &key, &mut v)?;
            insert_tag(&mut tags.boundaries, v, l, &key)?;
        }
        c.mesh.tags = tags;
        t.f64("mesh", "length", &mut c.mesh.length)?;
        t.f64("mesh", "enclosure_radius", &mut c.mesh.enclosure_radius)?;
        t.usize("mesh", "axial_resolution", &mut c.mesh.axial_resolution)?;
        if let Some(v) = t.take("mesh", "angular_segments") {
            c.mesh.angular_segments = match v.as_str() {
                "auto" => None,
                _ => Some(v.parse().map_err(|_| {
                    value_err("mesh.angular_segments", format!("expected auto or an integer, found `{v}`"))
                })?),
            };
        }
        t.usize("mesh", "wall_layers", &mut c.mesh.wall_layers)?;
        t.bool("mesh", "mirror_symmetric", &mut c.mesh.mirror_symmetric)?;

        // [geometry]
        let g = &mut c.geometry;
        t.f64("geometry", "tube_inner_radius", &mut g.tube_inner_radius)?;
        t.f64("geometry", "tube_outer_radius", &mut g.tube_outer_radius)?;
        t.f64("geometry", "coil_inner_radius", &mut g.coil.inner_radius)?;
        t.f64("geometry", "coil_outer_radius", &mut g.coil.outer_radius)?;
        t.f64("geometry", "coil_height", &mut g.coil.height)?;
        t.f64("geometry", "coil_gap", &mut g.coil.gap)?;
        if let Some(v) = t.take("geometry", "tsp") {
            g.tsp = match v.as_str() {
                "none" => TspMode::None,
                "volume" => TspMode::Volume,
                "ibc" => TspMode::Ibc,
                _ => return Err(value_err("geometry.tsp", format!("expected none, volume or ibc, found `{v}`"))),
            };
        }
        t.f64("geometry", "tsp_inner_radius", &mut g.tsp_geometry.inner_radius)?;
        t.f64("geometry", "tsp_outer_radius", &mut g.tsp_geometry.outer_radius)?;
        t.f64("geometry", "tsp_z_min", &mut g.tsp_geometry.z_min)?;
        t.f64("geometry", "tsp_z_max", &mut g.tsp_geometry.z_max)?;
        let mut has_defect = g.defect.is_some();
        t.bool("geometry", "defect", &mut has_defect)?;
        let mut d = g.defect.unwrap_or(DefectGeometry {
            r_min: 0.0,
            r_max: 0.0,
            theta_min: 0.0,
            theta_max: 0.0,
            z_min: 0.0,
            z_max: 0.0,
        });
        t.f64("geometry", "defect_r_min", &mut d.r_min)?;
        t.f64("geometry", "defect_r_max", &mut d.r_max)?;
        t.f64("geometry", "defect_theta_min", &mut d.theta_min)?;
        t.f64("geometry", "defect_theta_max", &mut d.theta_max)?;
        t.f64("geometry", "defect_z_min", &mut d.z_min)?;
        t.f64("geometry", "defect_z_max", &mut d.z_max)?;
        g.defect = has_defect.then_some(d);

        // [materials]
        let m = &mut c.materials;
        for (i, r) in Region::ALL.into_iter().enumerate() {
            let name = region_key(r);
            t.f64("materials", &format!("{name}_sigma"), &mut m.regions[i].0)?;
            t.f64("materials", &format!("{name}_mu_r"), &mut m.regions[i].1)?;
        }
        if let Some(v) = t.take("materials", "mu_tilde") {
            m.mu_tilde = match v.as_str() {
                "harmonic" => MuTilde::Harmonic,
                _ => MuTilde::Value(parse_f64("materials.mu_tilde", &v)?),
            };
        }
        t.f64("materials", "delta_gauge", &mut m.delta_gauge)?;
        t.f64("materials", "bc_penalty", &mut m.bc_penalty)?;
        t.f64("materials", "sigma_eps_ratio", &mut m.sigma_eps_ratio)?;
        if let Some(v) = t.take("materials", "l22_sigma") {
            m.l22_sigma = match v.as_str() {
                "region" => L22Sigma::Region,
                "epsilon" => L22Sigma::Epsilon,
                _ => return Err(value_err("materials.l22_sigma", format!("expected region or epsilon, found `{v}`"))),
            };
        }
        t.bool("materials", "vacuum_mass", &mut m.vacuum_mass)?;
        t.bool("materials", "conjugate_pairing", &mut m.conjugate_pairing)?;

        // [source]
        t.f64("source", "frequency", &mut c.frequency)?;
        t.f64("source", "current_density", &mut c.current_density)?;

        // [scan]
        let list = t.take("scan", "z_positions");
        let (mut start, mut end, mut count) = match c.scan {
            ScanPositions::Range { start, end, count } => (start, end, count),
            ScanPositions::List(_) => unreachable!(),
        };
        let range_given = ["z_start", "z_end", "positions"]
            .iter()
            .any(|k| t.entries.contains_key(&("scan".to_string(), k.to_string())));
        t.f64("scan", "z_start", &mut start)?;
        t.f64("scan", "z_end", &mut end)?;
        t.usize("scan", "positions", &mut count)?;
        c.scan = match list {
            Some(v) => {
                if range_given {
                    return Err(value_err("scan.z_positions", "cannot be combined with z_start/z_end/positions"));
                }
                let zs = v
                    .split(',')
                    .map(|s| s.trim())
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_f64("scan.z_positions", s))
                    .collect::<Result<Vec<_>, _>>()?;
                ScanPositions::List(zs)
            }
            None => ScanPositions::Range { start, end, count },
        };

        // [solver]
        if let Some(v) = t.take("solver", "kind") {
            c.solver.kind = match v.as_str() {
                "direct" => SolverKind::Direct,
                "iterative" => SolverKind::Iterative,
                _ => return Err(value_err("solver.kind", format!("expected direct or iterative, found `{v}`"))),
            };
        }
        t.f64("solver", "tol", &mut c.solver.tol)?;
        t.usize("solver", "max_iter", &mut c.solver.max_iter)?;
        t.usize("solver", "restart", &mut c.solver.restart)?;

        // [run]
        t.usize("run", "workers", &mut c.workers)?;
        t.usize("run", "partitions", &mut c.partitions)?;
        if let Some(v) = t.take("run", "seed") {
            c.seed = v
                .parse()
                .map_err(|_| value_err("run.seed", format!("expected a non-negative integer, found `{v}`")))?;
        }

        t.finish()?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut c = Self::parse(&text)?;
        // relative mesh paths are taken relative to the config file
        if let MeshSource::File(p) = &mut c.mesh.source {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(c)
    }

    /// Semantic checks; errors name the offending key.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(value_err(key, format!("must be positive (got {v})")))
            }
        };
        positive("source.frequency", self.frequency)?;
        positive("mesh.length", self.mesh.length)?;
        positive("mesh.enclosure_radius", self.mesh.enclosure_radius)?;
        positive("geometry.tube_inner_radius", self.geometry.tube_inner_radius)?;
        positive("geometry.tube_outer_radius", self.geometry.tube_outer_radius)?;
        positive("geometry.coil_inner_radius", self.geometry.coil.inner_radius)?;
        positive("geometry.coil_outer_radius", self.geometry.coil.outer_radius)?;
        positive("geometry.coil_height", self.geometry.coil.height)?;
        if self.geometry.coil.gap < 0.0 {
            return Err(value_err("geometry.coil_gap", "must be non-negative"));
        }
        if self.mesh.axial_resolution == 0 {
            return Err(value_err("mesh.axial_resolution", "must be at least 1"));
        }
        if self.mesh.wall_layers == 0 {
            return Err(value_err("mesh.wall_layers", "must be at least 1"));
        }
        for (i, r) in Region::ALL.into_iter().enumerate() {
            let (s, mu) = self.materials.regions[i];
            let name = region_key(r);
            if s < 0.0 {
                return Err(value_err(&format!("materials.{name}_sigma"), format!("must be non-negative (got {s})")));
            }
            positive(&format!("materials.{name}_mu_r"), mu)?;
            if r.is_coil() && s != 0.0 {
                return Err(value_err(&format!("materials.{name}_sigma"), "coil regions are non-conducting"));
            }
        }
        positive("materials.tube_sigma", self.materials.regions[Region::Tube.index()].0)?;
        if self.geometry.tsp != TspMode::None {
            positive("materials.tsp_sigma", self.materials.regions[Region::Tsp.index()].0)?;
        }
        if let MuTilde::Value(v) = self.materials.mu_tilde {
            positive("materials.mu_tilde", v)?;
        }
        if self.materials.delta_gauge < 0.0 {
            return Err(value_err("materials.delta_gauge", "must be non-negative"));
        }
        positive("materials.bc_penalty", self.materials.bc_penalty)?;
        positive("materials.sigma_eps_ratio", self.materials.sigma_eps_ratio)?;
        positive("source.current_density", self.current_density)?;
        positive("solver.tol", self.solver.tol)?;
        if self.solver.max_iter == 0 || self.solver.restart == 0 {
            return Err(value_err("solver.max_iter", "max_iter and restart must be at least 1"));
        }
        if self.workers == 0 {
            return Err(value_err("run.workers", "must be at least 1"));
        }
        if self.partitions == 0 {
            return Err(value_err("run.partitions", "must be at least 1"));
        }
        if let ScanPositions::Range { start, end, count } = self.scan {
            if count > 1 && !(start < end) {
                return Err(value_err("scan.z_end", "must exceed scan.z_start"));
            }
        }
        let zs = self.scan.positions();
        if zs.is_empty() {
            return Err(value_err("scan.positions", "at least one probe position is required"));
        }
        if zs.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(value_err("scan.z_positions", "positions must be strictly increasing"));
        }
        if self.mesh.source == MeshSource::Generate {
            self.tube_geometry()
                .validate()
                .map_err(|e| value_err("geometry", e.to_string()))?;
        }
        Ok(())
    }

    pub fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.frequency
    }

    pub fn positions(&self) -> Vec<f64> {
        self.scan.positions()
    }

    /// Absolute pseudo-conductivity of low-conductivity media.
    pub fn sigma_eps(&self) -> f64 {
        self.materials.sigma_eps_ratio * self.materials.regions[Region::Tube.index()].0
    }

    /// Region materials of the actual configuration, or of the reference
    /// configuration where the defect is replaced by vacuum (`σ_ε`, `μ_0·μ_r,vacuum`).
    pub fn material_table(&self, reference: bool) -> MaterialTable {
        let mut t = MaterialTable::uniform(Material { sigma: 0.0, mu: MU_0 });
        for (i, r) in Region::ALL.into_iter().enumerate() {
            let (sigma, mu_r) = self.materials.regions[i];
            t.set(r, Material { sigma, mu: mu_r * MU_0 });
        }
        if reference {
            let vac = self.materials.regions[Region::Vacuum.index()].1 * MU_0;
            t.set(Region::Defect, Material { sigma: self.sigma_eps(), mu: vac });
        }
        t
    }

    pub fn tube_geometry(&self) -> TubeGeometry {
        TubeGeometry {
            tube_inner_radius: self.geometry.tube_inner_radius,
            tube_outer_radius: self.geometry.tube_outer_radius,
            length: self.mesh.length,
            enclosure_radius: self.mesh.enclosure_radius,
            tube_z_range: None,
            coil: self.geometry.coil,
            probe_positions: self.positions(),
            tsp: (self.geometry.tsp != TspMode::None).then_some(self.geometry.tsp_geometry),
            defect: self.geometry.defect,
            axial_resolution: self.mesh.axial_resolution,
            angular_segments: self.mesh.angular_segments,
            wall_layers: self.mesh.wall_layers,
            mirror_symmetric: self.mesh.mirror_symmetric,
        }
    }

    /// Canonical text form; parses back to an equal configuration.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let kv = |s: &mut String, k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        s.push_str("[mesh]\n");
        match &self.mesh.source {
            MeshSource::Generate => kv(&mut s, "source", "generate".into()),
            MeshSource::File(p) => {
                kv(&mut s, "source", "file".into());
                kv(&mut s, "file", p.display().to_string());
            }
        }
        for (tag, r) in &self.mesh.tags.regions {
            kv(&mut s, &format!("tag_{}", region_key(*r)), tag.to_string());
        }
        for (tag, l) in &self.mesh.tags.boundaries {
            kv(&mut s, &format!("tag_{}", label_key(*l)), tag.to_string());
        }
        kv(&mut s, "length", self.mesh.length.to_string());
        kv(&mut s, "enclosure_radius", self.mesh.enclosure_radius.to_string());
        kv(&mut s, "axial_resolution", self.mesh.axial_resolution.to_string());
        kv(
            &mut s,
            "angular_segments",
            self.mesh
                .angular_segments
                .map_or("auto".to_string(), |n| n.to_string()),
        );
        kv(&mut s, "wall_layers", self.mesh.wall_layers.to_string());
        kv(&mut s, "mirror_symmetric", self.mesh.mirror_symmetric.to_string());

        let g = &self.geometry;
        s.push_str("\n[geometry]\n");
        kv(&mut s, "tube_inner_radius", g.tube_inner_radius.to_string());
        kv(&mut s, "tube_outer_radius", g.tube_outer_radius.to_string());
        kv(&mut s, "coil_inner_radius", g.coil.inner_radius.to_string());
        kv(&mut s, "coil_outer_radius", g.coil.outer_radius.to_string());
        kv(&mut s, "coil_height", g.coil.height.to_string());
        kv(&mut s, "coil_gap", g.coil.gap.to_string());
        let tsp = match g.tsp {
            TspMode::None => "none",
            TspMode::Volume => "volume",
            TspMode::Ibc => "ibc",
        };
        kv(&mut s, "tsp", tsp.into());
        kv(&mut s, "tsp_inner_radius", g.tsp_geometry.inner_radius.to_string());
        kv(&mut s, "tsp_outer_radius", g.tsp_geometry.outer_radius.to_string());
        kv(&mut s, "tsp_z_min", g.tsp_geometry.z_min.to_string());
        kv(&mut s, "tsp_z_max", g.tsp_geometry.z_max.to_string());
        kv(&mut s, "defect", g.defect.is_some().to_string());
        if let Some(d) = &g.defect {
            kv(&mut s, "defect_r_min", d.r_min.to_string());
            kv(&mut s, "defect_r_max", d.r_max.to_string());
            kv(&mut s, "defect_theta_min", d.theta_min.to_string());
            kv(&mut s, "defect_theta_max", d.theta_max.to_string());
            kv(&mut s, "defect_z_min", d.z_min.to_string());
            kv(&mut s, "defect_z_max", d.z_max.to_string());
        }

        let m = &self.materials;
        s.push_str("\n[materials]\n");
        for (i, r) in Region::ALL.into_iter().enumerate() {
            let name = region_key(r);
            kv(&mut s, &format!("{name}_sigma"), m.regions[i].0.to_string());
            kv(&mut s, &format!("{name}_mu_r"), m.regions[i].1.to_string());
        }
        kv(
            &mut s,
            "mu_tilde",
            match m.mu_tilde {
                MuTilde::Harmonic => "harmonic".to_string(),
                MuTilde::Value(v) => v.to_string(),
            },
        );
        kv(&mut s, "delta_gauge", m.delta_gauge.to_string());
        kv(&mut s, "bc_penalty", m.bc_penalty.to_string());
        kv(&mut s, "sigma_eps_ratio", m.sigma_eps_ratio.to_string());
        let l22 = match m.l22_sigma {
            L22Sigma::Region => "region",
            L22Sigma::Epsilon => "epsilon",
        };
        kv(&mut s, "l22_sigma", l22.into());
        kv(&mut s, "vacuum_mass", m.vacuum_mass.to_string());
        kv(&mut s, "conjugate_pairing", m.conjugate_pairing.to_string());

        s.push_str("\n[source]\n");
        kv(&mut s, "frequency", self.frequency.to_string());
        kv(&mut s, "current_density", self.current_density.to_string());

        s.push_str("\n[scan]\n");
        match &self.scan {
            ScanPositions::Range { start, end, count } => {
                kv(&mut s, "z_start", start.to_string());
                kv(&mut s, "z_end", end.to_string());
                kv(&mut s, "positions", count.to_string());
            }
            ScanPositions::List(v) => {
                let items: Vec<String> = v.iter().map(|z| z.to_string()).collect();
                kv(&mut s, "z_positions", items.join(", "));
            }
        }

        s.push_str("\n[solver]\n");
        let kind = match self.solver.kind {
            SolverKind::Direct => "direct",
            SolverKind::Iterative => "iterative",
        };
        kv(&mut s, "kind", kind.into());
        kv(&mut s, "tol", self.solver.tol.to_string());
        kv(&mut s, "max_iter", self.solver.max_iter.to_string());
        kv(&mut s, "restart", self.solver.restart.to_string());

        s.push_str("\n[run]\n");
        kv(&mut s, "workers", self.workers.to_string());
        kv(&mut s, "partitions", self.partitions.to_string());
        kv(&mut s, "seed", self.seed.to_string());
        s
    }

    /// SHA-256 of the canonical form with the worker count left out, so runs
    /// differing only in parallelism share a hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.workers = 1;
        let digest = Sha256::digest(c.dump().as_bytes());
        digest.iter().take(16).map(|b| format!("{b:02x}")).collect()
    }
}

fn insert_tag<T: Copy>(map: &mut BTreeMap<i64, T>, v: f64, item: T, key: &str) -> Result<(), ConfigError> {
    let key = format!("mesh.{key}");
    if v.fract() != 0.0 {
        return Err(value_err(&key, "tag must be an integer"));
    }
    if map.insert(v as i64, item).is_some() {
        return Err(value_err(&key, format!("tag {v} is used twice")));
    }
    Ok(())
}
