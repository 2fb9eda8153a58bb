//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::assembly::{apply_essential_bc, Assembler};
use crate::config::{MeshSource, RunConfig, ScanPositions};
use crate::mesh::{load_mesh, write_mesh};
use crate::partition::{partition_stats, partition_tets};
use crate::scan::{mesh_for, run, speedup_report, ImpedanceTrace, ScanConfig};
use crate::solver::build_global;
use crate::workers::WORKERS_ENV;
use crate::{Error, Result};

/// Eddy-current testing simulator: tetrahedral A–V finite elements with a
/// factor-once probe scan.
#[derive(Debug, Parser)]
#[command(name = "ectfem", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Run configuration file (`[section]` / `key = value`). Defaults apply
    /// when omitted.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WorkersArg {
    /// Worker threads; overrides the config and the environment variable.
    #[arg(long, short, env = WORKERS_ENV)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load or generate the mesh and report its validity and region counts.
    ValidateMesh {
        #[command(flatten)]
        config: ConfigArg,
        /// Mesh file to check instead of the configured mesh source.
        #[arg(long)]
        mesh: Option<PathBuf>,
    },
    /// Generate the configured tube mesh and write it in Gmsh ASCII format.
    WriteMesh {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Partition the tetrahedra; prints one part id per line and a stats footer.
    Partition {
        #[command(flatten)]
        config: ConfigArg,
        /// Number of parts (defaults to run.partitions).
        #[arg(long, short)]
        parts: Option<usize>,
        /// Partitioner seed (defaults to run.seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Write the map here instead of standard output.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Assemble the block system and print its sizes.
    Assemble {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        workers: WorkersArg,
        /// Assemble the reference configuration (defect replaced by vacuum).
        #[arg(long)]
        reference: bool,
        /// Write M11, M12, M21, M22 as coordinate files into this directory.
        #[arg(long)]
        dump_blocks: Option<PathBuf>,
    },
    /// Solve a single probe position and print its impedance variations.
    SolveOne {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        workers: WorkersArg,
        /// Probe position in metres.
        #[arg(long, allow_hyphen_values = true)]
        z: f64,
    },
    /// Run the probe scan and write the impedance trace as CSV.
    Scan {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        workers: WorkersArg,
        /// Output CSV file, or a directory to receive `trace.csv`.
        #[arg(long, short, default_value = "trace.csv")]
        out: PathBuf,
    },
    /// Summarize traces, compare two runs or tabulate speedups.
    Report {
        /// Trace files or run directories.
        traces: Vec<PathBuf>,
        /// Compare two runs and print the largest relative signal deviation.
        #[arg(long, num_args = 2, value_names = ["RUN1", "RUN2"])]
        compare: Option<Vec<PathBuf>>,
        /// Print the speedup table of the given traces.
        #[arg(long)]
        speedup: bool,
    },
    /// Print the effective configuration in canonical form.
    DumpConfig {
        #[command(flatten)]
        config: ConfigArg,
    },
}

fn load_config(arg: &ConfigArg) -> Result<RunConfig> {
    Ok(match &arg.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    })
}

fn with_workers(mut c: RunConfig, w: &WorkersArg) -> Result<RunConfig> {
    if let Some(n) = w.workers {
        if n == 0 {
            return Err(Error::Other("--workers must be at least 1".into()));
        }
        c.workers = n;
    }
    Ok(c)
}

fn trace_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("trace.csv")
    } else {
        p.to_path_buf()
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Run one parsed command; output goes to standard output.
pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::ValidateMesh { config, mesh } => {
            let c = load_config(&config)?;
            let m = match mesh {
                Some(p) => load_mesh(&p, &c.mesh.tags)?,
                None => mesh_for(&c)?,
            };
            let report = m.validate();
            println!("nodes {}", m.nodes.len());
            println!("tets {}", m.tets.len());
            println!("boundary_faces {}", m.boundary_faces.len());
            for r in crate::mesh::Region::ALL {
                println!("region {} {}", r.name(), m.count_region(r));
            }
            for l in crate::mesh::BoundaryLabel::ALL {
                println!("label {} {}", l.name(), m.count_label(l));
            }
            print!("{report}");
            if !report.is_empty() {
                return Err(crate::mesh::MeshError::Geometry(format!(
                    "{} problems found",
                    report.diagnostics.len()
                ))
                .into());
            }
        }
        Command::WriteMesh { config, out } => {
            let c = load_config(&config)?;
            if c.mesh.source != MeshSource::Generate {
                log::warn!("mesh.source is a file; writing it back unchanged");
            }
            let m = mesh_for(&c)?;
            write_mesh(&m, &out, &c.mesh.tags).map_err(Error::from)?;
            println!("wrote {} tets to {}", m.tets.len(), out.display());
        }
        Command::Partition {
            config,
            parts,
            seed,
            out,
        } => {
            let c = load_config(&config)?;
            let m = mesh_for(&c)?;
            let map = partition_tets(&m, parts.unwrap_or(c.partitions), seed.unwrap_or(c.seed))?;
            let stats = partition_stats(&map, &m)?;
            let mut text = String::with_capacity(3 * map.part_of.len());
            for p in &map.part_of {
                text.push_str(&p.to_string());
                text.push('\n');
            }
            text.push_str(&stats.to_string());
            match out {
                Some(p) => write_text(&p, &text)?,
                None => print!("{text}"),
            }
        }
        Command::Assemble {
            config,
            workers,
            reference,
            dump_blocks,
        } => {
            let c = with_workers(load_config(&config)?, &workers)?;
            let m = mesh_for(&c)?;
            let sc = ScanConfig::from_run(&c);
            let params = sc.physics(&m, reference)?;
            let map = partition_tets(&m, c.partitions, c.seed)?;
            let asm = Assembler::new(&m, &params)?;
            let (blocks, t) = asm.assemble_parallel(&map, c.workers)?;
            if let Some(dir) = &dump_blocks {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
                for (name, b) in [
                    ("M11", &blocks.m11),
                    ("M12", &blocks.m12),
                    ("M21", &blocks.m21),
                    ("M22", &blocks.m22),
                ] {
                    let p = dir.join(format!("{name}.coo"));
                    b.write_coordinate(&p)
                        .map_err(|e| Error::io(p.display().to_string(), e))?;
                }
            }
            for (name, b) in [
                ("M11", &blocks.m11),
                ("M12", &blocks.m12),
                ("M21", &blocks.m21),
                ("M22", &blocks.m22),
            ] {
                let (r, cc) = b.shape();
                println!("{name} {r}x{cc} nnz {}", b.nnz());
            }
            let sys = apply_essential_bc(blocks, &m, &params, asm.cmap.len())?;
            let g = build_global(&sys)?;
            println!("global {}x{} nnz {}", g.n_rows, g.n_cols, g.nnz());
            println!("pinned {}", sys.pins.len());
            println!("assemble_s {:.6}", t.assemble);
            println!("reduce_s {:.6}", t.reduce);
        }
        Command::SolveOne { config, workers, z } => {
            let mut c = with_workers(load_config(&config)?, &workers)?;
            c.scan = ScanPositions::List(vec![z]);
            c.validate()?;
            let tr = run(&c)?;
            let p = &tr.points[0];
            for (k, row) in p.delta.0.iter().enumerate() {
                for (l, v) in row.iter().enumerate() {
                    println!("dZ{}{} {:.11e} {:.11e}", k + 1, l + 1, v.re, v.im);
                }
            }
            println!("Z_FA {:.11e} {:.11e}", p.z_fa.re, p.z_fa.im);
            println!("Z_F3 {:.11e} {:.11e}", p.z_f3.re, p.z_f3.im);
            for n in &tr.notes {
                println!("failed {n}");
            }
            if p.is_failed() {
                return Err(crate::solver::SolverError::InvalidOption(
                    "position failed".into(),
                )
                .into());
            }
        }
        Command::Scan {
            config,
            workers,
            out,
        } => {
            let c = with_workers(load_config(&config)?, &workers)?;
            let tr = run(&c)?;
            let path = trace_path(&out);
            tr.write_csv(&path)?;
            println!(
                "{} positions ({} failed), {} factorizations, {:.3} s -> {}",
                tr.points.len(),
                tr.notes.len(),
                tr.factorizations,
                tr.timings.total,
                path.display()
            );
        }
        Command::Report {
            traces,
            compare,
            speedup,
        } => {
            if let Some(pair) = compare {
                let a = ImpedanceTrace::read_csv(&trace_path(&pair[0]))?;
                let b = ImpedanceTrace::read_csv(&trace_path(&pair[1]))?;
                if a.config_hash != b.config_hash {
                    log::warn!("config hashes differ: {} vs {}", a.config_hash, b.config_hash);
                }
                println!("max relative deviation {:.3e}", a.max_deviation(&b)?);
            }
            let loaded = traces
                .iter()
                .map(|p| ImpedanceTrace::read_csv(&trace_path(p)))
                .collect::<Result<Vec<_>>>()?;
            if speedup {
                print!("{}", speedup_report(&loaded)?);
            } else {
                for (p, t) in traces.iter().zip(&loaded) {
                    let peak = t
                        .points
                        .iter()
                        .map(|s| s.z_fa.norm())
                        .filter(|v| v.is_finite())
                        .fold(0.0, f64::max);
                    println!(
                        "{}: {} positions, {} failed, workers {}, total {:.3} s, max |Z_FA| {:.4e}",
                        p.display(),
                        t.points.len(),
                        t.notes.len(),
                        t.workers,
                        t.timings.total,
                        peak
                    );
                }
            }
        }
        Command::DumpConfig { config } => {
            print!("{}", load_config(&config)?.dump());
        }
    }
    Ok(())
}

/// Parse arguments, run, and map errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.stage());
            e.exit_code()
        }
    }
}
