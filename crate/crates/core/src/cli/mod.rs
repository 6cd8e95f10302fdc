//! Command-line front end: `bake`, `synth`, `eval` and `export`.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input, 3 numerical
//! failure. Logging goes to stderr and is controlled by `GRASPD_LOG`
//! (`error`, `warn`, `info`, `debug`, `trace`; default `info`).

mod eval;
mod export;
mod synth;

pub use eval::{aggregate_top, cmd_eval, EvalLine, TopAggregate};
pub use export::{cmd_export, tessellate_hand, write_obj_group};
pub use synth::{cmd_synth, GraspFile, JobStatus, RunManifest, SynthConfig};

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::hand::{HandError, HandModel};
use crate::loss::LossError;
use crate::opt::OptError;
use crate::sdf::{bake, BakeOptions, SdfError, SdfGrid, TriMesh};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub(crate) fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<SdfError> for CliError {
    fn from(e: SdfError) -> Self {
        match e {
            SdfError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<HandError> for CliError {
    fn from(e: HandError) -> Self {
        match e {
            HandError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<LossError> for CliError {
    fn from(e: LossError) -> Self {
        match e {
            LossError::Hand(h) => h.into(),
            LossError::Shape { .. } => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<OptError> for CliError {
    fn from(e: OptError) -> Self {
        match e {
            OptError::Config(_) | OptError::Surface(_) => CliError::Validation(e.to_string()),
            OptError::Sdf(s) => s.into(),
            OptError::Loss(l) => l.into(),
            OptError::Diff(_) => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "graspd", version, about = "Differentiable grasp synthesis on signed distance fields")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a closed triangle mesh (OBJ) into a binary SDF grid.
    Bake(BakeArgs),
    /// Optimize a batch of grasps and write one JSON file per grasp.
    Synth(SynthArgs),
    /// Score grasp files and write JSON lines with top-2/top-5 summaries.
    Eval(EvalArgs),
    /// Write the posed hand and the object surface as one OBJ scene.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
pub struct BakeArgs {
    /// Input mesh (ASCII OBJ with triangular faces).
    pub mesh: PathBuf,
    /// Grid resolution: one number for a cube, or `nx,ny,nz`.
    #[arg(long, default_value = "256", value_parser = parse_dims)]
    pub dims: [usize; 3],
    /// Margin around the mesh bounding box, meters.
    #[arg(long, default_value_t = 0.01)]
    pub padding: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Hand description file, or the name of a bundled hand.
    #[arg(long)]
    pub hand: String,
    #[arg(long)]
    pub sdf: PathBuf,
    /// JSON run configuration; omitted fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of independent optimizations.
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub grasps: Vec<PathBuf>,
    #[arg(long)]
    pub hand: String,
    #[arg(long)]
    pub sdf: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// JSON-lines output; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    pub grasp: PathBuf,
    #[arg(long)]
    pub hand: String,
    #[arg(long)]
    pub sdf: PathBuf,
    /// Marching resolution for the object surface; defaults to the grid's.
    #[arg(long, value_parser = parse_dims)]
    pub dims: Option<[usize; 3]>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn parse_dims(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let nums: Vec<usize> = parts
        .iter()
        .map(|p| p.parse::<usize>().map_err(|e| format!("bad dimension {p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let dims = match nums.as_slice() {
        [n] => [*n; 3],
        [x, y, z] => [*x, *y, *z],
        _ => return Err(format!("expected N or NX,NY,NZ, got {s:?}")),
    };
    if dims.iter().any(|&n| n < 2) {
        return Err(format!("every dimension must be at least 2, got {dims:?}"));
    }
    Ok(dims)
}

/// Parses arguments, runs the command and maps the outcome to an exit code.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GRASPD_LOG", "info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Bake(a) => cmd_bake(&a.mesh, a.dims, a.padding, &a.out).map(|_| ()),
        Command::Synth(a) => cmd_synth(&a).map(|_| ()),
        Command::Eval(a) => cmd_eval(&a).map(|_| ()),
        Command::Export(a) => cmd_export(&a),
    }
}

/// Bakes `mesh` and writes the grid to `out`.
pub fn cmd_bake(mesh: &Path, dims: [usize; 3], padding: f64, out: &Path) -> Result<SdfGrid, CliError> {
    if !mesh.exists() {
        return Err(CliError::io(mesh, "no such file"));
    }
    let tri = TriMesh::load_obj(mesh)?;
    let grid = bake(&tri, &BakeOptions { dims, padding })?;
    grid.save(out)?;
    let (lo, hi) = grid.bounds();
    let vals = grid.values();
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let inside = vals.iter().filter(|&&v| v < 0.0).count();
    println!(
        "baked {} -> {}: dims {:?}, spacing {:.3e} m, bounds [{:.4}, {:.4}, {:.4}]..[{:.4}, {:.4}, {:.4}], phi in [{min:.4e}, {max:.4e}], {inside} interior nodes",
        mesh.display(),
        out.display(),
        grid.dims(),
        grid.spacing().x.max(grid.spacing().y).max(grid.spacing().z),
        lo.x,
        lo.y,
        lo.z,
        hi.x,
        hi.y,
        hi.z,
    );
    info!("{} faces, watertight check passed", tri.faces.len());
    Ok(grid)
}

/// Loads a hand from a description file, falling back to the bundled hand
/// of that name.
pub fn load_hand(spec: &str) -> Result<HandModel, CliError> {
    let path = Path::new(spec);
    if path.exists() {
        Ok(HandModel::load(path)?)
    } else if matches!(spec, "tripod" | "pinch") {
        Ok(HandModel::builtin(spec)?)
    } else {
        Err(CliError::io(path, "no such file and no bundled hand of that name"))
    }
}

pub fn load_grid(path: &Path) -> Result<SdfGrid, CliError> {
    if !path.exists() {
        return Err(CliError::io(path, "no such file"));
    }
    Ok(SdfGrid::load(path)?)
}

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash identifying a hand: the file contents, or the canonical JSON of a
/// bundled description.
pub fn hand_hash(spec: &str, model: &HandModel) -> Result<String, CliError> {
    let path = Path::new(spec);
    if path.exists() {
        file_hash(path)
    } else {
        let json = serde_json::to_vec(&model.to_description()).map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(sha256_hex(&json))
    }
}

pub fn file_hash(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}
