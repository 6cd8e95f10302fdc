use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{file_hash, hand_hash, load_grid, load_hand, sha256_hex, write_file, CliError, SynthArgs};
use crate::loss::{GraspCandidate, LossReport};
use crate::metrics::{EpsilonOptions, ShakeOptions};
use crate::opt::{feasible, synthesize, OptimizerConfig, SynthesisInputs, TraceEntry};
use crate::sim::{mass_properties, ContactParams};

/// Everything a run can be configured with. Every field is optional in the
/// file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub optimizer: OptimizerConfig,
    pub contact: ContactParams,
    /// Object density, kg/m^3.
    pub density: f64,
    pub shake: ShakeOptions,
    pub epsilon: EpsilonOptions,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            optimizer: OptimizerConfig::default(),
            contact: ContactParams::default(),
            density: 1000.0,
            shake: ShakeOptions::default(),
            epsilon: EpsilonOptions::default(),
        }
    }
}

impl SynthConfig {
    /// Reads `path`, or returns the defaults; the second value is the hash
    /// recorded in outputs.
    pub fn load(path: Option<&Path>) -> Result<(Self, String), CliError> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                let cfg: SynthConfig =
                    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?;
                cfg.optimizer.validate()?;
                Ok((cfg, sha256_hex(text.as_bytes())))
            }
            None => {
                let cfg = SynthConfig::default();
                let json = serde_json::to_vec(&cfg).expect("config serializes");
                Ok((cfg, sha256_hex(&json)))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointSummary {
    pub step: usize,
    pub report: LossReport,
    #[serde(serialize_with = "crate::metrics::ser_inf", deserialize_with = "crate::metrics::de_inf")]
    pub displacement: f64,
}

/// One synthesized grasp as written to disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspFile {
    pub format: u32,
    pub job: u64,
    pub seed: u64,
    pub hand: String,
    pub hand_sha256: String,
    pub sdf_sha256: String,
    pub config_sha256: String,
    /// Optimization step of the kept candidate.
    pub step: usize,
    pub feasible: bool,
    pub diverged: bool,
    /// Shake-test displacement of the kept candidate, cm.
    #[serde(serialize_with = "crate::metrics::ser_inf", deserialize_with = "crate::metrics::de_inf")]
    pub displacement: f64,
    /// Losses of the kept candidate at the true surface.
    pub report: LossReport,
    pub candidate: GraspCandidate,
    pub checkpoints: Vec<CheckpointSummary>,
    /// Every hundredth step of the optimization trace, plus the last.
    pub trace: Vec<TraceEntry>,
}

impl GraspFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut v = serde_json::to_vec_pretty(self).expect("grasp serializes");
        v.push(b'\n');
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobStatus {
    pub job: u64,
    /// File name relative to the output directory; absent on failure.
    pub file: Option<String>,
    pub ok: bool,
    pub error: Option<String>,
    #[serde(serialize_with = "crate::metrics::ser_inf", deserialize_with = "crate::metrics::de_inf")]
    pub displacement: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub hand: String,
    pub hand_sha256: String,
    pub sdf: String,
    pub sdf_sha256: String,
    pub config: Option<String>,
    pub config_sha256: String,
    pub seed: u64,
    pub seeds: usize,
    pub jobs: Vec<JobStatus>,
    /// Successful grasp files, smallest displacement first.
    pub ranking: Vec<String>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn grasp_file_name(job: u64) -> String {
    format!("grasp_{job:03}.json")
}

/// Runs `args.seeds` optimizations and writes their grasps and a manifest
/// into `args.out`.
pub fn cmd_synth(args: &SynthArgs) -> Result<RunManifest, CliError> {
    let model = load_hand(&args.hand)?;
    let grid = load_grid(&args.sdf)?;
    let (cfg, config_sha256) = SynthConfig::load(args.config.as_deref())?;
    cfg.contact.validate().map_err(|e| CliError::Validation(e.to_string()))?;
    let body = mass_properties(&grid, cfg.density)?;
    let hand_sha256 = hand_hash(&args.hand, &model)?;
    let sdf_sha256 = file_hash(&args.sdf)?;
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;

    let inputs = SynthesisInputs { model: &model, object: &grid, body, params: cfg.contact, shake: cfg.shake };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| CliError::Validation(format!("worker pool: {e}")))?;
    info!("synthesizing {} grasps with {} workers", args.seeds, pool.current_num_threads());

    let run_job = |job: u64| -> Result<(String, f64), CliError> {
        let s = synthesize(&inputs, &cfg.optimizer, job)?;
        if s.diverged {
            return Err(CliError::Numerical(format!("job {job} diverged")));
        }
        let last = s.trace.len().saturating_sub(1);
        let grasp = GraspFile {
            format: 1,
            job,
            seed: cfg.optimizer.seed,
            hand: model.name.clone(),
            hand_sha256: hand_sha256.clone(),
            sdf_sha256: sdf_sha256.clone(),
            config_sha256: config_sha256.clone(),
            step: s.best.step,
            feasible: feasible(&s.best.report, &cfg.optimizer),
            diverged: s.diverged,
            displacement: s.best.displacement,
            report: s.best.report.clone(),
            candidate: s.best.candidate.clone(),
            checkpoints: s
                .checkpoints
                .iter()
                .map(|c| CheckpointSummary { step: c.step, report: c.report.clone(), displacement: c.displacement })
                .collect(),
            trace: s.trace.iter().filter(|t| t.step % 100 == 0 || t.step == last).cloned().collect(),
        };
        let name = grasp_file_name(job);
        write_file(&args.out.join(&name), &grasp.to_bytes())?;
        info!("job {job}: step {} displacement {:.3} cm, feasible {}", grasp.step, grasp.displacement, grasp.feasible);
        Ok((name, grasp.displacement))
    };
    let results: Vec<Result<(String, f64), CliError>> =
        pool.install(|| (0..args.seeds as u64).into_par_iter().map(run_job).collect());

    let mut jobs = Vec::with_capacity(results.len());
    for (job, r) in results.into_iter().enumerate() {
        let job = job as u64;
        match r {
            Ok((file, displacement)) => jobs.push(JobStatus { job, file: Some(file), ok: true, error: None, displacement }),
            Err(e) => {
                warn!("job {job} failed: {e}");
                jobs.push(JobStatus { job, file: None, ok: false, error: Some(e.to_string()), displacement: f64::INFINITY });
            }
        }
    }
    let mut ranked: Vec<&JobStatus> = jobs.iter().filter(|j| j.ok).collect();
    ranked.sort_by(|a, b| a.displacement.total_cmp(&b.displacement).then(a.job.cmp(&b.job)));
    let ranking = ranked.iter().filter_map(|j| j.file.clone()).collect();

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        hand: args.hand.clone(),
        hand_sha256,
        sdf: args.sdf.display().to_string(),
        sdf_sha256,
        config: args.config.as_ref().map(|p| p.display().to_string()),
        config_sha256,
        seed: cfg.optimizer.seed,
        seeds: args.seeds,
        jobs,
        ranking,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    bytes.push(b'\n');
    write_file(&args.out.join(MANIFEST_NAME), &bytes)?;

    let ok = manifest.jobs.iter().filter(|j| j.ok).count();
    println!("{ok}/{} grasps written to {}", args.seeds, args.out.display());
    if args.seeds > 0 && ok == 0 {
        return Err(CliError::Numerical("every job failed".into()));
    }
    Ok(manifest)
}
