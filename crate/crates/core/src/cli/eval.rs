use std::io::Write;

use log::warn;
use serde::{Deserialize, Serialize};

use super::synth::{GraspFile, SynthConfig};
use super::{file_hash, hand_hash, load_grid, load_hand, write_file, CliError, EvalArgs};
use crate::metrics::{evaluate_grasp, EvalReport};
use crate::sim::mass_properties;

/// One line of `eval` output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvalLine {
    Grasp {
        file: String,
        /// False when the hand or grid differs from the one the grasp was
        /// synthesized against.
        inputs_match: bool,
        report: EvalReport,
    },
    Top(TopAggregate),
    Missing {
        file: String,
        error: String,
    },
}

/// Means over the `k` grasps with the smallest displacement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopAggregate {
    pub k: usize,
    /// How many grasps were available; fewer than `k` when the batch is small.
    pub count: usize,
    pub contact_area: f64,
    pub interpen_volume: f64,
    /// Mean over the grasps whose ratio is defined; absent if none is.
    pub ratio: Option<f64>,
    pub epsilon: f64,
    #[serde(serialize_with = "crate::metrics::ser_inf", deserialize_with = "crate::metrics::de_inf")]
    pub displacement: f64,
    pub contact_count: f64,
}

/// Aggregates the best `k` reports by displacement. `None` for an empty
/// slice.
pub fn aggregate_top(reports: &[EvalReport], k: usize) -> Option<TopAggregate> {
    if reports.is_empty() || k == 0 {
        return None;
    }
    let mut sorted: Vec<&EvalReport> = reports.iter().collect();
    sorted.sort_by(|a, b| a.displacement.total_cmp(&b.displacement));
    sorted.truncate(k);
    let n = sorted.len() as f64;
    let mean = |f: &dyn Fn(&EvalReport) -> f64| sorted.iter().map(|r| f(r)).sum::<f64>() / n;
    let ratios: Vec<f64> = sorted.iter().filter_map(|r| r.ratio).collect();
    Some(TopAggregate {
        k,
        count: sorted.len(),
        contact_area: mean(&|r| r.contact_area),
        interpen_volume: mean(&|r| r.interpen_volume),
        ratio: (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
        epsilon: mean(&|r| r.epsilon),
        displacement: mean(&|r| r.displacement),
        contact_count: mean(&|r| r.contact_count as f64),
    })
}

/// Scores every grasp file; unreadable files are reported and skipped.
pub fn cmd_eval(args: &EvalArgs) -> Result<Vec<EvalLine>, CliError> {
    let model = load_hand(&args.hand)?;
    let grid = load_grid(&args.sdf)?;
    let (cfg, _) = SynthConfig::load(args.config.as_deref())?;
    let body = mass_properties(&grid, cfg.density)?;
    let hand_sha = hand_hash(&args.hand, &model)?;
    let sdf_sha = file_hash(&args.sdf)?;

    let mut lines = Vec::new();
    let mut reports = Vec::new();
    for path in &args.grasps {
        let file = path.display().to_string();
        let grasp = match GraspFile::load(path) {
            Ok(g) => g,
            Err(e) => {
                warn!("skipping {file}: {e}");
                lines.push(EvalLine::Missing { file, error: e.to_string() });
                continue;
            }
        };
        let inputs_match = grasp.hand_sha256 == hand_sha && grasp.sdf_sha256 == sdf_sha;
        if !inputs_match {
            warn!("{file} was synthesized against a different hand or object");
        }
        match evaluate_grasp(&model, &grasp.candidate.hand_pose, &grid, &body, &cfg.contact, &cfg.epsilon, &cfg.shake) {
            Ok(report) => {
                reports.push(report.clone());
                lines.push(EvalLine::Grasp { file, inputs_match, report });
            }
            Err(e) => {
                warn!("skipping {file}: {e}");
                lines.push(EvalLine::Missing { file, error: e.to_string() });
            }
        }
    }
    for k in [2, 5] {
        if let Some(a) = aggregate_top(&reports, k) {
            lines.push(EvalLine::Top(a));
        }
    }

    let mut out = Vec::new();
    for l in &lines {
        serde_json::to_writer(&mut out, l).expect("eval line serializes");
        out.push(b'\n');
    }
    match &args.out {
        Some(p) => write_file(p, &out)?,
        None => std::io::stdout().write_all(&out).map_err(|e| CliError::Io(e.to_string()))?,
    }
    Ok(lines)
}
