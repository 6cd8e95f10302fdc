//! Runs a few synthesis jobs on a 3 cm sphere and prints a summary.
//!
//! `cargo run --release -p graspd --example sphere_run -- [jobs] [steps] [hand]`

use graspd::hand::HandModel;
use graspd::math::Vec3;
use graspd::metrics::{evaluate_grasp, EpsilonOptions, ShakeOptions};
use graspd::opt::{synthesize, OptimizerConfig, SynthesisInputs};
use graspd::sdf::SdfGrid;
use graspd::sim::{mass_properties, ContactParams};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GRASPD_LOG", "info")).init();
    let args: Vec<String> = std::env::args().collect();
    let jobs: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let steps: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(7000);
    let hand = HandModel::builtin(args.get(3).map(String::as_str).unwrap_or("tripod")).unwrap();
    let grid = SdfGrid::from_fn([64; 3], Vec3::splat(-0.06), Vec3::splat(0.06), |p| p.norm() - 0.03).unwrap();
    let body = mass_properties(&grid, 1000.0).unwrap();
    let params = ContactParams::default();
    let mut cfg: OptimizerConfig = match std::env::var("CFG") {
        Ok(s) => serde_json::from_str(&s).unwrap(),
        Err(_) => OptimizerConfig::default(),
    };
    cfg.steps = steps;
    cfg.smoothing_steps = cfg.smoothing_steps.min(steps * 5 / 7);
    let inputs = SynthesisInputs { model: &hand, object: &grid, body, params, shake: ShakeOptions::default() };
    for job in 0..jobs {
        let t = std::time::Instant::now();
        let s = synthesize(&inputs, &cfg, job).unwrap();
        if std::env::var("SHOW_LINKS").is_ok() {
            for c in &s.checkpoints {
                let kin = hand.kinematics(&c.candidate.hand_pose).unwrap();
                let mut per = vec![f64::INFINITY; hand.links.len()];
                for (i, p) in kin.points.iter().enumerate() {
                    let l = hand.point_link[i];
                    per[l] = per[l].min(graspd::sdf::Sdf::distance(&grid, *p));
                }
                println!("  step {} min phi per link (mm): {:?}", c.step, per.iter().map(|d| (d * 1e4).round() / 10.0).collect::<Vec<_>>());
            }
        }
        let e = evaluate_grasp(&hand, &s.best.candidate.hand_pose, &grid, &body, &params, &EpsilonOptions::default(), &ShakeOptions::default()).unwrap();
        println!(
            "job {job}: {:.1}s step {} task {:.3e} phys {:.3e} qlim {:.2e} inter {:.2e} | contacts {} eps {:.4} disp {:.3} cm area {:.2} vol {:.3} | ckpts {:?}",
            t.elapsed().as_secs_f64(),
            s.best.step,
            s.best.report.task,
            s.best.report.physics,
            s.best.report.qlimit,
            s.best.report.inter,
            e.contact_count,
            e.epsilon,
            e.displacement,
            e.contact_area,
            e.interpen_volume,
            s.checkpoints.iter().map(|c| (c.step, (c.report.task * 1e5).round() / 1e5, (c.displacement * 100.0).round() / 100.0)).collect::<Vec<_>>()
        );
    }
}
