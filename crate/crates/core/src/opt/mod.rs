//! Grasp synthesis: sampled initialization, coarse-to-fine surface padding,
//! Adamax updates and a modified differential multiplier method (MDMM) for
//! the inequality constraints `L_task <= C_task` and `L_qlimit <= C_limit`.
//!
//! Both constraints are normalized by their bounds before entering the
//! Lagrangian, `g = (L - C) / C`, so a single multiplier learning rate works
//! for both despite their very different scales. Each contributes the
//! augmented term `(max(0, lambda + c g)^2 - lambda^2) / (2c)` with damping
//! `c`; its gradient is `max(0, lambda + c g) dg`, which vanishes exactly when
//! the constraint holds and its multiplier is zero. Multipliers then ascend:
//! `lambda <- max(0, lambda + lr_lambda g)`.

mod adamax;

pub use adamax::Adamax;

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diff::{DiffError, Real, Tape, Var};
use crate::hand::{HandModel, HandPose};
use crate::loss::{evaluate, GraspCandidate, GraspProblem, LossError, LossReport};
use crate::math::{Mat3, Pose, Transform, Vec3};
use crate::metrics::{displacement_test, ShakeOptions};
use crate::sdf::{extract_surface, LevelSetOffset, Sdf, SdfError, SdfGrid, TriMesh};
use crate::sim::{ContactParams, RigidBody, Wrench};

#[derive(Debug, Error)]
pub enum OptError {
    #[error("invalid optimizer config: {0}")]
    Config(String),
    #[error("object surface: {0}")]
    Surface(String),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Sdf(#[from] SdfError),
}

/// Optimizer settings; every field has a default so a config file only
/// needs the ones it changes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub steps: usize,
    /// Learning rate for base translation (m), base rotation (rad) and joints (rad).
    pub lr_pose: f64,
    /// Learning rate for the prescribed wrenches.
    pub lr_forces: f64,
    pub c_task: f64,
    pub c_limit: f64,
    /// Quadratic damping of the constraint terms.
    pub damping: f64,
    /// Multiplier ascent rate on the normalized constraint residuals.
    pub lr_multiplier: f64,
    /// Steps over which the surface padding shrinks linearly to zero.
    pub smoothing_steps: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    /// Palm distance from the sampled approach point, m.
    pub approach_distance: f64,
    /// Gap kept between the padded surface and the nearest hand point at
    /// the start, m.
    pub init_margin: f64,
    /// Upper bound on the initial padding, m.
    pub max_init_offset: f64,
    /// Spacing of the candidates compared by the shake test once the
    /// padding has vanished.
    pub checkpoint_every: usize,
    /// Optimize with auxiliary prescribed wrenches. When off, the
    /// unrelaxed loss on actual contact forces is constrained instead.
    pub relaxation: bool,
    /// Shrink a padded surface; when off the true surface is used throughout.
    pub smoothing: bool,
    /// Keep the leaky contact gradient; when off `alpha = 0`.
    pub leak: bool,
    /// Learning-rate multiplier reached at the last step. Rates decay
    /// geometrically from 1 once the padding is gone, letting the hand
    /// settle within the sub-millimeter penetrations that carry the forces.
    pub final_lr_scale: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            steps: 7000,
            lr_pose: 3e-3,
            lr_forces: 1e-2,
            c_task: 1e-4,
            c_limit: 1e-4,
            damping: 1.0,
            lr_multiplier: 1.0,
            smoothing_steps: 5000,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
            approach_distance: 0.10,
            init_margin: 0.01,
            max_init_offset: 0.10,
            checkpoint_every: 500,
            relaxation: true,
            smoothing: true,
            leak: true,
            final_lr_scale: 0.01,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), OptError> {
        let bad = |m: &str| Err(OptError::Config(m.to_string()));
        if self.steps < self.smoothing_steps && self.smoothing {
            return bad("steps must be at least smoothing_steps");
        }
        let positive = [self.lr_pose, self.lr_forces, self.c_task, self.c_limit, self.eps];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("learning rates, constraint bounds and eps must be positive");
        }
        if !(self.damping >= 0.0 && self.lr_multiplier >= 0.0) {
            return bad("damping and lr_multiplier must be nonnegative");
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad("betas must lie in [0, 1)");
        }
        if !(self.approach_distance > 0.0 && self.init_margin >= 0.0 && self.max_init_offset >= 0.0) {
            return bad("approach_distance must be positive and offsets nonnegative");
        }
        if !(self.final_lr_scale > 0.0 && self.final_lr_scale <= 1.0) {
            return bad("final_lr_scale must be in (0, 1]");
        }
        if self.checkpoint_every == 0 {
            return bad("checkpoint_every must be positive");
        }
        Ok(())
    }
}

/// Lagrange multipliers of the task and joint-limit constraints.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MultiplierState {
    pub lambda: [f64; 2],
}

/// Normalized constraint residual `(value - bound) / bound`.
pub fn constraint_residual(value: f64, bound: f64) -> f64 {
    (value - bound) / bound
}

/// Augmented Lagrangian term of one inequality constraint.
pub fn constraint_term<T: Real>(value: T, bound: f64, lambda: f64, damping: f64) -> T {
    let g = (value - bound) * (1.0 / bound);
    if damping > 0.0 {
        let s = (g * damping + lambda).relu();
        (s * s - lambda * lambda) * (0.5 / damping)
    } else {
        g * lambda
    }
}

impl MultiplierState {
    /// Gradient ascent on the multipliers, projected onto `lambda >= 0`.
    pub fn update(&self, values: [f64; 2], config: &OptimizerConfig) -> MultiplierState {
        let bounds = [config.c_task, config.c_limit];
        let lambda = std::array::from_fn(|k| (self.lambda[k] + config.lr_multiplier * constraint_residual(values[k], bounds[k])).max(0.0));
        MultiplierState { lambda }
    }
}

/// Optimizer state for one synthesis run.
pub struct Mdmm {
    pub config: OptimizerConfig,
    pub multipliers: MultiplierState,
    pose: Adamax,
    forces: Adamax,
}

impl Mdmm {
    /// Scales both learning rates relative to the configured ones.
    pub fn set_lr_scale(&mut self, scale: f64) {
        self.pose.lr = self.config.lr_pose * scale;
        self.forces.lr = self.config.lr_forces * scale;
    }

    pub fn new(config: &OptimizerConfig, pose_dim: usize, force_dim: usize) -> Self {
        let c = config;
        Mdmm {
            config: c.clone(),
            multipliers: MultiplierState::default(),
            pose: Adamax::new(pose_dim, c.lr_pose, c.beta1, c.beta2, c.eps),
            forces: Adamax::new(force_dim, c.lr_forces, c.beta1, c.beta2, c.eps),
        }
    }

    /// Scalar objective: the minimized terms plus both constraint terms.
    pub fn objective<T: Real>(&self, minimized: T, task: T, qlimit: T) -> T {
        let c = &self.config;
        minimized
            + constraint_term(task, c.c_task, self.multipliers.lambda[0], c.damping)
            + constraint_term(qlimit, c.c_limit, self.multipliers.lambda[1], c.damping)
    }

    /// Parameter updates from the objective's gradients, then the
    /// multiplier ascent step using the constraint values at which the
    /// gradients were taken.
    pub fn step(&mut self, grad_pose: &[f64], grad_forces: &[f64], task: f64, qlimit: f64) -> Result<(Vec<f64>, Vec<f64>), OptError> {
        if let Some(i) = grad_pose.iter().chain(grad_forces).position(|g| !g.is_finite()) {
            return Err(DiffError::NonFinite { coordinate: Some(i) }.into());
        }
        let dp = self.pose.step(grad_pose);
        let df = self.forces.step(grad_forces);
        self.multipliers = self.multipliers.update([task, qlimit], &self.config);
        Ok((dp, df))
    }
}

/// Area-weighted sampler over the zero level set of a grid.
pub struct SurfaceSampler {
    mesh: TriMesh,
    cumulative: Vec<f64>,
}

impl SurfaceSampler {
    /// Extracts the grid's zero level set in world coordinates.
    pub fn new(grid: &SdfGrid) -> Result<Self, OptError> {
        let (lo, hi) = grid.bounds();
        let local = extract_surface(|p| grid.value_local(p), lo, hi, grid.dims(), 0.0);
        let pose = grid.pose();
        let mesh = TriMesh { vertices: local.vertices.iter().map(|&v| pose.apply(v)).collect(), faces: local.faces };
        let mut cumulative = Vec::with_capacity(mesh.faces.len());
        let mut acc = 0.0;
        for f in 0..mesh.faces.len() {
            let [a, b, c] = mesh.triangle(f);
            acc += 0.5 * (b - a).cross(c - a).norm();
            cumulative.push(acc);
        }
        if acc <= 0.0 {
            return Err(OptError::Surface("the grid has no zero level set".into()));
        }
        Ok(SurfaceSampler { mesh, cumulative })
    }

    pub fn area(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// A uniformly distributed surface point.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec3 {
        let target = rng.gen::<f64>() * self.area();
        let f = self.cumulative.partition_point(|&c| c < target).min(self.cumulative.len() - 1);
        let [a, b, c] = self.mesh.triangle(f);
        let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
        let s = r1.sqrt();
        a.scale(1.0 - s) + b.scale(s * (1.0 - r2)) + c.scale(s * r2)
    }
}

/// Fully open hand facing a random surface point from `distance` away, with
/// a uniformly random roll about the approach direction.
pub fn sample_initial_pose<S: Sdf + ?Sized, R: Rng>(
    model: &HandModel,
    object: &S,
    surface: &SurfaceSampler,
    rng: &mut R,
    distance: f64,
) -> Result<HandPose, OptError> {
    let joints = model.open_joints();
    let rest = model.kinematics(&HandPose::new(Transform::IDENTITY, joints.clone())).map_err(LossError::from)?;
    let palm_frame = rest.frames[model.palm.link].value();
    let palm_center = palm_frame.apply(model.palm.center);
    let palm_normal = palm_frame.rotation.mul_vec(model.palm.normal).normalized();
    for _ in 0..100 {
        let a = surface.sample(rng);
        let roll = rng.gen::<f64>() * std::f64::consts::TAU;
        let n = object.normal(a);
        if n.norm() < 1e-6 {
            continue;
        }
        let n = n.normalized();
        let align = Mat3::rotation_between(palm_normal, -n);
        let rotation = Mat3::axis_angle(n, roll).mul_mat(&align).orthonormalized();
        let translation = a + n.scale(distance) - rotation.mul_vec(palm_center);
        return Ok(HandPose::new(Transform::new(rotation, translation), joints));
    }
    Err(OptError::Surface("no surface point with a usable normal after 100 attempts".into()))
}

/// Padding radius at `step`: `init_r` shrinking linearly to 0 at
/// `smoothing_steps`.
pub fn smoothing_radius(step: usize, init_r: f64, config: &OptimizerConfig) -> f64 {
    if !config.smoothing || config.smoothing_steps == 0 {
        return 0.0;
    }
    init_r * (1.0 - step as f64 / config.smoothing_steps as f64).max(0.0)
}

/// Learning-rate multiplier at `step`: 1 while the padding shrinks, then a
/// geometric decay reaching `final_lr_scale` at the last step.
pub fn lr_scale(step: usize, config: &OptimizerConfig) -> f64 {
    let start = if config.smoothing { config.smoothing_steps } else { 0 };
    if step <= start || config.steps <= start + 1 {
        return 1.0;
    }
    let frac = ((step - start) as f64 / (config.steps - 1 - start) as f64).min(1.0);
    config.final_lr_scale.powf(frac)
}

/// Starting padding: distance from the object to the nearest hand point,
/// less the margin, within `[0, max_init_offset]`.
pub fn initial_offset<S: Sdf + ?Sized>(model: &HandModel, object: &S, pose: &HandPose, config: &OptimizerConfig) -> f64 {
    let kin = match model.kinematics(pose) {
        Ok(k) => k,
        Err(_) => return 0.0,
    };
    let closest = kin.points.iter().map(|&p| object.distance(p)).fold(f64::INFINITY, f64::min);
    (closest - config.init_margin).clamp(0.0, config.max_init_offset)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub step: usize,
    pub offset: f64,
    pub report: LossReport,
}

/// A candidate compared by the shake test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub step: usize,
    pub candidate: GraspCandidate,
    /// Losses at the true surface.
    pub report: LossReport,
    /// Shake-test displacement, cm.
    #[serde(serialize_with = "crate::metrics::ser_inf", deserialize_with = "crate::metrics::de_inf")]
    pub displacement: f64,
}

#[derive(Clone, Debug)]
pub struct Synthesis {
    pub initial: HandPose,
    /// The selected checkpoint.
    pub best: Checkpoint,
    pub checkpoints: Vec<Checkpoint>,
    pub trace: Vec<TraceEntry>,
    pub multipliers: MultiplierState,
    /// The run stopped early on a non-finite value.
    pub diverged: bool,
}

impl Synthesis {
    pub fn candidate(&self) -> &GraspCandidate {
        &self.best.candidate
    }
}

/// Everything fixed across the steps of one run.
pub struct SynthesisInputs<'a> {
    pub model: &'a HandModel,
    pub object: &'a SdfGrid,
    pub body: RigidBody,
    pub params: ContactParams,
    pub shake: ShakeOptions,
}

struct State {
    rotation: Mat3,
    translation: Vec3,
    joints: Vec<f64>,
    /// Prescribed wrenches as `[force, torque / torque_scale]`, so a step of
    /// the force learning rate moves both halves by comparable amounts.
    forces: Vec<f64>,
    torque_scale: f64,
}

impl State {
    fn hand_pose(&self) -> HandPose {
        HandPose::new(Transform::new(self.rotation.orthonormalized(), self.translation), self.joints.clone())
    }

    fn candidate(&self, rollouts: usize, points: usize) -> GraspCandidate {
        let mut c = GraspCandidate::new(self.hand_pose(), rollouts, points);
        if !self.forces.is_empty() {
            for (m, row) in c.prescribed.iter_mut().enumerate() {
                for (i, w) in row.iter_mut().enumerate() {
                    let o = (m * points + i) * 6;
                    w.copy_from_slice(&self.forces[o..o + 6]);
                    w[3..].iter_mut().for_each(|x| *x *= self.torque_scale);
                }
            }
        }
        c
    }
}

/// Random stream for job `job` of a batch seeded with `seed`.
pub fn job_rng(seed: u64, job: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(job);
    rng
}

/// Runs one optimization from a sampled initialization.
///
/// After the padding has vanished, the iterate is recorded every
/// `checkpoint_every` steps and at the end; the returned grasp is the
/// checkpoint that meets both constraints (if any does) with the smallest
/// shake-test displacement, later steps winning ties.
pub fn synthesize(inputs: &SynthesisInputs<'_>, config: &OptimizerConfig, job: u64) -> Result<Synthesis, OptError> {
    config.validate()?;
    inputs.params.validate().map_err(LossError::from)?;
    let model = inputs.model;
    let mut rng = job_rng(config.seed, job);
    let surface = SurfaceSampler::new(inputs.object)?;
    let initial = sample_initial_pose(model, inputs.object, &surface, &mut rng, config.approach_distance)?;
    let init_r = initial_offset(model, inputs.object, &initial, config);

    let base_params = ContactParams { alpha: if config.leak { inputs.params.alpha } else { 0.0 }, ..inputs.params };
    let mut problem = GraspProblem::new(model, inputs.object, inputs.body, base_params);
    let (m_count, p_count, j_count) = (problem.num_rollouts(), model.num_points(), model.num_joints());
    let force_dim = if config.relaxation { m_count * p_count * 6 } else { 0 };
    let init_base = initial.base();
    let mut state = State {
        rotation: init_base.rotation,
        translation: init_base.translation,
        joints: initial.joints.clone(),
        forces: vec![0.0; force_dim],
        torque_scale: inputs.body.radius,
    };
    let mut opt = Mdmm::new(config, 6 + j_count, force_dim);
    let mut trace = Vec::with_capacity(config.steps);
    let mut snapshots: Vec<(usize, GraspCandidate)> = Vec::new();
    let mut diverged = false;
    debug!("job {job}: initial padding {init_r:.4} m");

    for step in 0..config.steps {
        let r = smoothing_radius(step, init_r, config);
        problem.params.offset = LevelSetOffset::new(r)?;
        opt.set_lr_scale(lr_scale(step, config));
        if r == 0.0 && step % config.checkpoint_every == 0 {
            snapshots.push((step, state.candidate(m_count, p_count)));
        }
        let tape = Tape::new();
        let mut pose_in = vec![state.translation.x, state.translation.y, state.translation.z, 0.0, 0.0, 0.0];
        pose_in.extend(&state.joints);
        let pose_vars = tape.vars(&pose_in);
        let force_vars = tape.vars(&state.forces);
        let base = Pose {
            rotation: Mat3::exp(Vec3::new(pose_vars[3], pose_vars[4], pose_vars[5])).mul_matf(&state.rotation),
            translation: Vec3::new(pose_vars[0], pose_vars[1], pose_vars[2]),
        };
        let f_d = wrench_table(&force_vars, m_count, p_count, state.torque_scale);
        let terms = match evaluate(&problem, &base, &pose_vars[6..], &f_d, !config.relaxation) {
            Ok(t) => t,
            Err(e) => {
                warn!("job {job}: stopping at step {step}: {e}");
                diverged = true;
                break;
            }
        };
        let (minimized, task) = match terms.grasp {
            None => (terms.physics + terms.qrange + terms.inter, terms.task),
            Some(grasp) => (terms.qrange + terms.inter, grasp),
        };
        let objective = opt.objective(minimized, task, terms.qlimit);
        let report = terms.report(opt.multipliers.lambda);
        let grads = match tape.backward(objective) {
            Ok(g) => g,
            Err(e) => {
                warn!("job {job}: stopping at step {step}: {e}");
                diverged = true;
                break;
            }
        };
        let (gp, gf) = (grads.wrt(&pose_vars), grads.wrt(&force_vars));
        if log::log_enabled!(log::Level::Trace) && step % 100 == 0 {
            let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            log::trace!(
                "job {job} step {step}: |g_t| {:.3e} |g_w| {:.3e} |g_q| {:.3e} |g_f| {:.3e} t {:?} task {:.3e} phys {:.3e}",
                norm(&gp[0..3]), norm(&gp[3..6]), norm(&gp[6..]), norm(&gf), state.translation, report.task, report.physics
            );
        }
        if step % 500 == 0 {
            debug!(
                "job {job} step {step}: r {r:.4} task {:.3e} physics {:.3e} qlimit {:.2e} inter {:.2e} contacts {} lambda {:?}",
                report.task, report.physics, report.qlimit, report.inter, report.contact_count, opt.multipliers.lambda
            );
        }
        trace.push(TraceEntry { step, offset: r, report });
        let (dp, df) = match opt.step(&gp, &gf, task.value(), terms.qlimit.value()) {
            Ok(d) => d,
            Err(e) => {
                warn!("job {job}: stopping at step {step}: {e}");
                diverged = true;
                break;
            }
        };
        state.translation += Vec3::new(dp[0], dp[1], dp[2]);
        state.rotation = Mat3::exp(Vec3::new(dp[3], dp[4], dp[5])).mul_mat(&state.rotation).orthonormalized();
        for (q, d) in state.joints.iter_mut().zip(&dp[6..]) {
            *q += d;
        }
        for (f, d) in state.forces.iter_mut().zip(&df) {
            *f += d;
        }
    }
    let last_step = trace.len();
    if snapshots.last().map(|s| s.0) != Some(last_step) {
        snapshots.push((last_step, state.candidate(m_count, p_count)));
    }

    // Score every snapshot at the true surface.
    let final_params = ContactParams { offset: LevelSetOffset::ZERO, ..base_params };
    let scorer = GraspProblem::new(model, inputs.object, inputs.body, final_params);
    let mut checkpoints = Vec::with_capacity(snapshots.len());
    for (step, candidate) in snapshots {
        let report = match report_for(&scorer, &candidate, config, opt.multipliers.lambda) {
            Ok(r) => r,
            Err(e) => {
                warn!("job {job}: skipping checkpoint {step}: {e}");
                continue;
            }
        };
        let points = model.kinematics(&candidate.hand_pose).map_err(LossError::from)?.points;
        let displacement = displacement_test(&points, inputs.object, &inputs.body, &final_params, &inputs.shake);
        checkpoints.push(Checkpoint { step, candidate, report, displacement });
    }
    let best = select_checkpoint(&checkpoints, config)
        .cloned()
        .ok_or_else(|| OptError::Surface("no finite checkpoint".into()))?;
    Ok(Synthesis { initial, best, checkpoints, trace, multipliers: opt.multipliers, diverged })
}

fn wrench_table<'t>(vars: &[Var<'t>], rollouts: usize, points: usize, torque_scale: f64) -> Vec<Vec<Wrench<Var<'t>>>> {
    if vars.is_empty() {
        return vec![vec![Wrench::zero(); points]; rollouts];
    }
    (0..rollouts)
        .map(|m| {
            (0..points)
                .map(|i| {
                    let o = (m * points + i) * 6;
                    Wrench::from_array(std::array::from_fn(|k| if k < 3 { vars[o + k] } else { vars[o + k] * torque_scale }))
                })
                .collect()
        })
        .collect()
}

fn report_for(
    problem: &GraspProblem<'_, SdfGrid>,
    candidate: &GraspCandidate,
    config: &OptimizerConfig,
    multipliers: [f64; 2],
) -> Result<LossReport, LossError> {
    let mut r = crate::loss::total_report(problem, candidate, multipliers)?;
    if config.relaxation {
        r.grasp = None;
    }
    Ok(r)
}

/// Whether a report meets both constraints.
pub fn feasible(report: &LossReport, config: &OptimizerConfig) -> bool {
    let task = if config.relaxation { report.task } else { report.grasp.unwrap_or(report.task) };
    task <= config.c_task && report.qlimit <= config.c_limit
}

/// Feasible first, then smallest displacement, then latest step.
pub fn select_checkpoint<'c>(checkpoints: &'c [Checkpoint], config: &OptimizerConfig) -> Option<&'c Checkpoint> {
    checkpoints.iter().min_by(|a, b| {
        let fa = feasible(&a.report, config);
        let fb = feasible(&b.report, config);
        fb.cmp(&fa).then(a.displacement.total_cmp(&b.displacement)).then(b.step.cmp(&a.step))
    })
}
