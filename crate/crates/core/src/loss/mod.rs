//! Grasp objectives.
//!
//! * `task`: mean weighted speed of the object after `T` steps when the
//!   contact wrench is replaced by the prescribed per-point wrenches `f_d`,
//!   one rollout per reference velocity.
//! * `physics`: distance between the prescribed wrenches and the wrenches
//!   the hand actually exerts.
//! * `qrange`, `qlimit`: joint centering and limit violation.
//! * `inter`: hand self-penetration force.
//! * `grasp`: the unrelaxed objective (mean speed under actual contact
//!   forces), used when relaxation is switched off.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diff::{norm, sum, Real};
use crate::hand::{forward_kinematics, joint_losses, HandError, HandModel, HandPose, Kinematics};
use crate::math::{Pose, Transform, Vec3};
use crate::sdf::{query_local, query_with_grad, AnalyticSdf, Sdf};
use crate::sim::{
    contact_force_from, point_wrench, rollout_actual, rollout_prescribed, ContactForce, ContactParams, ObjectState, RigidBody,
    SimError, Velocity, Wrench,
};

#[derive(Debug, Error)]
pub enum LossError {
    #[error(transparent)]
    Hand(#[from] HandError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("prescribed wrenches have shape {got:?}, expected {expected:?}")]
    Shape { expected: (usize, usize), got: (usize, usize) },
    #[error("non-finite loss: {0}")]
    NonFinite(String),
}

/// Reference initial velocities for the stability rollouts: at rest and
/// moving at 1 cm/s along each diagonal direction.
pub fn default_velocities() -> Vec<Velocity> {
    vec![
        Velocity::from_linear(Vec3::ZERO),
        Velocity::from_linear(Vec3::splat(0.01)),
        Velocity::from_linear(Vec3::splat(-0.01)),
    ]
}

/// Everything fixed during one synthesis run.
pub struct GraspProblem<'a, S: Sdf + ?Sized> {
    pub model: &'a HandModel,
    pub object: &'a S,
    pub body: RigidBody,
    pub params: ContactParams,
    pub velocities: Vec<Velocity>,
    /// Rollout length in steps.
    pub steps: usize,
}

impl<'a, S: Sdf + ?Sized> GraspProblem<'a, S> {
    pub fn new(model: &'a HandModel, object: &'a S, body: RigidBody, params: ContactParams) -> Self {
        GraspProblem { model, object, body, params, velocities: default_velocities(), steps: 1 }
    }

    pub fn num_rollouts(&self) -> usize {
        self.velocities.len()
    }
}

/// Hand pose plus prescribed wrenches, `prescribed[m][i]` for rollout `m`
/// and hand point `i` (force N, torque N m about the object center of mass).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspCandidate {
    pub hand_pose: HandPose,
    pub prescribed: Vec<Vec<[f64; 6]>>,
}

impl GraspCandidate {
    /// Prescribed wrenches start at zero.
    pub fn new(hand_pose: HandPose, rollouts: usize, points: usize) -> Self {
        GraspCandidate { hand_pose, prescribed: vec![vec![[0.0; 6]; points]; rollouts] }
    }

    pub fn check_shape(&self, rollouts: usize, points: usize) -> Result<(), LossError> {
        let got = (self.prescribed.len(), self.prescribed.first().map_or(0, Vec::len));
        if got != (rollouts, points) || self.prescribed.iter().any(|r| r.len() != points) {
            return Err(LossError::Shape { expected: (rollouts, points), got });
        }
        Ok(())
    }
}

/// Loss values for one evaluation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub task: f64,
    pub physics: f64,
    pub qrange: f64,
    pub qlimit: f64,
    pub inter: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grasp: Option<f64>,
    /// Multipliers of the task and limit constraints at evaluation time.
    pub multipliers: [f64; 2],
    /// Hand points strictly inside the true object surface.
    pub contact_count: usize,
}

impl LossReport {
    pub fn all_finite(&self) -> bool {
        [self.task, self.physics, self.qrange, self.qlimit, self.inter, self.grasp.unwrap_or(0.0)]
            .iter()
            .chain(self.multipliers.iter())
            .all(|v| v.is_finite())
    }
}

/// Taped loss terms.
#[derive(Clone, Copy, Debug)]
pub struct LossTerms<T> {
    pub task: T,
    pub physics: T,
    pub qrange: T,
    pub qlimit: T,
    pub inter: T,
    pub grasp: Option<T>,
    pub contact_count: usize,
}

impl<T: Real> LossTerms<T> {
    pub fn report(&self, multipliers: [f64; 2]) -> LossReport {
        LossReport {
            task: self.task.value(),
            physics: self.physics.value(),
            qrange: self.qrange.value(),
            qlimit: self.qlimit.value(),
            inter: self.inter.value(),
            grasp: self.grasp.map(Real::value),
            multipliers,
            contact_count: self.contact_count,
        }
    }
}

/// Mean over rollouts of the final weighted speed under prescribed wrenches.
pub fn task_loss<S: Sdf + ?Sized, T: Real>(problem: &GraspProblem<'_, S>, f_d: &[Vec<Wrench<T>>]) -> Result<T, LossError> {
    let mut speeds = Vec::with_capacity(problem.velocities.len());
    for (m, v) in problem.velocities.iter().enumerate() {
        let end = rollout_prescribed(&f_d[m], problem.object, &problem.body, Velocity::lift(v), problem.params.dt, problem.steps)?;
        speeds.push(end.velocity.weighted_norm(problem.body.radius));
    }
    Ok(sum(&speeds) / speeds.len() as f64)
}

/// Actual per-point wrench for every rollout's reference velocity, object at
/// rest pose. The field is sampled once per point and shared by all
/// rollouts.
pub fn actual_wrenches<S: Sdf + ?Sized, T: Real>(problem: &GraspProblem<'_, S>, points: &[Vec3<T>]) -> Vec<Vec<Wrench<T>>> {
    let offset = problem.params.offset.get();
    let samples: Vec<(T, Vec3<T>)> = points
        .iter()
        .map(|&x| {
            let (phi, g) = query_with_grad(problem.object, x);
            (phi - offset, g)
        })
        .collect();
    problem
        .velocities
        .iter()
        .map(|v| {
            let state = ObjectState::at_rest_pose(problem.object, Velocity::lift(v));
            let com = state.com(&problem.body);
            points
                .iter()
                .zip(&samples)
                .map(|(&x, &(d, g))| {
                    let v_rel = state.point_velocity(&problem.body, x);
                    let (f_n, f_t) = contact_force_from(d, g, v_rel, &problem.params);
                    point_wrench(&ContactForce { point: x, f_n, f_t }, com)
                })
                .collect()
        })
        .collect()
}

/// Norm of the stacked residual between actual and prescribed wrenches over
/// all rollouts and points.
pub fn physics_loss<T: Real>(actual: &[Vec<Wrench<T>>], f_d: &[Vec<Wrench<T>>]) -> T {
    let mut residual = Vec::with_capacity(actual.len() * actual.first().map_or(0, Vec::len) * 6);
    for (am, dm) in actual.iter().zip(f_d) {
        for (a, d) in am.iter().zip(dm) {
            let (a, d) = (a.to_array(), d.to_array());
            for k in 0..6 {
                residual.push(a[k] - d[k]);
            }
        }
    }
    norm(&residual)
}

/// Penetration forces between non-neighbor links: each link's points
/// against the other link's primitives, normal term only.
pub fn self_intersection_loss<T: Real>(model: &HandModel, kin: &Kinematics<T>, params: &ContactParams) -> T {
    let mut stacked: Vec<T> = Vec::new();
    for (i, &x) in kin.points.iter().enumerate() {
        let a = model.point_link[i];
        for (b, link) in model.links.iter().enumerate() {
            if link.primitives.is_empty() || model.are_neighbors(a, b) {
                continue;
            }
            let frame = &kin.frames[b];
            let local = frame.value().apply_inverse(x.value());
            for prim in &link.primitives {
                if prim.value(local) >= 0.0 {
                    continue;
                }
                let s = AnalyticSdf { shape: *prim, pose: Transform::IDENTITY };
                let (d, g) = query_local(&s, frame.apply_inverse(x));
                let f = frame.rotation.mul_vec(g) * (d * params.k_n);
                stacked.extend([f.x, f.y, f.z]);
            }
        }
    }
    if stacked.is_empty() {
        T::zero()
    } else {
        norm(&stacked)
    }
}

/// Points strictly inside the true (unpadded) object surface.
pub fn count_contacts<S: Sdf + ?Sized, T: Real>(object: &S, points: &[Vec3<T>]) -> usize {
    points.iter().filter(|p| object.distance(p.value()) < 0.0).count()
}

/// All loss terms from taped pose and wrench variables on one tape.
pub fn evaluate<S: Sdf + ?Sized, T: Real>(
    problem: &GraspProblem<'_, S>,
    base: &Pose<T>,
    joints: &[T],
    f_d: &[Vec<Wrench<T>>],
    with_grasp: bool,
) -> Result<LossTerms<T>, LossError> {
    let p = problem.model.num_points();
    let got = (f_d.len(), f_d.first().map_or(0, Vec::len));
    if got != (problem.num_rollouts(), p) || f_d.iter().any(|r| r.len() != p) {
        return Err(LossError::Shape { expected: (problem.num_rollouts(), p), got });
    }
    let kin = forward_kinematics(problem.model, base, joints)?;
    let task = task_loss(problem, f_d)?;
    let actual = actual_wrenches(problem, &kin.points);
    let physics = physics_loss(&actual, f_d);
    let (qrange, qlimit) = joint_losses(problem.model, joints);
    let inter = self_intersection_loss(problem.model, &kin, &problem.params);
    let grasp = if with_grasp { Some(grasp_loss(problem, &kin.points)?) } else { None };
    let terms = LossTerms { task, physics, qrange, qlimit, inter, grasp, contact_count: count_contacts(problem.object, &kin.points) };
    let vals = [task.value(), physics.value(), qrange.value(), qlimit.value(), inter.value()];
    if let Some(bad) = vals.iter().position(|v| !v.is_finite()) {
        let names = ["task", "physics", "qrange", "qlimit", "inter"];
        return Err(LossError::NonFinite(names[bad].into()));
    }
    Ok(terms)
}

/// Mean final weighted speed under the hand's actual contact forces.
pub fn grasp_loss<S: Sdf + ?Sized, T: Real>(problem: &GraspProblem<'_, S>, points: &[Vec3<T>]) -> Result<T, LossError> {
    let mut speeds = Vec::with_capacity(problem.velocities.len());
    for v in &problem.velocities {
        let end = rollout_actual(points, problem.object, &problem.body, Velocity::lift(v), &problem.params, problem.steps)?;
        speeds.push(end.velocity.weighted_norm(problem.body.radius));
    }
    Ok(sum(&speeds) / speeds.len() as f64)
}

/// Plain-valued report for a stored candidate.
pub fn total_report<S: Sdf + ?Sized>(
    problem: &GraspProblem<'_, S>,
    candidate: &GraspCandidate,
    multipliers: [f64; 2],
) -> Result<LossReport, LossError> {
    candidate.hand_pose.validate(problem.model)?;
    candidate.check_shape(problem.num_rollouts(), problem.model.num_points())?;
    let base = Pose::from_transform(&candidate.hand_pose.base());
    let f_d: Vec<Vec<Wrench<f64>>> =
        candidate.prescribed.iter().map(|r| r.iter().map(|w| Wrench::from_array(*w)).collect()).collect();
    let terms = evaluate(problem, &base, &candidate.hand_pose.joints, &f_d, true)?;
    Ok(terms.report(multipliers))
}

#[cfg(test)]
mod tests;
