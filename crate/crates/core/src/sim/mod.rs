//! Penalty contact between a static kinematic hand and a free rigid object.
//!
//! Forces are expressed as acting on the object. A hand point below the
//! (offset) object surface pushes the object along `-grad(phi)` with
//! magnitude `k_n * depth`; Coulomb friction opposes the object's tangential
//! velocity at the point, capped by the friction cone.

mod body;

pub use body::{mass_properties, RigidBody};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diff::{norm, sum, Real};
use crate::math::{Mat3, Pose, Vec3};
use crate::sdf::{query_posed, LevelSetOffset, Sdf};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("simulation diverged at step {step}")]
    Divergence { step: usize },
    #[error("invalid contact parameters: {0}")]
    Params(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContactParams {
    /// Normal stiffness, N/m.
    pub k_n: f64,
    /// Friction stiffness, N per m/s of tangential velocity.
    pub k_f: f64,
    pub mu: f64,
    /// Derivative used for `min(d, 0)` when `d >= 0`.
    pub alpha: f64,
    /// Time step, s.
    pub dt: f64,
    pub offset: LevelSetOffset,
}

impl Default for ContactParams {
    fn default() -> Self {
        ContactParams { k_n: 1e6, k_f: 1e8, mu: 0.8, alpha: 0.1, dt: 1e-5, offset: LevelSetOffset::ZERO }
    }
}

impl ContactParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let nonneg = [self.k_n, self.k_f, self.mu].iter().all(|v| *v >= 0.0 && v.is_finite());
        if !nonneg {
            return Err(SimError::Params("k_n, k_f and mu must be nonnegative".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(SimError::Params(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::Params(format!("dt must be positive, got {}", self.dt)));
        }
        Ok(())
    }
}

/// Force a hand point exerts on the object.
#[derive(Clone, Copy, Debug)]
pub struct ContactForce<T> {
    pub point: Vec3<T>,
    pub f_n: Vec3<T>,
    pub f_t: Vec3<T>,
}

impl<T: Real> ContactForce<T> {
    pub fn total(&self) -> Vec3<T> {
        self.f_n + self.f_t
    }
}

/// Force and torque about the object center of mass, world frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Wrench<T = f64> {
    pub force: Vec3<T>,
    pub torque: Vec3<T>,
}

impl<T: Real> Wrench<T> {
    pub fn zero() -> Self {
        Wrench { force: Vec3::zero(), torque: Vec3::zero() }
    }

    pub fn from_array(a: [T; 6]) -> Self {
        Wrench { force: Vec3::new(a[0], a[1], a[2]), torque: Vec3::new(a[3], a[4], a[5]) }
    }

    pub fn to_array(self) -> [T; 6] {
        let (f, t) = (self.force, self.torque);
        [f.x, f.y, f.z, t.x, t.y, t.z]
    }

    pub fn value(&self) -> Wrench<f64> {
        Wrench { force: self.force.value(), torque: self.torque.value() }
    }
}

impl<T: Real> std::ops::Add for Wrench<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Wrench { force: self.force + o.force, torque: self.torque + o.torque }
    }
}

/// Rigid-body velocity: linear velocity of the center of mass and angular
/// velocity, both in the world frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Velocity<T = f64> {
    pub linear: Vec3<T>,
    pub angular: Vec3<T>,
}

impl<T: Real> Velocity<T> {
    pub fn zero() -> Self {
        Velocity { linear: Vec3::zero(), angular: Vec3::zero() }
    }

    pub fn lift(v: &Velocity) -> Self {
        Velocity { linear: v.linear.lift(), angular: v.angular.lift() }
    }

    pub fn value(&self) -> Velocity {
        Velocity { linear: self.linear.value(), angular: self.angular.value() }
    }

    /// `sqrt(|v|^2 + (rho |w|)^2)`: angular speed weighted by a length so
    /// both terms are in m/s.
    pub fn weighted_norm(&self, rho: f64) -> T {
        let (v, w) = (self.linear, self.angular);
        norm(&[v.x, v.y, v.z, w.x * rho, w.y * rho, w.z * rho])
    }
}

impl Velocity {
    pub fn from_linear(v: Vec3) -> Self {
        Velocity { linear: v, angular: Vec3::ZERO }
    }
}

/// Object configuration: `pose` maps object-local coordinates to world.
#[derive(Clone, Copy, Debug)]
pub struct ObjectState<T> {
    pub pose: Pose<T>,
    pub velocity: Velocity<T>,
}

impl<T: Real> ObjectState<T> {
    /// Object at the pose of its distance field with the given velocity.
    pub fn at_rest_pose<S: Sdf + ?Sized>(sdf: &S, velocity: Velocity<T>) -> Self {
        ObjectState { pose: Pose::from_transform(sdf.pose()), velocity }
    }

    pub fn com(&self, body: &RigidBody) -> Vec3<T> {
        self.pose.applyf(body.com)
    }

    /// Velocity of the object material point currently at `x`.
    pub fn point_velocity(&self, body: &RigidBody, x: Vec3<T>) -> Vec3<T> {
        self.velocity.linear + self.velocity.angular.cross(x - self.com(body))
    }
}

/// Contact force from a signed distance `d` (already offset) and field
/// gradient `g` at the point; `v_rel` is the object's velocity relative to
/// the hand at the point.
pub fn contact_force_from<T: Real>(d: T, g: Vec3<T>, v_rel: Vec3<T>, params: &ContactParams) -> (Vec3<T>, Vec3<T>) {
    let m = d.leaky_min_zero(params.alpha);
    let f_n = g * (m * params.k_n);
    let g_norm = g.norm();
    let f_n_mag = -m * params.k_n * g_norm;
    let f_t = if g_norm.value() > 0.0 {
        let n_hat = g * (T::cst(1.0) / g_norm);
        let v_t = v_rel - n_hat * v_rel.dot(n_hat);
        let vt_norm = v_t.norm();
        if vt_norm.value() < 1e-9 {
            Vec3::zero()
        } else {
            let mag = (vt_norm * params.k_f).min(f_n_mag * params.mu);
            v_t * (-mag / vt_norm)
        }
    } else {
        Vec3::zero()
    };
    (f_n, f_t)
}

/// `|f_n| = -k_n min(d, 0) |g|`, written through the leaky minimum so
/// that its derivative stays nonzero for separated points. (Differentiating
/// the norm of the zero vector would give 0.)
pub fn normal_force_magnitude<T: Real>(d: T, g: Vec3<T>, params: &ContactParams) -> T {
    -d.leaky_min_zero(params.alpha) * params.k_n * g.norm()
}

/// Contact force at world point `x` against an object whose field sits at
/// its own pose.
pub fn contact_force<S: Sdf + ?Sized, T: Real>(x: Vec3<T>, v_rel: Vec3<T>, sdf: &S, params: &ContactParams) -> ContactForce<T> {
    let pose = Pose::from_transform(sdf.pose());
    contact_force_posed(x, v_rel, sdf, &pose, params)
}

/// Contact force with the object field placed at a (possibly taped) pose.
pub fn contact_force_posed<S: Sdf + ?Sized, T: Real>(
    x: Vec3<T>,
    v_rel: Vec3<T>,
    sdf: &S,
    pose: &Pose<T>,
    params: &ContactParams,
) -> ContactForce<T> {
    let (phi, g) = query_posed(sdf, pose, x);
    let d = phi - params.offset.get();
    let (f_n, f_t) = contact_force_from(d, g, v_rel, params);
    ContactForce { point: x, f_n, f_t }
}

/// Wrench of one contact about `com`.
pub fn point_wrench<T: Real>(f: &ContactForce<T>, com: Vec3<T>) -> Wrench<T> {
    let fc = f.total();
    Wrench { force: fc, torque: (f.point - com).cross(fc) }
}

/// Net wrench of all contacts about `com`.
pub fn aggregate_wrench<T: Real>(forces: &[ContactForce<T>], com: Vec3<T>) -> Wrench<T> {
    sum_wrenches(&forces.iter().map(|f| point_wrench(f, com)).collect::<Vec<_>>())
}

/// Componentwise sum, one tape node per component.
pub fn sum_wrenches<T: Real>(ws: &[Wrench<T>]) -> Wrench<T> {
    if ws.is_empty() {
        return Wrench::zero();
    }
    let comp = |k: usize| sum(&ws.iter().map(|w| w.to_array()[k]).collect::<Vec<_>>());
    Wrench::from_array(std::array::from_fn(comp))
}

/// Semi-implicit Euler: velocities from forces first, then the pose from the
/// new velocities. No gyroscopic term, matching a plain `M^-1 f` update.
pub fn euler_step<T: Real>(
    state: &ObjectState<T>,
    body: &RigidBody,
    wrench: &Wrench<T>,
    external: &Wrench<T>,
    dt: f64,
) -> ObjectState<T> {
    let force = wrench.force + external.force;
    let torque = wrench.torque + external.torque;
    let r = state.pose.rotation;
    let linear = state.velocity.linear + force.scale(dt / body.mass);
    // World inverse inertia R I^-1 R^T.
    let local_torque = r.transpose().mul_vec(torque);
    let local_acc = body.inertia_inv.lift::<T>().mul_vec(local_torque);
    let angular = state.velocity.angular + r.mul_vec(local_acc).scale(dt);
    let com = state.com(body) + linear.scale(dt);
    let rotation = Mat3::exp(angular.scale(dt)).mul_mat(&r);
    let translation = com - rotation.mul_vec(body.com.lift());
    ObjectState { pose: Pose { rotation, translation }, velocity: Velocity { linear, angular } }
}

/// Per-point contact forces of a static hand on the object at `state`.
pub fn hand_forces<S: Sdf + ?Sized, T: Real>(
    points: &[Vec3<T>],
    sdf: &S,
    state: &ObjectState<T>,
    body: &RigidBody,
    params: &ContactParams,
) -> Vec<ContactForce<T>> {
    points
        .iter()
        .map(|&x| {
            let v_rel = state.point_velocity(body, x);
            contact_force_posed(x, v_rel, sdf, &state.pose, params)
        })
        .collect()
}

fn check_finite<T: Real>(state: &ObjectState<T>, step: usize) -> Result<(), SimError> {
    let v = state.velocity.value();
    let p = state.pose.translation.value();
    let ok = v.linear.to_array().iter().chain(v.angular.to_array().iter()).chain(p.to_array().iter()).all(|x| x.is_finite());
    if ok {
        Ok(())
    } else {
        Err(SimError::Divergence { step })
    }
}

/// Simulates `steps` steps of the object under the static hand's contact
/// forces (points in world coordinates) and returns the final state.
pub fn rollout_actual<S: Sdf + ?Sized, T: Real>(
    points: &[Vec3<T>],
    sdf: &S,
    body: &RigidBody,
    init: Velocity<T>,
    params: &ContactParams,
    steps: usize,
) -> Result<ObjectState<T>, SimError> {
    let mut state = ObjectState::at_rest_pose(sdf, init);
    for step in 0..steps {
        let forces = hand_forces(points, sdf, &state, body, params);
        let w = aggregate_wrench(&forces, state.com(body));
        state = euler_step(&state, body, &w, &Wrench::zero(), params.dt);
        check_finite(&state, step)?;
    }
    Ok(state)
}

/// Same stepping as [`rollout_actual`], with the contact wrench replaced by
/// the sum of prescribed per-point wrenches.
pub fn rollout_prescribed<S: Sdf + ?Sized, T: Real>(
    f_d: &[Wrench<T>],
    sdf: &S,
    body: &RigidBody,
    init: Velocity<T>,
    dt: f64,
    steps: usize,
) -> Result<ObjectState<T>, SimError> {
    let total = sum_wrenches(f_d);
    let mut state = ObjectState::at_rest_pose(sdf, init);
    for step in 0..steps {
        state = euler_step(&state, body, &total, &Wrench::zero(), dt);
        check_finite(&state, step)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests;
