//! Grasp quality measures.
//!
//! Hand volume and surface are measured on a 1 mm voxel lattice aligned with
//! the world axes. The stability measures are a sampled epsilon (largest
//! origin-centered ball in the grasp wrench space) and a shake test that
//! holds the hand still and lets gravity pull the object along each of the
//! six axis directions.

mod epsilon;

pub use epsilon::{epsilon_metric, epsilon_of_wrenches, pyramid_wrenches, EpsilonOptions, W6};

use std::collections::HashSet;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::hand::{HandError, HandModel, HandPose, Kinematics};
use crate::math::{Transform, Vec3};
use crate::sdf::Sdf;
use crate::sim::{contact_force_from, euler_step, point_wrench, ContactForce, ContactParams, ObjectState, RigidBody, Velocity, Wrench};

/// Voxel edge length for the volume and area measures, meters.
pub const VOXEL: f64 = 1e-3;

/// Gravitational acceleration used by the shake test, m/s^2.
pub const GRAVITY: f64 = 9.8;

/// A contact for the wrench-space measure: world point and the unit normal
/// along which the hand pushes the object.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contact {
    pub point: Vec3,
    pub normal: Vec3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// cm^2
    pub contact_area: f64,
    /// cm^3
    pub interpen_volume: f64,
    /// contact_area / interpen_volume in 1/cm, absent when nothing overlaps.
    pub ratio: Option<f64>,
    pub epsilon: f64,
    /// Mean center-of-mass displacement over the six gravity directions, cm.
    /// Infinite when the simulation diverged.
    #[serde(serialize_with = "ser_inf", deserialize_with = "de_inf")]
    pub displacement: f64,
    pub contact_count: usize,
}

pub(crate) fn ser_inf<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str("inf")
    }
}

pub(crate) fn de_inf<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Num {
        F(f64),
        S(String),
    }
    match Num::deserialize(d)? {
        Num::F(v) => Ok(v),
        Num::S(s) if s == "inf" => Ok(f64::INFINITY),
        Num::S(s) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {s:?}"))),
    }
}

fn voxel_of(x: Vec3) -> [i64; 3] {
    [(x.x / VOXEL).floor() as i64, (x.y / VOXEL).floor() as i64, (x.z / VOXEL).floor() as i64]
}

fn voxel_center(v: [i64; 3]) -> Vec3 {
    Vec3::new((v[0] as f64 + 0.5) * VOXEL, (v[1] as f64 + 0.5) * VOXEL, (v[2] as f64 + 0.5) * VOXEL)
}

/// Voxels whose centers lie inside any collision primitive of the posed
/// hand.
pub fn voxelize_hand(model: &HandModel, kin: &Kinematics<f64>) -> HashSet<[i64; 3]> {
    let mut occupied = HashSet::new();
    for (link, frame) in model.links.iter().zip(&kin.frames) {
        let frame: Transform = frame.value();
        for prim in &link.primitives {
            let (lo, hi) = prim.aabb();
            let mut wlo = Vec3::splat(f64::INFINITY);
            let mut whi = Vec3::splat(f64::NEG_INFINITY);
            for c in 0..8 {
                let corner = Vec3::new(
                    if c & 1 == 0 { lo.x } else { hi.x },
                    if c & 2 == 0 { lo.y } else { hi.y },
                    if c & 4 == 0 { lo.z } else { hi.z },
                );
                let w = frame.apply(corner);
                wlo = wlo.component_min(w);
                whi = whi.component_max(w);
            }
            let (a, b) = (voxel_of(wlo), voxel_of(whi));
            for i in a[0]..=b[0] {
                for j in a[1]..=b[1] {
                    for k in a[2]..=b[2] {
                        let v = [i, j, k];
                        if occupied.contains(&v) {
                            continue;
                        }
                        if prim.value(frame.apply_inverse(voxel_center(v))) < 0.0 {
                            occupied.insert(v);
                        }
                    }
                }
            }
        }
    }
    occupied
}

/// Hand voxels inside the object, in cm^3.
pub fn interpenetration_volume<S: Sdf + ?Sized>(model: &HandModel, kin: &Kinematics<f64>, object: &S) -> f64 {
    let voxels = voxelize_hand(model, kin);
    interpenetration_from(&voxels, object)
}

fn interpenetration_from<S: Sdf + ?Sized>(voxels: &HashSet<[i64; 3]>, object: &S) -> f64 {
    let n = voxels.iter().filter(|&&v| object.distance(voxel_center(v)) < 0.0).count();
    n as f64 * (VOXEL * 100.0).powi(3)
}

/// Occupied voxels with at least one face neighbor outside the hand: the
/// hand treated as a hollow shell one voxel thick.
pub fn shell(voxels: &HashSet<[i64; 3]>) -> Vec<[i64; 3]> {
    const N6: [[i64; 3]; 6] = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];
    let mut out: Vec<[i64; 3]> = voxels
        .iter()
        .filter(|v| N6.iter().any(|d| !voxels.contains(&[v[0] + d[0], v[1] + d[1], v[2] + d[2]])))
        .copied()
        .collect();
    out.sort_unstable();
    out
}

/// Shell voxels within `band` meters of the object surface, in cm^2.
pub fn contact_area<S: Sdf + ?Sized>(model: &HandModel, kin: &Kinematics<f64>, object: &S, band: f64) -> f64 {
    let voxels = voxelize_hand(model, kin);
    contact_area_from(&voxels, object, band)
}

fn contact_area_from<S: Sdf + ?Sized>(voxels: &HashSet<[i64; 3]>, object: &S, band: f64) -> f64 {
    let n = shell(voxels).into_iter().filter(|&v| object.distance(voxel_center(v)).abs() < band).count();
    n as f64 * (VOXEL * 100.0).powi(2)
}

/// Hand surface points strictly inside the object, each with the inward
/// surface normal.
pub fn extract_contacts<S: Sdf + ?Sized>(points: &[Vec3], object: &S) -> Vec<Contact> {
    points
        .iter()
        .filter(|&&p| object.distance(p) < 0.0)
        .filter_map(|&p| {
            let n = object.normal(p);
            (n.norm() > 1e-9).then(|| Contact { point: p, normal: -n.normalized() })
        })
        .collect()
}

/// Settings for [`displacement_test`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShakeOptions {
    pub steps: usize,
    pub dt: f64,
    pub gravity: f64,
    /// Fraction of the explicit stability limit used for substeps.
    pub safety: f64,
}

impl Default for ShakeOptions {
    fn default() -> Self {
        ShakeOptions { steps: 500, dt: 1e-3, gravity: GRAVITY, safety: 0.3 }
    }
}

/// Mean displacement, in cm, of the object's center of mass after
/// `steps * dt` seconds under gravity along each of `±x, ±y, ±z`, with the
/// hand held fixed at its world points.
///
/// Contact forces follow the training model at the true surface. Each step
/// is split into substeps short enough for the normal springs to stay
/// stable, and the friction force at a contact is capped by what would stop
/// its slip within one substep, so the stiff viscous regularization cannot
/// overshoot. Returns infinity if the state blows up.
pub fn displacement_test<S: Sdf + ?Sized>(
    points: &[Vec3],
    object: &S,
    body: &RigidBody,
    params: &ContactParams,
    opts: &ShakeOptions,
) -> f64 {
    let dirs = [Vec3::X, -Vec3::X, Vec3::Y, -Vec3::Y, Vec3::Z, -Vec3::Z];
    let total: f64 = dirs.iter().map(|&g| shake_one(points, object, body, params, opts, g.scale(opts.gravity))).sum();
    total / dirs.len() as f64
}

/// Center-of-mass displacement in cm for one gravity vector.
pub fn shake_one<S: Sdf + ?Sized>(
    points: &[Vec3],
    object: &S,
    body: &RigidBody,
    params: &ContactParams,
    opts: &ShakeOptions,
    gravity: Vec3,
) -> f64 {
    let params = ContactParams { offset: Default::default(), ..*params };
    // Effective mass seen by a contact at the bounding radius.
    let inv_mass = 1.0 / body.mass + body.radius * body.radius / body.min_inertia();
    let k_total = params.k_n * points.len().max(1) as f64;
    let dt_stable = 2.0 / (k_total * inv_mass).sqrt();
    let substeps = (opts.dt / (opts.safety * dt_stable)).ceil().max(1.0) as usize;
    let h = opts.dt / substeps as f64;

    let external = Wrench { force: gravity.scale(body.mass), torque: Vec3::ZERO };
    let mut state: ObjectState<f64> = ObjectState::at_rest_pose(object, Velocity::zero());
    let start = state.com(body);
    let mut forces: Vec<ContactForce<f64>> = Vec::with_capacity(points.len());
    for _ in 0..opts.steps * substeps {
        forces.clear();
        let com = state.com(body);
        let reach = body.radius + 1e-3;
        let pose = state.pose.value();
        for &x in points {
            if (x - com).norm() > reach {
                continue;
            }
            // The field rides along with the body.
            let s = object.sample_local(pose.apply_inverse(x));
            if s.value >= 0.0 {
                continue;
            }
            let (d, g) = (s.value, pose.rotation.mul_vec(s.normal));
            let v_rel = state.point_velocity(body, x);
            let (f_n, f_t) = contact_force_from(d, g, v_rel, &params);
            forces.push(ContactForce { point: x, f_n, f_t });
        }
        let n_active = forces.len().max(1) as f64;
        let mut wrench = Wrench::zero();
        for f in &mut forces {
            let vt = f.f_t.norm();
            if vt > 0.0 {
                let v_rel = state.point_velocity(body, f.point);
                let n_hat = f.f_n.normalized();
                let slip = (v_rel - n_hat.scale(v_rel.dot(n_hat))).norm();
                let cap = slip / (h * n_active * inv_mass);
                if vt > cap {
                    f.f_t = f.f_t.scale(cap / vt);
                }
            }
            wrench = wrench + point_wrench(f, com);
        }
        state = euler_step(&state, body, &wrench, &external, h);
        let c = state.com(body);
        if !(c.x.is_finite() && c.y.is_finite() && c.z.is_finite()) || (c - start).norm() > 1e3 {
            return f64::INFINITY;
        }
    }
    (state.com(body) - start).norm() * 100.0
}

/// Every measure for one grasp.
pub fn evaluate_grasp<S: Sdf + ?Sized>(
    model: &HandModel,
    pose: &HandPose,
    object: &S,
    body: &RigidBody,
    params: &ContactParams,
    eps: &EpsilonOptions,
    shake: &ShakeOptions,
) -> Result<EvalReport, HandError> {
    pose.validate(model)?;
    let kin = model.kinematics(pose)?;
    let voxels = voxelize_hand(model, &kin);
    let interpen_volume = interpenetration_from(&voxels, object);
    let contact_area = contact_area_from(&voxels, object, VOXEL);
    let contacts = extract_contacts(&kin.points, object);
    let com = object.pose().apply(body.com);
    let epsilon = epsilon_metric(&contacts, params.mu, com, body.radius, eps);
    let displacement = displacement_test(&kin.points, object, body, params, shake);
    let ratio = (interpen_volume > 0.0).then(|| contact_area / interpen_volume);
    Ok(EvalReport { contact_area, interpen_volume, ratio, epsilon, displacement, contact_count: contacts.len() })
}
