//! Object geometry as signed distance fields.
//!
//! [`Sdf`] implementors provide a local-frame sample (value, value gradient,
//! contact normal and its Jacobian). The free functions in this module lift
//! a sample into world space and onto the tape so that distances and
//! normals are differentiable with respect to query points.

mod bake;
mod extract;
mod grid;
mod mesh;
mod primitive;

pub use bake::{bake, BakeOptions};
pub use extract::extract_surface;
pub use grid::SdfGrid;
pub use mesh::TriMesh;
pub use primitive::{analytic_primitive, AnalyticSdf, Primitive, PrimitiveKind};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diff::Real;
use crate::math::{rotate, Mat3, Pose, Transform, Vec3};

#[derive(Debug, Error)]
pub enum SdfError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed SDF file: {0}")]
    Format(String),
    #[error("malformed mesh: {0}")]
    Mesh(String),
    #[error("mesh is not watertight: {count} grid nodes with inconsistent inside/outside votes, e.g. {examples:?}")]
    NotWatertight { count: usize, examples: Vec<[usize; 3]> },
    #[error("grid has no interior (no negative values)")]
    NoInterior,
}

/// One local-frame evaluation of a distance field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SdfSample {
    pub value: f64,
    /// Derivative of `value` with respect to the query point.
    pub dvalue: Vec3,
    /// Contact normal direction (the field gradient inside a grid cell, the
    /// clamping direction outside a grid).
    pub normal: Vec3,
    /// Jacobian of `normal` with respect to the query point; `dnormal.m[i][j]`
    /// is the derivative of component `i` along axis `j`.
    pub dnormal: Mat3,
}

pub trait Sdf: Send + Sync {
    /// Object-local frame to world.
    fn pose(&self) -> &Transform;

    fn sample_local(&self, p: Vec3) -> SdfSample;

    fn value_local(&self, p: Vec3) -> f64 {
        self.sample_local(p).value
    }

    /// Plain world-space distance.
    fn distance(&self, x: Vec3) -> f64 {
        self.value_local(self.pose().apply_inverse(x))
    }

    /// Plain world-space normal.
    fn normal(&self, x: Vec3) -> Vec3 {
        self.pose().rotation.mul_vec(self.sample_local(self.pose().apply_inverse(x)).normal)
    }
}

/// Radius of the padded level set `{x | phi(x) = r}` used in place of the
/// true surface during coarse-to-fine optimization.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LevelSetOffset(f64);

impl LevelSetOffset {
    pub const ZERO: LevelSetOffset = LevelSetOffset(0.0);

    pub fn new(r: f64) -> Result<Self, SdfError> {
        if r >= 0.0 && r.is_finite() {
            Ok(LevelSetOffset(r))
        } else {
            Err(SdfError::Parameter(format!("level-set offset must be nonnegative, got {r}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

fn world_sample<S: Sdf + ?Sized>(sdf: &S, x: Vec3) -> (SdfSample, Mat3) {
    let pose = sdf.pose();
    (sdf.sample_local(pose.apply_inverse(x)), pose.rotation)
}

/// Signed distance at a world point, differentiable with respect to it.
pub fn query<S: Sdf + ?Sized, T: Real>(sdf: &S, x: Vec3<T>) -> T {
    let (s, r) = world_sample(sdf, x.value());
    let g = r.mul_vec(s.dvalue);
    T::custom(s.value, &[(x.x, g.x), (x.y, g.y), (x.z, g.z)])
}

/// Contact normal at a world point, differentiable with respect to it.
pub fn grad<S: Sdf + ?Sized, T: Real>(sdf: &S, x: Vec3<T>) -> Vec3<T> {
    let (s, r) = world_sample(sdf, x.value());
    lift_normal(&s, &r, x)
}

/// Distance and normal from a single sample.
pub fn query_with_grad<S: Sdf + ?Sized, T: Real>(sdf: &S, x: Vec3<T>) -> (T, Vec3<T>) {
    let (s, r) = world_sample(sdf, x.value());
    let g = r.mul_vec(s.dvalue);
    let d = T::custom(s.value, &[(x.x, g.x), (x.y, g.y), (x.z, g.z)]);
    (d, lift_normal(&s, &r, x))
}

/// `query(x) - r`: distance to the offset surface.
pub fn effective_distance<S: Sdf + ?Sized, T: Real>(sdf: &S, x: Vec3<T>, offset: LevelSetOffset) -> T {
    query(sdf, x) - offset.get()
}

/// Distance and normal for a query already expressed in the field's local
/// frame (used when the frame itself is taped, e.g. hand links or a moving
/// object). The normal is returned in the local frame.
pub fn query_local<S: Sdf + ?Sized, T: Real>(sdf: &S, p: Vec3<T>) -> (T, Vec3<T>) {
    let s = sdf.sample_local(p.value());
    let d = T::custom(s.value, &[(p.x, s.dvalue.x), (p.y, s.dvalue.y), (p.z, s.dvalue.z)]);
    (d, lift_normal(&s, &Mat3::IDENTITY, p))
}

/// Distance and world normal when the field's pose is itself taped.
pub fn query_posed<S: Sdf + ?Sized, T: Real>(sdf: &S, pose: &Pose<T>, x: Vec3<T>) -> (T, Vec3<T>) {
    let p = pose.apply_inverse(x);
    let (d, n) = query_local(sdf, p);
    (d, pose.rotation.mul_vec(n))
}

fn lift_normal<T: Real>(s: &SdfSample, r: &Mat3, x: Vec3<T>) -> Vec3<T> {
    let n = r.mul_vec(s.normal);
    // R H R^T
    let j = r.mul_mat(&s.dnormal).mul_mat(&r.transpose());
    let comp = |i: usize, v: f64| T::custom(v, &[(x.x, j.m[i][0]), (x.y, j.m[i][1]), (x.z, j.m[i][2])]);
    Vec3::new(comp(0, n.x), comp(1, n.y), comp(2, n.z))
}

/// Rotates a constant local vector into the world frame of `sdf`.
pub fn to_world<S: Sdf + ?Sized, T: Real>(sdf: &S, v: Vec3<T>) -> Vec3<T> {
    rotate(&sdf.pose().rotation, v)
}

#[cfg(test)]
mod tests;
