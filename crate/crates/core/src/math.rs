//! Fixed-size vectors, rotations and rigid transforms generic over [`Real`].

use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::diff::Real;

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Vec3<T = f64> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl Serialize for Vec3 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.x, self.y, self.z].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vec3 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        <[f64; 3]>::deserialize(d).map(Vec3::from)
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl<T: Copy> Vec3<T> {
    pub const fn new(x: T, y: T, z: T) -> Self {
        Vec3 { x, y, z }
    }

    pub fn splat(v: T) -> Self {
        Vec3 { x: v, y: v, z: v }
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn map<U, F: Fn(T) -> U>(self, f: F) -> Vec3<U> {
        Vec3 { x: f(self.x), y: f(self.y), z: f(self.z) }
    }
}

impl<T> Index<usize> for Vec3<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    /// Embeds constants into any scalar type.
    pub fn lift<T: Real>(self) -> Vec3<T> {
        self.map(T::cst)
    }

    pub fn normalized(self) -> Vec3 {
        let n = self.norm();
        if n > 0.0 {
            self * (1.0 / n)
        } else {
            self
        }
    }

    pub fn component_min(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn component_max(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    /// A unit vector orthogonal to `self` (which must be nonzero).
    pub fn any_orthonormal(self) -> Vec3 {
        let a = if self.x.abs() < 0.9 { Vec3::X } else { Vec3::Y };
        self.cross(a).normalized()
    }
}

impl<T: Real> Vec3<T> {
    pub fn zero() -> Self {
        Vec3::splat(T::zero())
    }

    pub fn value(self) -> Vec3 {
        self.map(|c| c.value())
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn dotf(self, o: Vec3) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Vec3 {
            x: self.y * o.z - self.z * o.y,
            y: self.z * o.x - self.x * o.z,
            z: self.x * o.y - self.y * o.x,
        }
    }

    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    pub fn norm(self) -> T {
        self.norm_squared().sqrt()
    }

    pub fn scale(self, s: f64) -> Self {
        Vec3 { x: self.x * s, y: self.y * s, z: self.z * s }
    }

    pub fn addf(self, o: Vec3) -> Self {
        Vec3 { x: self.x + o.x, y: self.y + o.y, z: self.z + o.z }
    }

    pub fn subf(self, o: Vec3) -> Self {
        Vec3 { x: self.x - o.x, y: self.y - o.y, z: self.z - o.z }
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Vec3 { x: self.x + o.x, y: self.y + o.y, z: self.z + o.z }
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Vec3 { x: self.x - o.x, y: self.y - o.y, z: self.z - o.z }
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Vec3 { x: -self.x, y: -self.y, z: -self.z }
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Vec3 { x: self.x * s, y: self.y * s, z: self.z * s }
    }
}

/// Row-major 3x3 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat3<T = f64> {
    pub m: [[T; 3]; 3],
}

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3 { m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] };

    pub fn lift<T: Real>(&self) -> Mat3<T> {
        Mat3 { m: self.m.map(|r| r.map(T::cst)) }
    }

    pub fn diag(d: Vec3) -> Mat3 {
        Mat3 { m: [[d.x, 0.0, 0.0], [0.0, d.y, 0.0], [0.0, 0.0, d.z]] }
    }

    pub fn from_cols(a: Vec3, b: Vec3, c: Vec3) -> Mat3 {
        Mat3 { m: [[a.x, b.x, c.x], [a.y, b.y, c.y], [a.z, b.z, c.z]] }
    }

    pub fn col(&self, j: usize) -> Vec3 {
        Vec3::new(self.m[0][j], self.m[1][j], self.m[2][j])
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn inverse(&self) -> Option<Mat3> {
        let det = self.determinant();
        if det.abs() < 1e-300 || !det.is_finite() {
            return None;
        }
        let m = &self.m;
        let c = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
        let inv = [
            [c(1, 2, 1, 2), -c(0, 2, 1, 2), c(0, 1, 1, 2)],
            [-c(1, 2, 0, 2), c(0, 2, 0, 2), -c(0, 1, 0, 2)],
            [c(1, 2, 0, 1), -c(0, 2, 0, 1), c(0, 1, 0, 1)],
        ];
        Some(Mat3 { m: inv.map(|r| r.map(|v| v / det)) })
    }

    /// Re-orthonormalizes a near-rotation (Gram-Schmidt on columns).
    pub fn orthonormalized(&self) -> Mat3 {
        let a = self.col(0).normalized();
        let b = (self.col(1) - a * a.dot(self.col(1))).normalized();
        let c = a.cross(b);
        Mat3::from_cols(a, b, c)
    }

    /// Smallest rotation taking unit `from` onto unit `to`.
    pub fn rotation_between(from: Vec3, to: Vec3) -> Mat3 {
        let c = from.dot(to);
        if c < -1.0 + 1e-12 {
            let axis = from.any_orthonormal();
            return Mat3::axis_angle(axis, std::f64::consts::PI);
        }
        let v = from.cross(to);
        let k = 1.0 / (1.0 + c);
        let vx = skew(v);
        let vx2 = vx.mul_mat(&vx);
        let mut r = Mat3::IDENTITY;
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] += vx.m[i][j] + k * vx2.m[i][j];
            }
        }
        r
    }

    pub fn max_abs_diff(&self, o: &Mat3) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                d = d.max((self.m[i][j] - o.m[i][j]).abs());
            }
        }
        d
    }
}

impl<T: Real> Mat3<T> {
    pub fn identity() -> Self {
        Mat3::IDENTITY.lift()
    }

    pub fn value(&self) -> Mat3 {
        Mat3 { m: self.m.map(|r| r.map(|v| v.value())) }
    }

    pub fn transpose(&self) -> Self {
        let m = &self.m;
        Mat3 { m: [[m[0][0], m[1][0], m[2][0]], [m[0][1], m[1][1], m[2][1]], [m[0][2], m[1][2], m[2][2]]] }
    }

    pub fn mul_vec(&self, v: Vec3<T>) -> Vec3<T> {
        let m = &self.m;
        Vec3 {
            x: m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            y: m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            z: m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        }
    }

    pub fn mul_mat(&self, o: &Self) -> Self {
        let mut out = [[T::zero(); 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = self.m[i][0] * o.m[0][j] + self.m[i][1] * o.m[1][j] + self.m[i][2] * o.m[2][j];
            }
        }
        Mat3 { m: out }
    }

    /// `self * c` where `c` holds constants.
    pub fn mul_matf(&self, o: &Mat3) -> Self {
        let mut out = [[T::zero(); 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = self.m[i][0] * o.m[0][j] + self.m[i][1] * o.m[1][j] + self.m[i][2] * o.m[2][j];
            }
        }
        Mat3 { m: out }
    }

    /// Rotation by `angle` about the unit `axis` (Rodrigues).
    pub fn axis_angle(axis: Vec3, angle: T) -> Self {
        let (s, c) = (angle.sin(), angle.cos());
        let omc = T::cst(1.0) - c;
        let (x, y, z) = (axis.x, axis.y, axis.z);
        Mat3 {
            m: [
                [c + omc * (x * x), omc * (x * y) - s * z, omc * (x * z) + s * y],
                [omc * (y * x) + s * z, c + omc * (y * y), omc * (y * z) - s * x],
                [omc * (z * x) - s * y, omc * (z * y) + s * x, c + omc * (z * z)],
            ],
        }
    }

    /// Exponential map of a rotation vector. First-order near zero so the
    /// derivative at the origin is exact.
    pub fn exp(w: Vec3<T>) -> Self {
        let theta2 = w.norm_squared().value();
        let (a, b) = if theta2 < 1e-16 {
            (T::cst(1.0), T::cst(0.5))
        } else {
            let theta = w.norm();
            let a = theta.sin() / theta;
            let b = (T::cst(1.0) - theta.cos()) / (theta * theta);
            (a, b)
        };
        let k = skew(w);
        let k2 = k.mul_mat(&k);
        let mut r = Mat3::identity();
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] = r.m[i][j] + a * k.m[i][j] + b * k2.m[i][j];
            }
        }
        r
    }
}

/// Constant matrix times a taped vector.
pub fn rotate<T: Real>(r: &Mat3, v: Vec3<T>) -> Vec3<T> {
    let m = &r.m;
    Vec3 {
        x: v.x * m[0][0] + v.y * m[0][1] + v.z * m[0][2],
        y: v.x * m[1][0] + v.y * m[1][1] + v.z * m[1][2],
        z: v.x * m[2][0] + v.y * m[2][1] + v.z * m[2][2],
    }
}

/// Transpose of a constant matrix times a taped vector.
pub fn rotate_inv<T: Real>(r: &Mat3, v: Vec3<T>) -> Vec3<T> {
    let m = &r.m;
    Vec3 {
        x: v.x * m[0][0] + v.y * m[1][0] + v.z * m[2][0],
        y: v.x * m[0][1] + v.y * m[1][1] + v.z * m[2][1],
        z: v.x * m[0][2] + v.y * m[1][2] + v.z * m[2][2],
    }
}

pub fn skew<T: Real>(w: Vec3<T>) -> Mat3<T> {
    let z = T::zero();
    Mat3 { m: [[z, -w.z, w.y], [w.z, z, -w.x], [-w.y, w.x, z]] }
}

/// Unit quaternion `(w, x, y, z)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<[f64; 4]> for Quat {
    fn from(a: [f64; 4]) -> Self {
        Quat { w: a[0], x: a[1], y: a[2], z: a[3] }
    }
}

impl From<Quat> for [f64; 4] {
    fn from(q: Quat) -> Self {
        [q.w, q.x, q.y, q.z]
    }
}

impl Default for Quat {
    fn default() -> Self {
        Quat::IDENTITY
    }
}

impl Quat {
    pub const IDENTITY: Quat = Quat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(&self) -> Quat {
        let n = self.norm();
        Quat { w: self.w / n, x: self.x / n, y: self.y / n, z: self.z / n }
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Quat {
        let (s, c) = (0.5 * angle).sin_cos();
        let a = axis.normalized();
        Quat { w: c, x: a.x * s, y: a.y * s, z: a.z * s }
    }

    /// Exponential map of a rotation vector.
    pub fn exp(w: Vec3) -> Quat {
        let theta = w.norm();
        if theta < 1e-12 {
            return Quat { w: 1.0, x: 0.5 * w.x, y: 0.5 * w.y, z: 0.5 * w.z }.normalized();
        }
        Quat::from_axis_angle(w * (1.0 / theta), theta)
    }

    pub fn mul(&self, o: &Quat) -> Quat {
        Quat {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }

    pub fn to_mat(&self) -> Mat3 {
        let Quat { w, x, y, z } = *self;
        Mat3 {
            m: [
                [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
                [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
                [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
            ],
        }
    }

    pub fn from_mat(r: &Mat3) -> Quat {
        let m = &r.m;
        let tr = m[0][0] + m[1][1] + m[2][2];
        let q = if tr > 0.0 {
            let s = (tr + 1.0).sqrt() * 2.0;
            Quat { w: 0.25 * s, x: (m[2][1] - m[1][2]) / s, y: (m[0][2] - m[2][0]) / s, z: (m[1][0] - m[0][1]) / s }
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
            Quat { w: (m[2][1] - m[1][2]) / s, x: 0.25 * s, y: (m[0][1] + m[1][0]) / s, z: (m[0][2] + m[2][0]) / s }
        } else if m[1][1] > m[2][2] {
            let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
            Quat { w: (m[0][2] - m[2][0]) / s, x: (m[0][1] + m[1][0]) / s, y: 0.25 * s, z: (m[1][2] + m[2][1]) / s }
        } else {
            let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
            Quat { w: (m[1][0] - m[0][1]) / s, x: (m[0][2] + m[2][0]) / s, y: (m[1][2] + m[2][1]) / s, z: 0.25 * s }
        };
        q.normalized()
    }
}

/// Rigid transform `x -> R x + t` with constant coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transform {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Default for Transform {
    fn default() -> Self {
        Transform::IDENTITY
    }
}

impl Transform {
    pub const IDENTITY: Transform = Transform { rotation: Mat3::IDENTITY, translation: Vec3::ZERO };

    pub fn new(rotation: Mat3, translation: Vec3) -> Self {
        Transform { rotation, translation }
    }

    pub fn from_translation(t: Vec3) -> Self {
        Transform { rotation: Mat3::IDENTITY, translation: t }
    }

    pub fn apply<T: Real>(&self, p: Vec3<T>) -> Vec3<T> {
        rotate(&self.rotation, p).addf(self.translation)
    }

    pub fn apply_inverse<T: Real>(&self, p: Vec3<T>) -> Vec3<T> {
        rotate_inv(&self.rotation, p.subf(self.translation))
    }

    pub fn compose(&self, o: &Transform) -> Transform {
        Transform {
            rotation: self.rotation.mul_mat(&o.rotation),
            translation: self.apply(o.translation),
        }
    }

    pub fn inverse(&self) -> Transform {
        let rt = self.rotation.transpose();
        Transform { rotation: rt, translation: -rt.mul_vec(self.translation) }
    }
}

/// Rigid transform with taped coefficients.
#[derive(Clone, Copy, Debug)]
pub struct Pose<T> {
    pub rotation: Mat3<T>,
    pub translation: Vec3<T>,
}

impl<T: Real> Pose<T> {
    pub fn from_transform(t: &Transform) -> Self {
        Pose { rotation: t.rotation.lift(), translation: t.translation.lift() }
    }

    pub fn value(&self) -> Transform {
        Transform { rotation: self.rotation.value(), translation: self.translation.value() }
    }

    pub fn apply(&self, p: Vec3<T>) -> Vec3<T> {
        self.rotation.mul_vec(p) + self.translation
    }

    pub fn applyf(&self, p: Vec3) -> Vec3<T> {
        self.rotation.mul_vec(p.lift()) + self.translation
    }

    pub fn apply_inverse(&self, p: Vec3<T>) -> Vec3<T> {
        self.rotation.transpose().mul_vec(p - self.translation)
    }

    pub fn compose(&self, o: &Pose<T>) -> Pose<T> {
        Pose { rotation: self.rotation.mul_mat(&o.rotation), translation: self.apply(o.translation) }
    }

    /// `self * c` with a constant right factor.
    pub fn composef(&self, o: &Transform) -> Pose<T> {
        Pose { rotation: self.rotation.mul_matf(&o.rotation), translation: self.applyf(o.translation) }
    }
}
