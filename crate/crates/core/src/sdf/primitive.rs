use serde::{Deserialize, Serialize};

use super::{Sdf, SdfError, SdfSample};
use crate::math::{Mat3, Transform, Vec3};

/// Closed-form shapes, used for test objects and hand collision geometry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Primitive {
    Sphere { center: Vec3, radius: f64 },
    /// Points within `radius` of the segment `a`-`b`.
    Capsule { a: Vec3, b: Vec3, radius: f64 },
    Box { center: Vec3, half_extents: Vec3 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveKind {
    Sphere,
    Capsule,
    Box,
}

impl std::str::FromStr for PrimitiveKind {
    type Err = SdfError;
    fn from_str(s: &str) -> Result<Self, SdfError> {
        match s {
            "sphere" => Ok(PrimitiveKind::Sphere),
            "capsule" => Ok(PrimitiveKind::Capsule),
            "box" | "cube" => Ok(PrimitiveKind::Box),
            _ => Err(SdfError::Parameter(format!("unknown primitive '{s}'"))),
        }
    }
}

fn outer(u: Vec3, v: Vec3) -> [[f64; 3]; 3] {
    let (u, v) = (u.to_array(), v.to_array());
    let mut m = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            m[a][b] = u[a] * v[b];
        }
    }
    m
}

/// Sample of `|p - c| - r` given `e = p - c`.
fn radial(e: Vec3, r: f64, axis: Option<Vec3>) -> SdfSample {
    let n = e.norm();
    if n < 1e-12 {
        return SdfSample { value: -r, dvalue: Vec3::ZERO, normal: Vec3::ZERO, dnormal: Mat3 { m: [[0.0; 3]; 3] } };
    }
    let u = e.scale(1.0 / n);
    let uu = outer(u, u);
    let aa = axis.map(|a| outer(a, a)).unwrap_or([[0.0; 3]; 3]);
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let id = if i == j { 1.0 } else { 0.0 };
            m[i][j] = (id - aa[i][j] - uu[i][j]) / n;
        }
    }
    SdfSample { value: n - r, dvalue: u, normal: u, dnormal: Mat3 { m } }
}

impl Primitive {
    pub fn validate(&self) -> Result<(), SdfError> {
        let ok = match *self {
            Primitive::Sphere { radius, .. } => radius > 0.0,
            Primitive::Capsule { radius, .. } => radius > 0.0,
            Primitive::Box { half_extents: h, .. } => h.x > 0.0 && h.y > 0.0 && h.z > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(SdfError::Parameter(format!("primitive dimensions must be positive: {self:?}")))
        }
    }

    pub fn sample(&self, p: Vec3) -> SdfSample {
        match *self {
            Primitive::Sphere { center, radius } => radial(p - center, radius, None),
            Primitive::Capsule { a, b, radius } => {
                let ab = b - a;
                let l2 = ab.norm_squared();
                let t = if l2 > 0.0 { ((p - a).dot(ab) / l2).clamp(0.0, 1.0) } else { 0.0 };
                let c = a + ab.scale(t);
                let axis = if t > 0.0 && t < 1.0 { Some(ab.scale(1.0 / l2.sqrt())) } else { None };
                radial(p - c, radius, axis)
            }
            Primitive::Box { center, half_extents } => {
                let q = p - center;
                let s = q.map(|v| if v < 0.0 { -1.0 } else { 1.0 });
                let d = Vec3::new(q.x.abs() - half_extents.x, q.y.abs() - half_extents.y, q.z.abs() - half_extents.z);
                if d.x > 0.0 || d.y > 0.0 || d.z > 0.0 {
                    let o = d.map(|v| v.max(0.0));
                    let n = o.norm();
                    let u = o.scale(1.0 / n);
                    let mut m = [[0.0; 3]; 3];
                    for i in 0..3 {
                        for j in 0..3 {
                            let id = if i == j && d[i] > 0.0 { 1.0 } else { 0.0 };
                            m[i][j] = s[i] * s[j] * (id - u[i] * u[j]) / n;
                        }
                    }
                    let g = Vec3::new(s.x * u.x, s.y * u.y, s.z * u.z);
                    SdfSample { value: n, dvalue: g, normal: g, dnormal: Mat3 { m } }
                } else {
                    let k = if d.x >= d.y && d.x >= d.z {
                        0
                    } else if d.y >= d.z {
                        1
                    } else {
                        2
                    };
                    let mut g = [0.0; 3];
                    g[k] = s[k];
                    let g = Vec3::from(g);
                    SdfSample { value: d[k], dvalue: g, normal: g, dnormal: Mat3 { m: [[0.0; 3]; 3] } }
                }
            }
        }
    }

    pub fn value(&self, p: Vec3) -> f64 {
        self.sample(p).value
    }

    /// Axis-aligned bounds of the shape.
    pub fn aabb(&self) -> (Vec3, Vec3) {
        match *self {
            Primitive::Sphere { center, radius } => (center.subf(Vec3::splat(radius)), center.addf(Vec3::splat(radius))),
            Primitive::Capsule { a, b, radius } => {
                let r = Vec3::splat(radius);
                (a.component_min(b) - r, a.component_max(b) + r)
            }
            Primitive::Box { center, half_extents } => (center - half_extents, center + half_extents),
        }
    }
}

/// A posed closed-form field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticSdf {
    pub shape: Primitive,
    pub pose: Transform,
}

impl AnalyticSdf {
    pub fn new(shape: Primitive) -> Result<Self, SdfError> {
        shape.validate()?;
        Ok(AnalyticSdf { shape, pose: Transform::IDENTITY })
    }

    pub fn with_pose(mut self, pose: Transform) -> Self {
        self.pose = pose;
        self
    }
}

impl Sdf for AnalyticSdf {
    fn pose(&self) -> &Transform {
        &self.pose
    }

    fn sample_local(&self, p: Vec3) -> SdfSample {
        self.shape.sample(p)
    }
}

/// Builds an origin-centered shape from a parameter list: `[r]` for a
/// sphere, `[hx, hy, hz]` (or a single edge half-length) for a box, and
/// `[r, half_length]` for a z-aligned capsule.
pub fn analytic_primitive(kind: PrimitiveKind, params: &[f64]) -> Result<AnalyticSdf, SdfError> {
    let bad = || SdfError::Parameter(format!("bad parameters {params:?} for {kind:?}"));
    let shape = match (kind, params) {
        (PrimitiveKind::Sphere, [r]) => Primitive::Sphere { center: Vec3::ZERO, radius: *r },
        (PrimitiveKind::Box, [h]) => Primitive::Box { center: Vec3::ZERO, half_extents: Vec3::splat(*h) },
        (PrimitiveKind::Box, [x, y, z]) => Primitive::Box { center: Vec3::ZERO, half_extents: Vec3::new(*x, *y, *z) },
        (PrimitiveKind::Capsule, [r, h]) if *h >= 0.0 => Primitive::Capsule {
            a: Vec3::new(0.0, 0.0, -h),
            b: Vec3::new(0.0, 0.0, *h),
            radius: *r,
        },
        _ => return Err(bad()),
    };
    if params.iter().any(|v| !v.is_finite()) {
        return Err(bad());
    }
    AnalyticSdf::new(shape)
}
