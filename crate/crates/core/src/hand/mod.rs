//! Articulated hand: a tree of links joined by revolute joints, each link
//! carrying surface sample points (used for hand-object contact) and
//! collision primitives (used for self-intersection and voxel metrics).
//!
//! Hands are described in JSON. Lengths are meters, angles radians:
//!
//! ```json
//! {
//!   "name": "example",
//!   "links": [
//!     { "name": "palm", "parent": null,
//!       "points": [[0, 0, 0]],
//!       "primitives": [{ "type": "box", "center": [0, 0, -0.01], "half_extents": [0.03, 0.03, 0.01] }] },
//!     { "name": "finger", "parent": "palm",
//!       "origin": { "xyz": [0.03, 0, 0], "rpy": [0, 0, 0] },
//!       "joint": { "axis": [0, -1, 0], "lower": -0.3, "upper": 1.4, "open_at": "lower" },
//!       "points": [[0, 0, 0.04]],
//!       "primitives": [{ "type": "capsule", "a": [0, 0, 0], "b": [0, 0, 0.04], "radius": 0.009 }] }
//!   ],
//!   "palm": { "link": "palm", "center": [0, 0, 0], "normal": [0, 0, 1] },
//!   "neighbors": [["palm", "finger"]]
//! }
//! ```
//!
//! `origin` places the link's joint frame in its parent's frame (`rpy` is
//! applied as `Rz(yaw) * Ry(pitch) * Rx(roll)`). Every non-root link has a
//! joint rotating about `axis` in its own frame. Parent-child pairs are
//! always treated as neighbors; `neighbors` adds more pairs excluded from
//! self-intersection.

mod fk;

pub use fk::{forward_kinematics, joint_losses, Kinematics};

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{Mat3, Quat, Transform, Vec3};
use crate::sdf::Primitive;

#[derive(Debug, Error)]
pub enum HandError {
    #[error("invalid hand description at {field}: {message}")]
    Validation { field: String, message: String },
    #[error("hand description is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("expected {expected} joint angles, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("no bundled hand named '{0}'")]
    UnknownBuiltin(String),
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> HandError {
    HandError::Validation { field: field.into(), message: message.into() }
}

/// Which limit opens the hand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OpenAt {
    #[default]
    Lower,
    Upper,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Joint {
    pub axis: Vec3,
    pub lower: f64,
    pub upper: f64,
    pub open_at: OpenAt,
}

impl Joint {
    pub fn open_angle(&self) -> f64 {
        match self.open_at {
            OpenAt::Lower => self.lower,
            OpenAt::Upper => self.upper,
        }
    }

    pub fn midrange(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Link {
    pub name: String,
    pub parent: Option<usize>,
    /// Joint frame in the parent's frame.
    pub origin: Transform,
    /// Index into [`HandModel::joints`]; `None` only for the root.
    pub joint: Option<usize>,
    pub points: Vec<Vec3>,
    pub primitives: Vec<Primitive>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Palm {
    pub link: usize,
    pub center: Vec3,
    /// Unit outward normal in the palm link frame.
    pub normal: Vec3,
}

/// Validated, immutable hand description. Links are stored parents-first.
#[derive(Clone, Debug, PartialEq)]
pub struct HandModel {
    pub name: String,
    pub links: Vec<Link>,
    pub joints: Vec<Joint>,
    pub palm: Palm,
    /// Unordered link pairs `(a, b)` with `a < b` excluded from
    /// self-intersection.
    pub neighbors: BTreeSet<(usize, usize)>,
    /// Link of every surface point, in [`Kinematics::points`] order.
    pub point_link: Vec<usize>,
}

impl HandModel {
    pub fn load(path: &Path) -> Result<Self, HandError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_json(text: &str) -> Result<Self, HandError> {
        let desc: HandDescription = serde_json::from_str(text)?;
        desc.build()
    }

    /// Bundled hands: `"tripod"` (3 fingers, 9 joints) and `"pinch"`
    /// (2 fingers, 4 joints).
    pub fn builtin(name: &str) -> Result<Self, HandError> {
        let text = match name {
            "tripod" => include_str!("../../assets/hands/tripod.json"),
            "pinch" => include_str!("../../assets/hands/pinch.json"),
            _ => return Err(HandError::UnknownBuiltin(name.to_string())),
        };
        Self::from_json(text)
    }

    pub fn num_joints(&self) -> usize {
        self.joints.len()
    }

    pub fn num_points(&self) -> usize {
        self.point_link.len()
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.links.iter().position(|l| l.name == name)
    }

    /// Links without children.
    pub fn fingertips(&self) -> Vec<usize> {
        (0..self.links.len()).filter(|&i| !self.links.iter().any(|l| l.parent == Some(i))).collect()
    }

    pub fn are_neighbors(&self, a: usize, b: usize) -> bool {
        a == b || self.neighbors.contains(&(a.min(b), a.max(b)))
    }

    pub fn open_joints(&self) -> Vec<f64> {
        self.joints.iter().map(Joint::open_angle).collect()
    }

    pub fn midrange_joints(&self) -> Vec<f64> {
        self.joints.iter().map(Joint::midrange).collect()
    }

    pub fn to_description(&self) -> HandDescription {
        HandDescription {
            name: self.name.clone(),
            links: self
                .links
                .iter()
                .map(|l| LinkDescription {
                    name: l.name.clone(),
                    parent: l.parent.map(|p| self.links[p].name.clone()),
                    origin: OriginDescription {
                        xyz: l.origin.translation,
                        rpy: rpy_from_matrix(&l.origin.rotation),
                    },
                    joint: l.joint.map(|j| {
                        let j = self.joints[j];
                        JointDescription { axis: j.axis, lower: j.lower, upper: j.upper, open_at: j.open_at }
                    }),
                    points: l.points.clone(),
                    primitives: l.primitives.clone(),
                })
                .collect(),
            palm: PalmDescription {
                link: self.links[self.palm.link].name.clone(),
                center: self.palm.center,
                normal: self.palm.normal,
            },
            neighbors: self
                .neighbors
                .iter()
                .filter(|&&(a, b)| self.links[b].parent != Some(a) && self.links[a].parent != Some(b))
                .map(|&(a, b)| (self.links[a].name.clone(), self.links[b].name.clone()))
                .collect(),
        }
    }
}

/// Hand configuration: free base plus one angle per joint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandPose {
    pub position: Vec3,
    /// Unit quaternion `[w, x, y, z]`.
    pub orientation: Quat,
    pub joints: Vec<f64>,
}

impl HandPose {
    pub fn new(base: Transform, joints: Vec<f64>) -> Self {
        HandPose { position: base.translation, orientation: Quat::from_mat(&base.rotation), joints }
    }

    pub fn base(&self) -> Transform {
        Transform::new(self.orientation.to_mat(), self.position)
    }

    pub fn validate(&self, model: &HandModel) -> Result<(), HandError> {
        if self.joints.len() != model.num_joints() {
            return Err(HandError::Dimension { expected: model.num_joints(), got: self.joints.len() });
        }
        if (self.orientation.norm() - 1.0).abs() > 1e-9 {
            return Err(invalid("orientation", format!("quaternion norm {} is not 1", self.orientation.norm())));
        }
        let finite = self.joints.iter().chain(self.position.to_array().iter()).all(|v| v.is_finite());
        if !finite {
            return Err(invalid("pose", "non-finite value"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandDescription {
    pub name: String,
    pub links: Vec<LinkDescription>,
    pub palm: PalmDescription,
    #[serde(default)]
    pub neighbors: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkDescription {
    pub name: String,
    pub parent: Option<String>,
    #[serde(default)]
    pub origin: OriginDescription,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint: Option<JointDescription>,
    #[serde(default)]
    pub points: Vec<Vec3>,
    #[serde(default)]
    pub primitives: Vec<Primitive>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct OriginDescription {
    #[serde(default)]
    pub xyz: Vec3,
    #[serde(default)]
    pub rpy: Vec3,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointDescription {
    pub axis: Vec3,
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub open_at: OpenAt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PalmDescription {
    pub link: String,
    pub center: Vec3,
    pub normal: Vec3,
}

pub fn matrix_from_rpy(rpy: Vec3) -> Mat3 {
    let rx = Mat3::axis_angle(Vec3::X, rpy.x);
    let ry = Mat3::axis_angle(Vec3::Y, rpy.y);
    let rz = Mat3::axis_angle(Vec3::Z, rpy.z);
    rz.mul_mat(&ry).mul_mat(&rx)
}

fn rpy_from_matrix(r: &Mat3) -> Vec3 {
    let m = &r.m;
    let pitch = (-m[2][0]).clamp(-1.0, 1.0).asin();
    if m[2][0].abs() < 1.0 - 1e-12 {
        Vec3::new(m[2][1].atan2(m[2][2]), pitch, m[1][0].atan2(m[0][0]))
    } else {
        Vec3::new(0.0, pitch, (-m[0][1]).atan2(m[1][1]))
    }
}

fn finite3(v: Vec3) -> bool {
    v.x.is_finite() && v.y.is_finite() && v.z.is_finite()
}

impl HandDescription {
    pub fn build(&self) -> Result<HandModel, HandError> {
        if self.links.is_empty() {
            return Err(invalid("links", "no links"));
        }
        let mut by_name = HashMap::new();
        for (i, l) in self.links.iter().enumerate() {
            if by_name.insert(l.name.as_str(), i).is_some() {
                return Err(invalid(format!("links[{i}].name"), format!("duplicate link name '{}'", l.name)));
            }
        }
        let mut parent = vec![None; self.links.len()];
        for (i, l) in self.links.iter().enumerate() {
            if let Some(p) = &l.parent {
                let pi = *by_name
                    .get(p.as_str())
                    .ok_or_else(|| invalid(format!("links.{}.parent", l.name), format!("unknown link '{p}'")))?;
                parent[i] = Some(pi);
            }
        }
        // Walk each chain to the root; a walk longer than the link count loops.
        for i in 0..self.links.len() {
            let mut cur = i;
            let mut steps = 0;
            while let Some(p) = parent[cur] {
                cur = p;
                steps += 1;
                if steps > self.links.len() {
                    return Err(invalid(
                        format!("links.{}.parent", self.links[i].name),
                        "cycle in link hierarchy",
                    ));
                }
            }
        }
        let roots: Vec<usize> = (0..self.links.len()).filter(|&i| parent[i].is_none()).collect();
        if roots.len() != 1 {
            return Err(invalid("links", format!("expected exactly one root link, found {}", roots.len())));
        }

        // Parents-first ordering.
        let mut order = Vec::with_capacity(self.links.len());
        let mut stack = vec![roots[0]];
        while let Some(i) = stack.pop() {
            order.push(i);
            for c in (0..self.links.len()).rev() {
                if parent[c] == Some(i) {
                    stack.push(c);
                }
            }
        }
        let mut new_index = vec![0; self.links.len()];
        for (n, &o) in order.iter().enumerate() {
            new_index[o] = n;
        }

        let mut links = Vec::with_capacity(order.len());
        let mut joints = Vec::new();
        let mut point_link = Vec::new();
        for (n, &o) in order.iter().enumerate() {
            let d = &self.links[o];
            let field = |f: &str| format!("links.{}.{f}", d.name);
            if !finite3(d.origin.xyz) || !finite3(d.origin.rpy) {
                return Err(invalid(field("origin"), "non-finite value"));
            }
            let joint = match (&d.joint, parent[o]) {
                (Some(_), None) => return Err(invalid(field("joint"), "the root link moves with the base and cannot have a joint")),
                (None, Some(_)) => return Err(invalid(field("joint"), "missing joint")),
                (None, None) => None,
                (Some(j), Some(_)) => {
                    let n_axis = j.axis.norm();
                    if !finite3(j.axis) || (n_axis - 1.0).abs() > 1e-6 {
                        return Err(invalid(field("joint.axis"), format!("axis must be a unit vector, has norm {n_axis}")));
                    }
                    if !j.lower.is_finite() || !j.upper.is_finite() {
                        return Err(invalid(field("joint"), "non-finite limit"));
                    }
                    if j.lower > j.upper {
                        return Err(invalid(
                            field("joint"),
                            format!("lower limit {} exceeds upper limit {}", j.lower, j.upper),
                        ));
                    }
                    joints.push(Joint { axis: j.axis.normalized(), lower: j.lower, upper: j.upper, open_at: j.open_at });
                    Some(joints.len() - 1)
                }
            };
            if d.points.iter().any(|&p| !finite3(p)) {
                return Err(invalid(field("points"), "non-finite point"));
            }
            for (k, prim) in d.primitives.iter().enumerate() {
                prim.validate().map_err(|e| invalid(format!("links.{}.primitives[{k}]", d.name), e.to_string()))?;
            }
            point_link.extend(std::iter::repeat_n(n, d.points.len()));
            links.push(Link {
                name: d.name.clone(),
                parent: parent[o].map(|p| new_index[p]),
                origin: Transform::new(matrix_from_rpy(d.origin.rpy), d.origin.xyz),
                joint,
                points: d.points.clone(),
                primitives: d.primitives.clone(),
            });
        }

        let palm_link = *by_name
            .get(self.palm.link.as_str())
            .ok_or_else(|| invalid("palm.link", format!("unknown link '{}'", self.palm.link)))?;
        let nn = self.palm.normal.norm();
        if !finite3(self.palm.normal) || !(nn > 1e-9) {
            return Err(invalid("palm.normal", "normal must be nonzero"));
        }
        if !finite3(self.palm.center) {
            return Err(invalid("palm.center", "non-finite value"));
        }
        let palm = Palm { link: new_index[palm_link], center: self.palm.center, normal: self.palm.normal.normalized() };

        let mut neighbors = BTreeSet::new();
        for (i, l) in links.iter().enumerate() {
            if let Some(p) = l.parent {
                neighbors.insert((p.min(i), p.max(i)));
            }
        }
        for (k, (a, b)) in self.neighbors.iter().enumerate() {
            let get = |s: &str| {
                by_name
                    .get(s)
                    .map(|&i| new_index[i])
                    .ok_or_else(|| invalid(format!("neighbors[{k}]"), format!("unknown link '{s}'")))
            };
            let (a, b) = (get(a)?, get(b)?);
            neighbors.insert((a.min(b), a.max(b)));
        }

        let model = HandModel { name: self.name.clone(), links, joints, palm, neighbors, point_link };
        for t in model.fingertips() {
            if model.links[t].points.is_empty() {
                return Err(invalid(format!("links.{}.points", model.links[t].name), "fingertip link has no surface points"));
            }
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests;
