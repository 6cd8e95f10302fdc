use super::{HandError, HandModel, HandPose};
use crate::diff::{norm, sum, Real};
use crate::math::{Mat3, Pose, Vec3};

/// World frames of every link and world positions of every surface point.
#[derive(Clone, Debug)]
pub struct Kinematics<T> {
    pub frames: Vec<Pose<T>>,
    /// Ordered as [`HandModel::point_link`].
    pub points: Vec<Vec3<T>>,
}

/// Propagates the base pose and joint angles down the link tree.
///
/// A link's frame is `parent * origin * Rot(axis, q)`; the root link's frame
/// is the base itself.
pub fn forward_kinematics<T: Real>(model: &HandModel, base: &Pose<T>, joints: &[T]) -> Result<Kinematics<T>, HandError> {
    if joints.len() != model.num_joints() {
        return Err(HandError::Dimension { expected: model.num_joints(), got: joints.len() });
    }
    let mut frames: Vec<Pose<T>> = Vec::with_capacity(model.links.len());
    let mut points = Vec::with_capacity(model.num_points());
    for link in &model.links {
        let frame = match (link.parent, link.joint) {
            (Some(p), Some(j)) => {
                let at_joint = frames[p].composef(&link.origin);
                let rot = Mat3::axis_angle(model.joints[j].axis, joints[j]);
                Pose { rotation: at_joint.rotation.mul_mat(&rot), translation: at_joint.translation }
            }
            _ => base.composef(&link.origin),
        };
        points.extend(link.points.iter().map(|&p| frame.applyf(p)));
        frames.push(frame);
    }
    Ok(Kinematics { frames, points })
}

impl HandModel {
    /// Plain-valued forward kinematics at a stored pose.
    pub fn kinematics(&self, pose: &HandPose) -> Result<Kinematics<f64>, HandError> {
        pose.validate(self)?;
        forward_kinematics(self, &Pose::from_transform(&pose.base()), &pose.joints)
    }
}

/// `(L_qrange, L_qlimit)`: distance of the joint vector from midrange, and
/// total limit violation.
pub fn joint_losses<T: Real>(model: &HandModel, joints: &[T]) -> (T, T) {
    let centered: Vec<T> = joints.iter().zip(&model.joints).map(|(&q, j)| q - j.midrange()).collect();
    let violations: Vec<T> = joints
        .iter()
        .zip(&model.joints)
        .flat_map(|(&q, j)| [(q - j.upper).relu(), (T::cst(j.lower) - q).relu()])
        .collect();
    (norm(&centered), sum(&violations))
}
