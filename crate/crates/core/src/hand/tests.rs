use std::f64::consts::FRAC_PI_2;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use super::*;
use crate::diff::{finite_difference_check, Var};
use crate::math::{Mat3, Pose, Quat, Transform, Vec3};

fn two_link(axis: [f64; 3], lower: f64, upper: f64) -> String {
    format!(
        r#"{{
        "name": "t",
        "links": [
            {{ "name": "root", "parent": null, "points": [[0, 0, 0]] }},
            {{ "name": "tip", "parent": "root",
               "joint": {{ "axis": {axis:?}, "lower": {lower}, "upper": {upper} }},
               "points": [[1, 0, 0]],
               "primitives": [{{ "type": "sphere", "center": [0, 0, 0], "radius": 0.1 }}] }}
        ],
        "palm": {{ "link": "root", "center": [0, 0, 0], "normal": [0, 0, 1] }}
    }}"#
    )
}

fn field_of(e: HandError) -> String {
    match e {
        HandError::Validation { field, .. } => field,
        e => panic!("expected validation error, got {e}"),
    }
}

#[test]
fn revolute_quarter_turn() {
    let m = HandModel::from_json(&two_link([0.0, 0.0, 1.0], -2.0, 2.0)).unwrap();
    let k = forward_kinematics(&m, &Pose::from_transform(&Transform::IDENTITY), &[FRAC_PI_2]).unwrap();
    let p = k.points[1];
    assert_abs_diff_eq!(p.x, 0.0, epsilon = 1e-12);
    assert_abs_diff_eq!(p.y, 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(p.z, 0.0, epsilon = 1e-12);
}

#[test]
fn zero_configuration_uses_fixed_transforms() {
    let m = HandModel::builtin("tripod").unwrap();
    let k = forward_kinematics(&m, &Pose::from_transform(&Transform::IDENTITY), &vec![0.0; m.num_joints()]).unwrap();
    // Finger 0 at 90 degrees: the distal tip sits straight above its mount.
    let tip = m.link_index("f0_distal").unwrap();
    let frame = k.frames[tip].value();
    assert!((frame.translation - Vec3::new(0.0, 0.03, 0.07)).norm() < 1e-12);
    let last = k.points.len() - 1;
    assert_eq!(m.point_link[last], m.links.len() - 1);
}

#[test]
fn dimension_mismatch_is_usage_error() {
    let m = HandModel::builtin("pinch").unwrap();
    let r = forward_kinematics(&m, &Pose::from_transform(&Transform::IDENTITY), &[0.0; 3]);
    assert!(matches!(r, Err(HandError::Dimension { expected: 4, got: 3 })));
}

#[test]
fn bundled_hands() {
    let t = HandModel::builtin("tripod").unwrap();
    assert_eq!(t.num_joints(), 9);
    let tips = t.fingertips();
    assert_eq!(tips.len(), 3);
    for &l in &tips {
        assert!(t.links[l].points.len() >= 8);
    }
    let p = HandModel::builtin("pinch").unwrap();
    assert_eq!(p.num_joints(), 4);
    assert_eq!(p.fingertips().len(), 2);
    assert!(HandModel::builtin("mano").is_err());
    // Parent-child pairs are neighbors automatically.
    let prox = t.link_index("f0_prox").unwrap();
    let mid = t.link_index("f0_mid").unwrap();
    assert!(t.are_neighbors(prox, mid));
    assert!(t.are_neighbors(0, prox));
    assert!(!t.are_neighbors(prox, t.link_index("f1_prox").unwrap()));
}

#[test]
fn description_round_trip() {
    let t = HandModel::builtin("tripod").unwrap();
    let json = serde_json::to_string(&t.to_description()).unwrap();
    let back = HandModel::from_json(&json).unwrap();
    assert_eq!(back.joints, t.joints);
    assert_eq!(back.neighbors, t.neighbors);
    for (a, b) in back.links.iter().zip(&t.links) {
        assert!(a.origin.rotation.max_abs_diff(&b.origin.rotation) < 1e-12);
        assert_eq!(a.points, b.points);
    }
}

#[test]
fn validation_names_fields() {
    let e = HandModel::from_json(&two_link([0.0, 0.0, 1.0], 1.0, -1.0)).unwrap_err();
    assert_eq!(field_of(e), "links.tip.joint");

    let e = HandModel::from_json(&two_link([0.0, 0.0, 2.0], -1.0, 1.0)).unwrap_err();
    assert_eq!(field_of(e), "links.tip.joint.axis");

    let selfparent = two_link([0.0, 0.0, 1.0], -1.0, 1.0).replace(r#""parent": "root""#, r#""parent": "tip""#);
    let e = HandModel::from_json(&selfparent).unwrap_err();
    assert!(e.to_string().contains("cycle"), "{e}");
    assert_eq!(field_of(e), "links.tip.parent");

    let nopalm = two_link([0.0, 0.0, 1.0], -1.0, 1.0).replace(r#""link": "root""#, r#""link": "wrist""#);
    assert_eq!(field_of(HandModel::from_json(&nopalm).unwrap_err()), "palm.link");

    let missing_palm = r#"{"name": "x", "links": [{"name": "a", "parent": null, "points": [[0,0,0]]}]}"#;
    assert!(matches!(HandModel::from_json(missing_palm), Err(HandError::Parse(_))));

    let bare_tip = two_link([0.0, 0.0, 1.0], -1.0, 1.0).replace(r#""points": [[1, 0, 0]],"#, "");
    assert_eq!(field_of(HandModel::from_json(&bare_tip).unwrap_err()), "links.tip.points");
}

#[test]
fn joint_loss_cases() {
    let m = HandModel::builtin("tripod").unwrap();
    let mid = m.midrange_joints();
    let (r, l) = joint_losses(&m, &mid);
    assert_eq!((r, l), (0.0, 0.0));

    let mut q = mid.clone();
    q[4] = m.joints[4].upper + 0.1;
    let (_, l) = joint_losses(&m, &q);
    assert_abs_diff_eq!(l, 0.1, epsilon = 1e-12);

    let at_limits: Vec<f64> = m.joints.iter().enumerate().map(|(i, j)| if i % 2 == 0 { j.lower } else { j.upper }).collect();
    let (r, l) = joint_losses(&m, &at_limits);
    assert_eq!(l, 0.0);
    let half: f64 = m.joints.iter().map(|j| (0.5 * (j.upper - j.lower)).powi(2)).sum::<f64>().sqrt();
    assert_abs_diff_eq!(r, half, epsilon = 1e-12);
}

#[test]
fn pose_validation() {
    let m = HandModel::builtin("pinch").unwrap();
    let mut p = HandPose::new(Transform::IDENTITY, vec![0.0; 4]);
    assert!(p.validate(&m).is_ok());
    p.orientation = Quat { w: 1.0, x: 1e-4, y: 0.0, z: 0.0 };
    assert!(p.validate(&m).is_err());
    let p = HandPose::new(Transform::IDENTITY, vec![0.0; 2]);
    assert!(matches!(p.validate(&m), Err(HandError::Dimension { .. })));
}

fn fk_scalar<'t>(m: &HandModel, v: &[Var<'t>], weights: &[f64]) -> Var<'t> {
    // v = [tx, ty, tz, wx, wy, wz, q...]; rotation = Exp(w) * R0.
    let r0 = Mat3::exp(Vec3::new(0.2, -0.4, 0.9));
    let w = Vec3::new(v[3], v[4], v[5]);
    let base = Pose { rotation: Mat3::exp(w).mul_matf(&r0), translation: Vec3::new(v[0], v[1], v[2]) };
    let k = forward_kinematics(m, &base, &v[6..]).unwrap();
    let mut acc = Vec::new();
    for (i, p) in k.points.iter().enumerate() {
        let c = weights[i % weights.len()];
        acc.push(p.x * c + p.y * (1.0 - c) - p.z * (0.5 * c));
    }
    crate::diff::sum(&acc)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fk_gradients_match_fd(
        q in proptest::collection::vec(-1.0f64..1.0, 9),
        t in proptest::collection::vec(-0.1f64..0.1, 3),
        w in proptest::collection::vec(-0.5f64..0.5, 3),
    ) {
        let m = HandModel::builtin("tripod").unwrap();
        let mut x = t.clone();
        x.extend(&w);
        x.extend(&q);
        let weights = [0.3, -0.7, 1.1, 0.25, -0.4];
        let rep = finite_difference_check(|v| fk_scalar(&m, v, &weights), &x, 1e-6).unwrap();
        prop_assert!(rep.max_rel_error < 1e-5, "{:?}", rep);
    }

    #[test]
    fn rigid_base_equivariance(
        q in proptest::collection::vec(-0.3f64..1.4, 9),
        w in proptest::collection::vec(-2.0f64..2.0, 3),
        t in proptest::collection::vec(-0.5f64..0.5, 3),
    ) {
        let m = HandModel::builtin("tripod").unwrap();
        let k0 = forward_kinematics(&m, &Pose::from_transform(&Transform::IDENTITY), &q).unwrap();
        let g = Transform::new(Mat3::exp(Vec3::new(w[0], w[1], w[2])), Vec3::new(t[0], t[1], t[2]));
        let k1 = forward_kinematics(&m, &Pose::from_transform(&g), &q).unwrap();
        for (a, b) in k0.points.iter().zip(&k1.points) {
            prop_assert!((g.apply(*a) - *b).norm() < 1e-12);
        }
        let only_shift = Transform::from_translation(Vec3::new(t[0], t[1], t[2]));
        let k2 = forward_kinematics(&m, &Pose::from_transform(&only_shift), &q).unwrap();
        for (a, b) in k0.points.iter().zip(&k2.points) {
            prop_assert!((*a + only_shift.translation - *b).norm() < 1e-15);
        }
    }

    #[test]
    fn qlimit_zero_iff_within_limits(q in proptest::collection::vec(-2.0f64..2.5, 9)) {
        let m = HandModel::builtin("tripod").unwrap();
        let (_, l) = joint_losses(&m, &q);
        let inside = q.iter().zip(&m.joints).all(|(&v, j)| j.lower <= v && v <= j.upper);
        prop_assert_eq!(l == 0.0, inside);
        prop_assert!(l >= 0.0);
    }
}
