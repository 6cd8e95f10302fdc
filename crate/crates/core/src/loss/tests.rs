use approx::assert_abs_diff_eq;

use super::*;
use crate::diff::{finite_difference_check, Var};
use crate::hand::HandModel;
use crate::math::{Mat3, Transform, Vec3};
use crate::sdf::{AnalyticSdf, Primitive};
use crate::sim::{ContactParams, RigidBody};

fn sphere_object(center: Vec3, r: f64) -> (AnalyticSdf, RigidBody) {
    let sdf = AnalyticSdf { shape: Primitive::Sphere { center: Vec3::ZERO, radius: r }, pose: Transform::from_translation(center) };
    (sdf, RigidBody::solid_sphere(r, 500.0).unwrap())
}

fn zero_wrenches<T: Real>(m: usize, p: usize) -> Vec<Vec<Wrench<T>>> {
    vec![vec![Wrench::zero(); p]; m]
}

#[test]
fn task_loss_without_prescribed_wrench_is_mean_reference_speed() {
    let hand = HandModel::builtin("pinch").unwrap();
    let (sdf, body) = sphere_object(Vec3::new(0.0, 0.0, 1.0), 0.03);
    let problem = GraspProblem::new(&hand, &sdf, body, ContactParams::default());
    let f_d = zero_wrenches::<f64>(3, hand.num_points());
    let t = task_loss(&problem, &f_d).unwrap();
    // Speeds 0, 0.01*sqrt(3), 0.01*sqrt(3).
    assert_abs_diff_eq!(t, 2.0 * 0.01 * 3f64.sqrt() / 3.0, epsilon = 1e-12);
    assert_abs_diff_eq!(t, 0.011547, epsilon = 1e-6);
}

#[test]
fn separated_open_hand_has_only_task_cost() {
    let hand = HandModel::builtin("tripod").unwrap();
    let (sdf, body) = sphere_object(Vec3::new(0.0, 0.0, 1.0), 0.03);
    let problem = GraspProblem::new(&hand, &sdf, body, ContactParams::default());
    let cand = GraspCandidate::new(HandPose::new(Transform::IDENTITY, hand.open_joints()), 3, hand.num_points());
    let r = total_report(&problem, &cand, [0.0, 0.0]).unwrap();
    assert_eq!(r.physics, 0.0);
    assert_eq!(r.inter, 0.0);
    assert_eq!(r.qlimit, 0.0);
    assert_eq!(r.contact_count, 0);
    assert!(r.task > 0.0);
    assert_abs_diff_eq!(r.grasp.unwrap(), r.task, epsilon = 1e-15);
    assert!(r.all_finite());
}

#[test]
fn physics_loss_vanishes_when_prescribed_matches_actual() {
    let hand = HandModel::builtin("pinch").unwrap();
    let (sdf, body) = sphere_object(Vec3::new(0.0, 0.0, 0.06), 0.03);
    let problem = GraspProblem::new(&hand, &sdf, body, ContactParams::default());
    let kin = hand.kinematics(&HandPose::new(Transform::IDENTITY, vec![0.0; 4])).unwrap();
    let actual = actual_wrenches(&problem, &kin.points);
    assert!(count_contacts(&sdf, &kin.points) > 0);
    assert!(physics_loss(&actual, &zero_wrenches(3, hand.num_points())) > 0.0);
    assert_eq!(physics_loss(&actual, &actual), 0.0);

    // The residual is the plain Euclidean norm over every component.
    let mut shifted = actual.clone();
    shifted[1][0].force.x += 3.0;
    shifted[2][5].torque.z -= 4.0;
    assert_abs_diff_eq!(physics_loss(&actual, &shifted), 5.0, epsilon = 1e-9);
}

#[test]
fn shape_mismatch_is_rejected() {
    let hand = HandModel::builtin("pinch").unwrap();
    let (sdf, body) = sphere_object(Vec3::ZERO, 0.03);
    let problem = GraspProblem::new(&hand, &sdf, body, ContactParams::default());
    let cand = GraspCandidate::new(HandPose::new(Transform::IDENTITY, vec![0.0; 4]), 2, hand.num_points());
    assert!(matches!(total_report(&problem, &cand, [0.0; 2]), Err(LossError::Shape { .. })));
    let mut cand = GraspCandidate::new(HandPose::new(Transform::IDENTITY, vec![0.0; 4]), 3, hand.num_points());
    cand.prescribed[2].pop();
    assert!(cand.check_shape(3, hand.num_points()).is_err());
}

fn overlapping_siblings() -> HandModel {
    HandModel::from_json(
        r#"{
        "name": "sib",
        "links": [
            { "name": "root", "parent": null, "points": [[0, 0, -1]] },
            { "name": "a", "parent": "root",
              "joint": { "axis": [0, 0, 1], "lower": -1, "upper": 1 },
              "points": [[0, 0, 0.5]],
              "primitives": [{ "type": "sphere", "center": [0, 0, 0], "radius": 0.1 }] },
            { "name": "b", "parent": "root",
              "joint": { "axis": [0, 1, 0], "lower": -1, "upper": 1 },
              "points": [[0.05, 0, 0]] }
        ],
        "palm": { "link": "root", "center": [0, 0, 0], "normal": [0, 0, 1] }
    }"#,
    )
    .unwrap()
}

#[test]
fn self_intersection_counts_non_neighbor_penetration() {
    let m = overlapping_siblings();
    let params = ContactParams::default();
    let kin = m.kinematics(&HandPose::new(Transform::IDENTITY, vec![0.0, 0.0])).unwrap();
    // b's point sits 0.05 m inside a's sphere: |f| = k_n * 0.05.
    assert_abs_diff_eq!(self_intersection_loss(&m, &kin, &params), 0.05 * params.k_n, epsilon = 1e-6);

    // Rotating b about y by 90 degrees moves the point to z = -0.05, still inside.
    let kin = m.kinematics(&HandPose::new(Transform::IDENTITY, vec![0.0, std::f64::consts::FRAC_PI_2])).unwrap();
    assert_abs_diff_eq!(self_intersection_loss(&m, &kin, &params), 0.05 * params.k_n, epsilon = 1e-6);

    // Declared neighbors are exempt.
    let json = serde_json::to_string(&{
        let mut d = m.to_description();
        d.neighbors = vec![("a".into(), "b".into())];
        d
    })
    .unwrap();
    let exempt = HandModel::from_json(&json).unwrap();
    let kin = exempt.kinematics(&HandPose::new(Transform::IDENTITY, vec![0.0, 0.0])).unwrap();
    assert_eq!(self_intersection_loss(&exempt, &kin, &params), 0.0);
}

#[test]
fn bundled_hands_do_not_self_intersect_when_open() {
    for name in ["tripod", "pinch"] {
        let m = HandModel::builtin(name).unwrap();
        let kin = m.kinematics(&HandPose::new(Transform::IDENTITY, m.open_joints())).unwrap();
        assert_eq!(self_intersection_loss(&m, &kin, &ContactParams::default()), 0.0, "{name}");
    }
}

#[test]
fn self_intersection_gradient_matches_fd() {
    // Off-center sphere so both joints change the penetration depth.
    let m = HandModel::from_json(&serde_json::to_string(&{
        let mut d = overlapping_siblings().to_description();
        d.links[1].primitives = vec![Primitive::Sphere { center: Vec3::new(0.03, 0.01, 0.0), radius: 0.1 }];
        d
    }).unwrap()).unwrap();
    let params = ContactParams::default();
    let rep = finite_difference_check(
        |v: &[Var<'_>]| {
            let base = Pose { rotation: Mat3::identity(), translation: Vec3::new(v[0], v[1], v[2]) };
            let kin = forward_kinematics(&m, &base, &v[3..]).unwrap();
            self_intersection_loss(&m, &kin, &params) * (1.0 / params.k_n)
        },
        &[0.01, -0.02, 0.03, 0.2, 0.4],
        1e-6,
    )
    .unwrap();
    assert!(rep.max_rel_error < 1e-5, "{rep:?}");
}

#[test]
fn total_gradient_matches_fd_in_contact() {
    // Pinch fingers pressing into a sphere; derivatives with respect to the
    // base translation, joints and a few prescribed wrench components.
    let hand = HandModel::builtin("pinch").unwrap();
    let (sdf, body) = sphere_object(Vec3::new(0.0, 0.0, 0.06), 0.03);
    let params = ContactParams::default();
    let problem = GraspProblem::new(&hand, &sdf, body, params);
    let p = hand.num_points();
    let mut x = vec![0.001, -0.002, 0.0005, 0.1, 0.2, 0.15, 0.05];
    x.extend([1.0, -2.0, 0.5, 3.0]);
    let rep = finite_difference_check(
        |v: &[Var<'_>]| {
            let base = Pose { rotation: Mat3::identity(), translation: Vec3::new(v[0], v[1], v[2]) };
            let mut f_d = zero_wrenches::<Var<'_>>(3, p);
            f_d[0][0].force.x = v[7];
            f_d[1][3].force.z = v[8];
            f_d[2][p - 1].torque.y = v[9];
            f_d[0][p / 2].force.y = v[10];
            let t = evaluate(&problem, &base, &v[3..7], &f_d, false).unwrap();
            t.task * 100.0 + t.physics * 1e-3 + t.qrange + t.inter * 1e-3
        },
        &x,
        1e-8,
    )
    .unwrap();
    assert!(rep.max_rel_error < 1e-4, "{rep:?}");
}

#[test]
fn candidate_json_round_trip() {
    let hand = HandModel::builtin("pinch").unwrap();
    let mut cand = GraspCandidate::new(HandPose::new(Transform::IDENTITY, vec![0.1, 0.2, 0.3, 0.4]), 3, hand.num_points());
    cand.prescribed[1][2] = [0.1, -1e-9, 3.5, 0.0, 7.25e5, -2.0];
    let back: GraspCandidate = serde_json::from_str(&serde_json::to_string(&cand).unwrap()).unwrap();
    assert_eq!(back, cand);
}
