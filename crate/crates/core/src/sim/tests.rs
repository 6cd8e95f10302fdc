use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use super::*;
use crate::diff::{finite_difference_check, Tape, Var};
use crate::math::{Mat3, Pose, Transform, Vec3};
use crate::sdf::{AnalyticSdf, Primitive, SdfGrid, TriMesh};

fn params() -> ContactParams {
    ContactParams::default()
}

fn unit_body() -> RigidBody {
    RigidBody::new(1.0, Vec3::ZERO, Mat3::diag(Vec3::splat(0.01)), 0.1).unwrap()
}

fn sphere(r: f64) -> AnalyticSdf {
    AnalyticSdf::new(Primitive::Sphere { center: Vec3::ZERO, radius: r }).unwrap()
}

#[test]
fn normal_force_example() {
    let (f_n, f_t) = contact_force_from(-0.001, Vec3::Z, Vec3::ZERO, &params());
    assert_abs_diff_eq!(f_n.z, -1000.0, epsilon = 1e-9);
    assert_eq!((f_n.x, f_n.y), (0.0, 0.0));
    assert_eq!(f_t, Vec3::ZERO);
}

#[test]
fn separated_point_has_zero_force_and_leaky_gradient() {
    let tape = Tape::new();
    let d = tape.var(0.01);
    let g = Vec3::new(Var::constant(0.0), Var::constant(0.0), Var::constant(1.0));
    let (f_n, f_t) = contact_force_from(d, g, Vec3::zero(), &params());
    assert_eq!(f_n.value(), Vec3::ZERO);
    assert_eq!(f_t.value(), Vec3::ZERO);
    // Along the normal the force component is k_n * m, so its slope is alpha * k_n.
    let grads = tape.backward(f_n.z).unwrap();
    assert_abs_diff_eq!(grads.get(d), 0.1 * 1e6, epsilon = 1e-9);
    // The magnitude shrinks as the point separates, at the same rate.
    let mag = normal_force_magnitude(d, g, &params());
    assert_eq!(mag.value(), 0.0);
    let grads = tape.backward(mag).unwrap();
    assert_abs_diff_eq!(grads.get(d), -0.1 * 1e6, epsilon = 1e-9);
}

#[test]
fn friction_saturates_at_cone() {
    let (f_n, f_t) = contact_force_from(-0.001, Vec3::Z, Vec3::new(3.0, -1.0, 0.5), &params());
    assert_abs_diff_eq!(f_t.norm(), 0.8 * f_n.norm(), epsilon = 1e-9);
    assert_abs_diff_eq!(f_t.norm(), 800.0, epsilon = 1e-9);
    // Opposes the tangential motion of the object.
    assert!(f_t.x < 0.0 && f_t.y > 0.0);
    assert_abs_diff_eq!(f_t.z, 0.0, epsilon = 1e-12);
}

#[test]
fn friction_below_cone_is_viscous() {
    let (_, f_t) = contact_force_from(-0.001, Vec3::Z, Vec3::new(1e-6, 0.0, 0.0), &params());
    assert_abs_diff_eq!(f_t.x, -100.0, epsilon = 1e-9);
    let (_, f_t) = contact_force_from(-0.001, Vec3::Z, Vec3::new(1e-10, 0.0, 3.0), &params());
    assert_eq!(f_t, Vec3::ZERO);
}

#[test]
fn contact_force_uses_offset_surface() {
    let s = sphere(0.03);
    let mut p = params();
    let x = Vec3::new(0.031, 0.0, 0.0);
    assert_eq!(contact_force(x, Vec3::ZERO, &s, &p).total(), Vec3::ZERO);
    p.offset = crate::sdf::LevelSetOffset::new(0.002).unwrap();
    let f = contact_force(x, Vec3::ZERO, &s, &p);
    assert_abs_diff_eq!(f.f_n.x, -1000.0, epsilon = 1e-6);
}

#[test]
fn wrench_aggregation() {
    assert_eq!(aggregate_wrench::<f64>(&[], Vec3::ZERO), Wrench::zero());
    let com = Vec3::new(0.5, 0.5, 0.5);
    let f = ContactForce { point: com + Vec3::X, f_n: Vec3::new(0.0, 0.0, -1.0), f_t: Vec3::ZERO };
    let w = aggregate_wrench(&[f], com);
    assert_eq!(w.force, Vec3::new(0.0, 0.0, -1.0));
    assert_eq!(w.torque, Vec3::new(0.0, 1.0, 0.0));
    let g = ContactForce { point: com - Vec3::X, f_n: Vec3::new(0.0, 0.0, 1.0), f_t: Vec3::ZERO };
    let w = aggregate_wrench(&[f, g], com);
    assert_eq!(w.force, Vec3::ZERO);
    assert_eq!(w.torque, Vec3::new(0.0, 2.0, 0.0));
}

#[test]
fn euler_free_motion_and_impulses() {
    let body = unit_body();
    let s = sphere(0.1);
    let v = Velocity { linear: Vec3::new(0.1, -0.2, 0.3), angular: Vec3::ZERO };
    let st = ObjectState::at_rest_pose(&s, v);
    let next = euler_step(&st, &body, &Wrench::zero(), &Wrench::zero(), 1e-3);
    assert_eq!(next.velocity, v);
    assert!((next.pose.translation - v.linear.scale(1e-3)).norm() < 1e-18);

    let st = ObjectState::at_rest_pose(&s, Velocity::zero());
    let push = Wrench { force: Vec3::X, torque: Vec3::ZERO };
    let next = euler_step(&st, &body, &push, &Wrench::zero(), 1e-5);
    assert_abs_diff_eq!(next.velocity.linear.x, 1e-5, epsilon = 1e-18);

    let twist = Wrench { force: Vec3::ZERO, torque: Vec3::new(0.0, 0.0, 2.0) };
    let next = euler_step(&st, &body, &twist, &Wrench::zero(), 1e-3);
    assert_eq!(next.velocity.linear, Vec3::ZERO);
    assert_abs_diff_eq!(next.velocity.angular.z, 0.2, epsilon = 1e-15);
}

#[test]
fn euler_rotates_about_com() {
    let body = RigidBody::new(1.0, Vec3::new(0.1, 0.0, 0.0), Mat3::diag(Vec3::splat(0.01)), 0.2).unwrap();
    let s = sphere(0.1);
    let st = ObjectState::at_rest_pose(&s, Velocity { linear: Vec3::ZERO, angular: Vec3::new(0.0, 0.0, 1.0) });
    let mut cur = st;
    for _ in 0..100 {
        cur = euler_step(&cur, &body, &Wrench::zero(), &Wrench::zero(), 1e-3);
    }
    // The center of mass stays put while the frame spins around it.
    assert!((cur.com(&body) - Vec3::new(0.1, 0.0, 0.0)).norm() < 1e-15);
    assert!((cur.pose.rotation.mul_vec(Vec3::X).y - 0.1f64.sin()).abs() < 1e-12);
}

#[test]
fn prescribed_rollout_cancels_velocity() {
    let body = unit_body();
    let s = sphere(0.1);
    let v = Vec3::new(0.01, 0.01, 0.01);
    let steps = 3;
    let dt = 1e-5;
    let f = Wrench { force: v.scale(-body.mass / (dt * steps as f64)), torque: Vec3::ZERO };
    let end = rollout_prescribed(&[f], &s, &body, Velocity::from_linear(v), dt, steps).unwrap();
    assert!(end.velocity.linear.norm() < 1e-15);
    let end = rollout_prescribed(&[Wrench::zero(); 4], &s, &body, Velocity::from_linear(v), dt, steps).unwrap();
    assert_eq!(end.velocity.linear, v);
}

#[test]
fn prescribed_gradients_match_fd() {
    let body = RigidBody::new(0.3, Vec3::new(0.01, 0.0, 0.0), Mat3::diag(Vec3::new(1e-3, 2e-3, 1.5e-3)), 0.05).unwrap();
    let s = sphere(0.05);
    let x0: Vec<f64> = (0..12).map(|i| ((i as f64) * 0.37).sin()).collect();
    let rep = finite_difference_check(
        |v| {
            let ws = [
                Wrench::from_array([v[0], v[1], v[2], v[3], v[4], v[5]]),
                Wrench::from_array([v[6], v[7], v[8], v[9], v[10], v[11]]),
            ];
            let init = Velocity::lift(&Velocity { linear: Vec3::new(0.01, 0.0, -0.01), angular: Vec3::new(0.1, 0.0, 0.0) });
            let end = rollout_prescribed(&ws, &s, &body, init, 1e-3, 3).unwrap();
            end.velocity.weighted_norm(0.05)
        },
        &x0,
        1e-5,
    )
    .unwrap();
    assert!(rep.max_rel_error < 1e-6, "{rep:?}");
}

#[test]
fn far_hand_leaves_velocity_unchanged_but_leaks_gradient() {
    let body = unit_body();
    let s = sphere(0.03);
    let v = Velocity::from_linear(Vec3::new(0.01, 0.01, 0.01));
    let far = [Vec3::new(0.2, 0.0, 0.0), Vec3::new(0.0, 0.25, 0.0)];
    let end = rollout_actual(&far, &s, &body, v, &params(), 1).unwrap();
    assert_eq!(end.velocity, v);

    let tape = Tape::new();
    let t = tape.vars(&[0.0, 0.0, 0.0]);
    let shift = Vec3::new(t[0], t[1], t[2]);
    let pts: Vec<Vec3<Var<'_>>> = far.iter().map(|p| p.lift::<Var<'_>>() + shift).collect();
    let end = rollout_actual(&pts, &s, &body, Velocity::lift(&v), &params(), 1).unwrap();
    let loss = end.velocity.weighted_norm(body.radius);
    let g = tape.backward(loss).unwrap().wrt(&t);
    assert!(g.iter().any(|x| *x != 0.0), "{g:?}");

    let mut exact = params();
    exact.alpha = 0.0;
    let tape = Tape::new();
    let t = tape.vars(&[0.0, 0.0, 0.0]);
    let shift = Vec3::new(t[0], t[1], t[2]);
    let pts: Vec<Vec3<Var<'_>>> = far.iter().map(|p| p.lift::<Var<'_>>() + shift).collect();
    let end = rollout_actual(&pts, &s, &body, Velocity::lift(&v), &exact, 1).unwrap();
    let g = tape.backward(end.velocity.weighted_norm(body.radius)).unwrap().wrt(&t);
    assert_eq!(g, vec![0.0; 3]);
}

#[test]
fn enveloping_contacts_slow_the_object() {
    let body = RigidBody::solid_sphere(0.03, 1000.0).unwrap();
    let s = sphere(0.03);
    let mut pts = Vec::new();
    for d in [Vec3::X, Vec3::Y, Vec3::Z] {
        pts.push(d.scale(0.03 - 2e-6));
        pts.push(d.scale(-(0.03 - 2e-6)));
    }
    let v = Velocity::from_linear(Vec3::new(0.01, 0.01, 0.01));
    let end = rollout_actual(&pts, &s, &body, v, &params(), 1).unwrap();
    assert!(end.velocity.weighted_norm(body.radius) < v.weighted_norm(body.radius));
}

#[test]
fn rollout_gradient_matches_fd_in_smooth_regime() {
    let body = RigidBody::solid_sphere(0.03, 1000.0).unwrap();
    let s = sphere(0.03);
    let mut p = params();
    p.alpha = 1.0;
    let base = [Vec3::new(0.0295, 0.001, 0.0), Vec3::new(-0.001, -0.0297, 0.002), Vec3::new(0.0, 0.002, 0.0296)];
    let init = Velocity { linear: Vec3::new(1e-6, -2e-6, 1.5e-6), angular: Vec3::new(1e-5, 0.0, -1e-5) };
    let rep = finite_difference_check(
        |v| {
            let shift = Vec3::new(v[0], v[1], v[2]);
            let pts: Vec<_> = base.iter().map(|b| b.lift() + shift).collect();
            let end = rollout_actual(&pts, &s, &body, Velocity::lift(&init), &p, 1).unwrap();
            end.velocity.weighted_norm(body.radius)
        },
        &[1e-5, -2e-5, 0.0],
        1e-8,
    )
    .unwrap();
    assert!(rep.max_rel_error < 1e-3, "{rep:?}");
}

#[test]
fn divergence_is_reported() {
    let body = unit_body();
    let s = sphere(0.1);
    let f = Wrench { force: Vec3::new(f64::NAN, 0.0, 0.0), torque: Vec3::ZERO };
    let r = rollout_prescribed(&[f], &s, &body, Velocity::zero(), 1e-3, 2);
    assert_eq!(r.unwrap_err(), SimError::Divergence { step: 0 });
}

#[test]
fn params_validation() {
    assert!(params().validate().is_ok());
    let mut p = params();
    p.alpha = 1.5;
    assert!(p.validate().is_err());
    p = params();
    p.mu = -0.1;
    assert!(p.validate().is_err());
    p = params();
    p.dt = 0.0;
    assert!(p.validate().is_err());
}

#[test]
fn sphere_mass_properties() {
    let r = 0.03;
    let g = crate::sdf::bake(&TriMesh::icosphere(r, 4), &crate::sdf::BakeOptions { dims: [64; 3], padding: 0.01 }).unwrap();
    let b = mass_properties(&g, 1000.0).unwrap();
    let m = 4.0 / 3.0 * std::f64::consts::PI * r.powi(3) * 1000.0;
    assert!((b.mass - m).abs() < 0.05 * m, "{} vs {m}", b.mass);
    let h = g.spacing().x;
    assert!(b.com.norm() < 2.0 * h);
    for a in 0..3 {
        let i = 0.4 * m * r * r;
        assert!((b.inertia.m[a][a] - i).abs() < 0.1 * i);
    }
    assert!((b.radius - r).abs() < 2.0 * h);

    let empty = SdfGrid::from_fn([4; 3], Vec3::ZERO, Vec3::splat(1.0), |_| 1.0).unwrap();
    assert!(mass_properties(&empty, 1000.0).is_err());
}

#[test]
fn rigid_body_validation() {
    assert!(RigidBody::new(0.0, Vec3::ZERO, Mat3::IDENTITY, 1.0).is_err());
    assert!(RigidBody::new(1.0, Vec3::ZERO, Mat3::diag(Vec3::new(1.0, -1.0, 1.0)), 1.0).is_err());
    let mut asym = Mat3::IDENTITY;
    asym.m[0][1] = 0.1;
    assert!(RigidBody::new(1.0, Vec3::ZERO, asym, 1.0).is_err());
}

#[test]
fn posed_object_contact_matches_world_field() {
    let t = Transform::new(Mat3::exp(Vec3::new(0.1, 0.2, -0.3)), Vec3::new(0.01, -0.02, 0.0));
    let s = AnalyticSdf::new(Primitive::Box { center: Vec3::ZERO, half_extents: Vec3::new(0.02, 0.03, 0.01) }).unwrap();
    let posed = s.with_pose(t);
    let x = t.apply(Vec3::new(0.019, 0.005, 0.002));
    let a = contact_force(x, Vec3::ZERO, &posed, &params());
    let b = contact_force_posed(x, Vec3::ZERO, &s, &Pose::from_transform(&t), &params());
    assert!((a.f_n - b.f_n).norm() < 1e-9);
    assert!(a.f_n.norm() > 0.0);
}

proptest! {
    #[test]
    fn friction_cone_holds(
        d in -0.01f64..0.01,
        gx in -1.0f64..1.0, gy in -1.0f64..1.0, gz in -1.0f64..1.0,
        vx in -1.0f64..1.0, vy in -1.0f64..1.0, vz in -1.0f64..1.0,
        scale in -9.0f64..0.0,
    ) {
        let g = Vec3::new(gx, gy, gz);
        let v = Vec3::new(vx, vy, vz).scale(10f64.powf(scale));
        let (f_n, f_t) = contact_force_from(d, g, v, &params());
        prop_assert!(f_t.norm() <= 0.8 * f_n.norm() + 1e-9);
        if d >= 0.0 {
            prop_assert_eq!(f_n, Vec3::ZERO);
            prop_assert_eq!(f_t, Vec3::ZERO);
        }
        // Normal force is parallel to the field gradient.
        prop_assert!(f_n.cross(g).norm() <= 1e-9 * (1.0 + f_n.norm()));
    }

    #[test]
    fn rollouts_are_deterministic(vx in -0.1f64..0.1, wz in -1.0f64..1.0) {
        let body = RigidBody::solid_sphere(0.03, 1000.0).unwrap();
        let s = sphere(0.03);
        let pts = [Vec3::new(0.029, 0.0, 0.0), Vec3::new(-0.0295, 0.001, 0.0)];
        let v = Velocity { linear: Vec3::new(vx, 0.0, 0.0), angular: Vec3::new(0.0, 0.0, wz) };
        let a = rollout_actual(&pts, &s, &body, v, &params(), 5).unwrap();
        let b = rollout_actual(&pts, &s, &body, v, &params(), 5).unwrap();
        prop_assert_eq!(a.velocity, b.velocity);
        prop_assert_eq!(a.pose.translation, b.pose.translation);
    }
}
