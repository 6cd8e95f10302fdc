use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use super::*;
use crate::diff::Tape;
use crate::math::{Mat3, Transform, Vec3};

fn sphere_grid(n: usize, r: f64) -> SdfGrid {
    let b = Vec3::splat(0.05);
    SdfGrid::from_fn([n; 3], -b, b, |p| p.norm() - r).unwrap()
}

fn fd_sample(s: &dyn Sdf, p: Vec3, h: f64) -> (Vec3, Mat3) {
    let mut dv = [0.0; 3];
    let mut dn = [[0.0; 3]; 3];
    for a in 0..3 {
        let mut e = [0.0; 3];
        e[a] = h;
        let e = Vec3::from(e);
        let sp = s.sample_local(p + e);
        let sm = s.sample_local(p - e);
        dv[a] = (sp.value - sm.value) / (2.0 * h);
        for i in 0..3 {
            dn[i][a] = (sp.normal[i] - sm.normal[i]) / (2.0 * h);
        }
    }
    (Vec3::from(dv), Mat3 { m: dn })
}

#[test]
fn node_values_are_reproduced() {
    let g = sphere_grid(9, 0.02);
    for (i, j, k) in [(0, 0, 0), (3, 4, 5), (8, 8, 8), (4, 4, 4), (1, 7, 2)] {
        let p = g.node_position(i, j, k);
        assert_abs_diff_eq!(g.distance(p), g.node(i, j, k), epsilon = 1e-15);
    }
}

#[test]
fn affine_field_is_exact() {
    let g = SdfGrid::from_fn([5, 6, 7], Vec3::splat(-1.0), Vec3::splat(1.0), |p| 0.3 * p.x - 0.2 * p.y + 0.7 * p.z + 0.1)
        .unwrap();
    let p = Vec3::new(0.123, -0.456, 0.789);
    let s = g.sample_local(p);
    assert_abs_diff_eq!(s.value, 0.3 * p.x - 0.2 * p.y + 0.7 * p.z + 0.1, epsilon = 1e-12);
    assert_abs_diff_eq!(s.dvalue.x, 0.3, epsilon = 1e-12);
    assert_abs_diff_eq!(s.dvalue.y, -0.2, epsilon = 1e-12);
    assert_abs_diff_eq!(s.dvalue.z, 0.7, epsilon = 1e-12);
}

#[test]
fn exterior_extends_by_distance_to_bounds() {
    let g = sphere_grid(17, 0.02);
    let inside = Vec3::new(0.05, 0.01, -0.02);
    let outside = Vec3::new(0.09, 0.01, -0.02);
    assert_abs_diff_eq!(g.distance(outside), g.distance(inside) + 0.04, epsilon = 1e-12);
    let n = g.normal(outside);
    assert_abs_diff_eq!(n.x, 1.0, epsilon = 1e-12);
    let corner = Vec3::new(0.08, 0.09, 0.05);
    let c = Vec3::new(0.05, 0.05, 0.05);
    assert_abs_diff_eq!(g.distance(corner), g.distance(c) + (corner - c).norm(), epsilon = 1e-12);
}

#[test]
fn grid_derivatives_match_finite_differences() {
    let g = sphere_grid(11, 0.02);
    // Points well inside cells and outside the bounds (kinks are at cell faces).
    for p in [Vec3::new(0.013, -0.007, 0.021), Vec3::new(0.071, 0.012, -0.033), Vec3::new(0.08, -0.07, 0.003)] {
        let s = g.sample_local(p);
        let (dv, dn) = fd_sample(&g, p, 1e-7);
        assert!((s.dvalue - dv).norm() < 1e-6, "{p:?}");
        assert!(s.dnormal.max_abs_diff(&dn) < 1e-4 * (1.0 + dn.m.iter().flatten().fold(0.0f64, |a, b| a.max(b.abs()))));
    }
}

#[test]
fn grid_gradient_approximates_sphere_normal() {
    let g = sphere_grid(64, 0.03);
    let p = Vec3::new(0.017, 0.011, -0.019);
    let n = g.normal(p).normalized();
    let exact = p.normalized();
    assert!(n.dot(exact) > 0.999);
}

#[test]
fn query_tape_matches_sample_under_pose() {
    let pose = Transform::new(Mat3::exp(Vec3::new(0.3, -0.2, 0.5)), Vec3::new(0.01, 0.02, -0.03));
    let g = sphere_grid(16, 0.02).with_pose(pose);
    let x0 = [0.021, 0.035, -0.012];
    let rep = crate::diff::finite_difference_check(
        |v| {
            let x = Vec3::new(v[0], v[1], v[2]);
            let (d, n) = query_with_grad(&g, x);
            d + n.x * 0.3 - n.y * 0.2 + n.z * 0.1
        },
        &x0,
        1e-7,
    )
    .unwrap();
    assert!(rep.max_rel_error < 1e-5, "{rep:?}");
    let tape = Tape::new();
    let xv = tape.vars(&x0);
    let d = query(&g, Vec3::new(xv[0], xv[1], xv[2]));
    assert_eq!(d.value(), g.distance(Vec3::from(x0)));
}

#[test]
fn query_posed_matches_world_query() {
    let t = Transform::new(Mat3::exp(Vec3::new(-0.4, 0.1, 0.2)), Vec3::new(0.02, 0.0, 0.01));
    let s = AnalyticSdf::new(Primitive::Capsule { a: Vec3::new(0.0, 0.0, -0.01), b: Vec3::new(0.0, 0.0, 0.02), radius: 0.01 })
        .unwrap();
    let posed = s.with_pose(t);
    let x = Vec3::new(0.031, 0.012, 0.004);
    let (d, n) = query_posed(&s, &crate::math::Pose::<f64>::from_transform(&t), x);
    assert_abs_diff_eq!(d, posed.distance(x), epsilon = 1e-14);
    assert!((n - posed.normal(x)).norm() < 1e-14);
}

#[test]
fn effective_distance_is_exact_shift() {
    let g = sphere_grid(12, 0.02);
    for r in [0.0, 0.001, 0.0137, 0.05] {
        let off = LevelSetOffset::new(r).unwrap();
        for x in [Vec3::new(0.01, 0.0, 0.003), Vec3::new(-0.2, 0.4, 0.1)] {
            assert_eq!(effective_distance(&g, x, off), g.distance(x) - r);
        }
    }
    assert!(LevelSetOffset::new(-1e-3).is_err());
    assert!(LevelSetOffset::new(f64::NAN).is_err());
}

#[test]
fn gsdf_round_trip() {
    let g = sphere_grid(6, 0.02);
    let mut buf = Vec::new();
    g.write_to(&mut buf).unwrap();
    assert_eq!(&buf[..4], b"GSDF");
    assert_eq!(buf.len(), 4 + 4 + 12 + 48 + 8 * 216);
    let back = SdfGrid::read_from(&mut buf.as_slice()).unwrap();
    assert_eq!(back, g);

    let mut bad = buf.clone();
    bad[0] = b'X';
    assert!(matches!(SdfGrid::read_from(&mut bad.as_slice()), Err(SdfError::Format(_))));
    let short = &buf[..buf.len() - 8];
    assert!(matches!(SdfGrid::read_from(&mut &short[..]), Err(SdfError::Format(_))));
    assert!(matches!(SdfGrid::read_from(&mut &buf[..10]), Err(SdfError::Format(_))));
}

#[test]
fn grid_rejects_bad_construction() {
    assert!(SdfGrid::new([1, 2, 2], Vec3::ZERO, Vec3::splat(1.0), vec![0.0; 4]).is_err());
    assert!(SdfGrid::new([2, 2, 2], Vec3::ZERO, Vec3::splat(1.0), vec![0.0; 7]).is_err());
    assert!(SdfGrid::new([2, 2, 2], Vec3::ZERO, Vec3::new(1.0, 0.0, 1.0), vec![0.0; 8]).is_err());
    let mut v = vec![0.0; 8];
    v[3] = f64::NAN;
    assert!(SdfGrid::new([2, 2, 2], Vec3::ZERO, Vec3::splat(1.0), v).is_err());
}

#[test]
fn primitive_values() {
    let s = analytic_primitive(PrimitiveKind::Sphere, &[0.03]).unwrap();
    assert_abs_diff_eq!(s.distance(Vec3::new(0.05, 0.0, 0.0)), 0.02, epsilon = 1e-15);
    assert_abs_diff_eq!(s.distance(Vec3::ZERO), -0.03, epsilon = 1e-15);
    let b = analytic_primitive(PrimitiveKind::Box, &[0.01, 0.02, 0.03]).unwrap();
    assert_abs_diff_eq!(b.distance(Vec3::new(0.0, 0.0, 0.0)), -0.01, epsilon = 1e-15);
    assert_abs_diff_eq!(b.distance(Vec3::new(0.04, 0.0, 0.0)), 0.03, epsilon = 1e-15);
    assert_abs_diff_eq!(b.distance(Vec3::new(0.04, 0.06, 0.0)), 0.05, epsilon = 1e-15);
    let c = analytic_primitive(PrimitiveKind::Capsule, &[0.01, 0.02]).unwrap();
    assert_abs_diff_eq!(c.distance(Vec3::new(0.03, 0.0, 0.015)), 0.02, epsilon = 1e-15);
    assert_abs_diff_eq!(c.distance(Vec3::new(0.0, 0.0, 0.05)), 0.02, epsilon = 1e-15);
    assert!(analytic_primitive(PrimitiveKind::Sphere, &[0.0]).is_err());
    assert!(analytic_primitive(PrimitiveKind::Box, &[0.01, -0.02, 0.03]).is_err());
    assert!(analytic_primitive(PrimitiveKind::Capsule, &[0.01]).is_err());
    assert!("torus".parse::<PrimitiveKind>().is_err());
}

#[test]
fn mesh_helpers() {
    let c = TriMesh::cube(0.5);
    assert!(c.is_closed());
    assert_abs_diff_eq!(c.volume(), 1.0, epsilon = 1e-12);
    let s = TriMesh::icosphere(1.0, 3);
    assert!(s.is_closed());
    assert!(s.volume() > 4.0 && s.volume() < 4.0 * std::f64::consts::PI / 3.0);
    let back = TriMesh::parse_obj(&s.to_obj()).unwrap();
    assert_eq!(back.faces, s.faces);
    assert!(TriMesh::parse_obj("v 0 0 0\nv 1 0 0\nf 1 2 3\n").is_err());
    assert!(TriMesh::parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3 4\n").is_err());
    assert!(TriMesh::parse_obj("v 0 0\n").is_err());
    let t = TriMesh::parse_obj("# c\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 -1//1\n").unwrap();
    assert_eq!(t.faces, vec![[0, 1, 2]]);
}

#[test]
fn bake_icosphere_matches_analytic_sphere() {
    let r = 0.03;
    let mesh = TriMesh::icosphere(r, 4);
    let g = bake(&mesh, &BakeOptions { dims: [64; 3], padding: 0.01 }).unwrap();
    let h = g.spacing().x.max(g.spacing().y).max(g.spacing().z);
    let [nx, ny, nz] = g.dims();
    let mut worst: f64 = 0.0;
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let exact = g.node_position(i, j, k).norm() - r;
                worst = worst.max((g.node(i, j, k) - exact).abs());
            }
        }
    }
    assert!(worst <= 2.0 * h, "max node error {worst} vs spacing {h}");
    assert!((g.distance(Vec3::ZERO) + r).abs() <= 2.0 * h);
    for j in 0..ny {
        for i in 0..nx {
            assert!(g.node(i, j, 0) > 0.0 && g.node(i, j, nz - 1) > 0.0);
        }
    }
}

#[test]
fn bake_cube_signs() {
    let g = bake(&TriMesh::cube(0.02), &BakeOptions { dims: [33; 3], padding: 0.01 }).unwrap();
    assert!(g.distance(Vec3::ZERO) < -0.015);
    assert!(g.distance(Vec3::new(0.025, 0.0, 0.0)) > 0.0);
    assert!(g.distance(Vec3::new(0.015, 0.015, 0.015)) < 0.0);
}

#[test]
fn bake_detects_holes() {
    let mut mesh = TriMesh::icosphere(0.03, 2);
    mesh.faces.truncate(mesh.faces.len() - 12);
    let err = bake(&mesh, &BakeOptions { dims: [32; 3], padding: 0.01 }).unwrap_err();
    match err {
        SdfError::NotWatertight { count, examples } => {
            assert!(count > 0);
            assert!(!examples.is_empty());
        }
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn bake_rejects_bad_options() {
    let m = TriMesh::cube(0.01);
    assert!(bake(&m, &BakeOptions { dims: [0, 8, 8], padding: 0.01 }).is_err());
    assert!(bake(&m, &BakeOptions { dims: [8; 3], padding: 0.0 }).is_err());
}

#[test]
fn closest_point_regions() {
    use super::bake::closest_point_on_triangle as cp;
    let (a, b, c) = (Vec3::ZERO, Vec3::X, Vec3::Y);
    assert_eq!(cp(Vec3::new(-1.0, -1.0, 0.5), a, b, c), a);
    assert_eq!(cp(Vec3::new(0.25, 0.25, 2.0), a, b, c), Vec3::new(0.25, 0.25, 0.0));
    let e = cp(Vec3::new(1.0, 1.0, 0.0), a, b, c);
    assert_abs_diff_eq!(e.x, 0.5, epsilon = 1e-15);
    assert_abs_diff_eq!(e.y, 0.5, epsilon = 1e-15);
    assert_eq!(cp(Vec3::new(0.5, -2.0, 0.0), a, b, c), Vec3::new(0.5, 0.0, 0.0));
}

#[test]
fn extracted_sphere_vertices_lie_on_sphere() {
    let g = sphere_grid(40, 0.03);
    let (lo, hi) = g.bounds();
    let m = extract_surface(|p| g.distance(p), lo, hi, g.dims(), 0.0);
    assert!(!m.faces.is_empty());
    let h = g.spacing().x;
    for v in &m.vertices {
        assert!((v.norm() - 0.03).abs() <= 2.0 * h);
    }
    assert!(m.is_closed());
    assert!(m.volume() > 0.0);
    let empty = extract_surface(|p| p.norm() + 1.0, lo, hi, [8; 3], 0.0);
    assert!(empty.faces.is_empty());
}

fn arb_unit() -> impl Strategy<Value = f64> {
    -1.0f64..1.0
}

proptest! {
    #[test]
    fn continuous_across_bounds(y in arb_unit(), z in arb_unit(), face in 0usize..6) {
        let g = sphere_grid(9, 0.02);
        let (lo, hi) = g.bounds();
        let axis = face % 3;
        let (o1, o2) = ((axis + 1) % 3, (axis + 2) % 3);
        let mut p = [0.0; 3];
        p[axis] = if face < 3 { lo[axis] } else { hi[axis] };
        p[o1] = y * hi[o1];
        p[o2] = z * hi[o2];
        let mut dir = [0.0; 3];
        dir[axis] = if face < 3 { -1.0 } else { 1.0 };
        let base = Vec3::from(p);
        let d = Vec3::from(dir);
        let eps = 1e-12;
        let inside = g.distance(base - d.scale(eps));
        let outside = g.distance(base + d.scale(eps));
        prop_assert!((inside - outside).abs() <= 1e-9);
        prop_assert!((g.distance(base) - inside).abs() <= 1e-9);
    }

    #[test]
    fn primitive_hessians_match_fd(
        x in arb_unit(), y in arb_unit(), z in arb_unit(), kind in 0usize..3
    ) {
        let shape = match kind {
            0 => Primitive::Sphere { center: Vec3::new(0.1, 0.0, 0.0), radius: 0.3 },
            1 => Primitive::Capsule { a: Vec3::new(-0.2, 0.1, 0.0), b: Vec3::new(0.3, -0.1, 0.2), radius: 0.2 },
            _ => Primitive::Box { center: Vec3::ZERO, half_extents: Vec3::new(0.3, 0.4, 0.5) },
        };
        let s = AnalyticSdf::new(shape).unwrap();
        let p = Vec3::new(x, y, z);
        let h = 1e-6;
        // Stay off creases: skip points whose one-sided samples change branch.
        let base = s.sample_local(p);
        prop_assume!(base.normal.norm() > 0.5);
        let (dv, dn) = fd_sample(&s, p, h);
        let near_kink = (0..3).any(|a| {
            let mut e = [0.0; 3];
            e[a] = 1e-4;
            let e = Vec3::from(e);
            (s.sample_local(p + e).normal - base.normal).norm() > 0.05
                || (s.sample_local(p - e).normal - base.normal).norm() > 0.05
        });
        prop_assume!(!near_kink);
        prop_assert!((base.dvalue - dv).norm() < 1e-6);
        prop_assert!(base.dnormal.max_abs_diff(&dn) < 1e-3);
    }
}
