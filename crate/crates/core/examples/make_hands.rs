//! Regenerates the bundled hand descriptions in `assets/hands/`.
//!
//! ```text
//! cargo run -p graspd --example make_hands
//! ```

use std::f64::consts::PI;
use std::path::PathBuf;

use graspd::hand::{HandDescription, JointDescription, LinkDescription, OpenAt, OriginDescription, PalmDescription};
use graspd::math::Vec3;
use graspd::sdf::Primitive;

const FINGER_RADIUS: f64 = 0.009;
const PALM_HALF: f64 = 0.04;
const PALM_THICKNESS: f64 = 0.02;

/// Points on a capsule segment along local +z: rings of six at fractions of
/// the length, plus a cap on the last segment of a finger.
fn capsule_points(length: f64, cap: bool) -> Vec<Vec3> {
    let mut pts = Vec::new();
    for frac in [0.2, 0.5, 0.8] {
        for k in 0..6 {
            let a = k as f64 * PI / 3.0;
            pts.push(Vec3::new(FINGER_RADIUS * a.cos(), FINGER_RADIUS * a.sin(), frac * length));
        }
    }
    if cap {
        pts.push(Vec3::new(0.0, 0.0, length + FINGER_RADIUS));
        let s = FINGER_RADIUS * std::f64::consts::FRAC_1_SQRT_2;
        for k in 0..4 {
            let a = k as f64 * PI / 2.0;
            pts.push(Vec3::new(s * a.cos(), s * a.sin(), length + s));
        }
    }
    pts
}

fn palm_link() -> LinkDescription {
    let mut points = vec![Vec3::ZERO];
    for (radius, count) in [(0.012, 8), (0.026, 12)] {
        for k in 0..count {
            let a = 2.0 * PI * k as f64 / count as f64;
            points.push(Vec3::new(radius * a.cos(), radius * a.sin(), 0.0));
        }
    }
    LinkDescription {
        name: "palm".into(),
        parent: None,
        origin: OriginDescription::default(),
        joint: None,
        points,
        primitives: vec![Primitive::Box {
            center: Vec3::new(0.0, 0.0, -PALM_THICKNESS / 2.0),
            half_extents: Vec3::new(PALM_HALF, PALM_HALF, PALM_THICKNESS / 2.0),
        }],
    }
}

/// One finger mounted on the palm face at angle `theta`, with local x
/// pointing radially outward and local z along the extended finger.
/// Positive angles about the -y axis curl the finger toward the palm center.
fn finger(prefix: &str, theta: f64, segments: &[(&str, f64, f64, f64)]) -> Vec<LinkDescription> {
    let mut links = Vec::new();
    let mut parent = "palm".to_string();
    let mut prev_len = 0.0;
    for (i, &(seg, length, lower, upper)) in segments.iter().enumerate() {
        let name = format!("{prefix}_{seg}");
        let origin = if i == 0 {
            OriginDescription { xyz: Vec3::new(0.03 * theta.cos(), 0.03 * theta.sin(), 0.0), rpy: Vec3::new(0.0, 0.0, theta) }
        } else {
            OriginDescription { xyz: Vec3::new(0.0, 0.0, prev_len), rpy: Vec3::ZERO }
        };
        let last = i + 1 == segments.len();
        links.push(LinkDescription {
            name: name.clone(),
            parent: Some(parent.clone()),
            origin,
            joint: Some(JointDescription { axis: Vec3::new(0.0, -1.0, 0.0), lower, upper, open_at: OpenAt::Lower }),
            points: capsule_points(length, last),
            primitives: vec![Primitive::Capsule { a: Vec3::ZERO, b: Vec3::new(0.0, 0.0, length), radius: FINGER_RADIUS }],
        });
        parent = name;
        prev_len = length;
    }
    links
}

fn hand(name: &str, angles_deg: &[f64], segments: &[(&str, f64, f64, f64)]) -> HandDescription {
    let mut links = vec![palm_link()];
    for (k, &deg) in angles_deg.iter().enumerate() {
        links.extend(finger(&format!("f{k}"), deg.to_radians(), segments));
    }
    HandDescription {
        name: name.into(),
        links,
        palm: PalmDescription { link: "palm".into(), center: Vec3::ZERO, normal: Vec3::Z },
        neighbors: Vec::new(),
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("assets/hands");
    std::fs::create_dir_all(&dir)?;
    let tripod = hand(
        "tripod",
        &[90.0, 210.0, 330.0],
        &[("prox", 0.04, -0.3, 1.4), ("mid", 0.03, 0.0, 1.6), ("distal", 0.025, 0.0, 1.4)],
    );
    let pinch = hand("pinch", &[0.0, 180.0], &[("prox", 0.045, -0.3, 1.4), ("distal", 0.035, 0.0, 1.6)]);
    for desc in [tripod, pinch] {
        // Round-trip through validation before writing.
        desc.build()?;
        let path = dir.join(format!("{}.json", desc.name));
        std::fs::write(&path, serde_json::to_string_pretty(&desc)? + "\n")?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
