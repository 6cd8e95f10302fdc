use std::fmt::Write as _;

use log::{info, warn};

use super::synth::GraspFile;
use super::{load_grid, load_hand, write_file, CliError, ExportArgs};
use crate::hand::{HandModel, HandPose};
use crate::math::{Transform, Vec3};
use crate::sdf::{extract_surface, Sdf, SdfGrid, TriMesh};

/// Appends `mesh` as group `name`. `base` counts the vertices already
/// written, since OBJ indices are global and 1-based.
pub fn write_obj_group(out: &mut String, name: &str, mesh: &TriMesh, base: &mut usize) {
    let _ = writeln!(out, "g {name}");
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {:.6} {:.6} {:.6}", v.x, v.y, v.z);
    }
    for f in &mesh.faces {
        let _ = writeln!(out, "f {} {} {}", *base + f[0] as usize + 1, *base + f[1] as usize + 1, *base + f[2] as usize + 1);
    }
    *base += mesh.vertices.len();
}

fn append(dst: &mut TriMesh, src: &TriMesh, frame: &Transform) {
    let base = dst.vertices.len() as u32;
    dst.vertices.extend(src.vertices.iter().map(|&v| frame.apply(v)));
    dst.faces.extend(src.faces.iter().map(|f| f.map(|i| i + base)));
}

/// Triangle soup of every collision primitive of the posed hand, in world
/// coordinates, meshed at roughly `resolution` meters.
pub fn tessellate_hand(model: &HandModel, pose: &HandPose, resolution: f64) -> Result<TriMesh, CliError> {
    let kin = model.kinematics(pose)?;
    let mut mesh = TriMesh::default();
    for (link, frame) in model.links.iter().zip(&kin.frames) {
        let frame: Transform = frame.value();
        for prim in &link.primitives {
            let (lo, hi) = prim.aabb();
            let pad = Vec3::splat(2.0 * resolution);
            let (lo, hi) = (lo - pad, hi + pad);
            let ext = hi - lo;
            let dims = [ext.x, ext.y, ext.z].map(|e| ((e / resolution).ceil() as usize + 1).clamp(4, 64));
            let local = extract_surface(|p| prim.value(p), lo, hi, dims, 0.0);
            append(&mut mesh, &local, &frame);
        }
    }
    Ok(mesh)
}

/// Zero level set of the grid in world coordinates, sampled on `dims`.
pub fn object_surface(grid: &SdfGrid, dims: [usize; 3]) -> TriMesh {
    let (lo, hi) = grid.bounds();
    let local = extract_surface(|p| grid.value_local(p), lo, hi, dims, 0.0);
    let mut mesh = TriMesh::default();
    append(&mut mesh, &local, grid.pose());
    mesh
}

pub fn cmd_export(args: &ExportArgs) -> Result<(), CliError> {
    let model = load_hand(&args.hand)?;
    let grid = load_grid(&args.sdf)?;
    let grasp = GraspFile::load(&args.grasp)?;
    let hand = tessellate_hand(&model, &grasp.candidate.hand_pose, 1.5e-3)?;
    let object = object_surface(&grid, args.dims.unwrap_or(grid.dims()));
    if object.faces.is_empty() {
        warn!("{} has no zero crossing; the object group is empty", args.sdf.display());
    }
    let mut text = String::new();
    let _ = writeln!(text, "# graspd scene: {}", args.grasp.display());
    let mut base = 0;
    write_obj_group(&mut text, "hand", &hand, &mut base);
    write_obj_group(&mut text, "object", &object, &mut base);
    write_file(&args.out, text.as_bytes())?;
    info!("wrote {} ({} hand and {} object triangles)", args.out.display(), hand.faces.len(), object.faces.len());
    Ok(())
}
