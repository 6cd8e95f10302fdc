use crate::math::{Mat3, Vec3};
use crate::sdf::{SdfError, SdfGrid};

/// Mass properties of the object, in its local frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidBody {
    pub mass: f64,
    /// Center of mass, object-local.
    pub com: Vec3,
    /// Inertia about the center of mass, object-local axes.
    pub inertia: Mat3,
    pub inertia_inv: Mat3,
    /// Radius of a sphere about the center of mass enclosing the object.
    pub radius: f64,
}

impl RigidBody {
    pub fn new(mass: f64, com: Vec3, inertia: Mat3, radius: f64) -> Result<Self, SdfError> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(SdfError::Parameter(format!("mass must be positive, got {mass}")));
        }
        let sym = (0..3).all(|i| (0..3).all(|j| (inertia.m[i][j] - inertia.m[j][i]).abs() <= 1e-12 * inertia.m[i][i].abs().max(1e-30)));
        let inv = inertia.inverse().filter(|_| sym && inertia.m[0][0] > 0.0 && inertia.determinant() > 0.0);
        let inertia_inv = inv.ok_or_else(|| SdfError::Parameter("inertia must be symmetric positive definite".into()))?;
        Ok(RigidBody { mass, com, inertia, inertia_inv, radius })
    }

    /// Solid sphere of the given radius centered at the local origin.
    pub fn solid_sphere(radius: f64, density: f64) -> Result<Self, SdfError> {
        let mass = density * 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3);
        let i = 0.4 * mass * radius * radius;
        RigidBody::new(mass, Vec3::ZERO, Mat3::diag(Vec3::splat(i)), radius)
    }

    /// Smallest principal moment (lower bound from the Gershgorin discs is
    /// enough for step-size bounds).
    pub fn min_inertia(&self) -> f64 {
        (0..3)
            .map(|i| {
                let off: f64 = (0..3).filter(|&j| j != i).map(|j| self.inertia.m[i][j].abs()).sum();
                self.inertia.m[i][i] - off
            })
            .fold(f64::INFINITY, f64::min)
            .max(1e-30)
    }
}

/// Integrates density over the grid's interior.
///
/// Each node stands for one grid cell centered on it, occupied by the
/// fraction `clamp(1/2 - phi/h, 0, 1)` (h the cell's edge length), which
/// smooths the staircase at the surface.
pub fn mass_properties(grid: &SdfGrid, density: f64) -> Result<RigidBody, SdfError> {
    if !(density > 0.0 && density.is_finite()) {
        return Err(SdfError::Parameter(format!("density must be positive, got {density}")));
    }
    let h = grid.spacing();
    let cell = h.x * h.y * h.z;
    let edge = cell.cbrt();
    let [nx, ny, nz] = grid.dims();
    let mut samples = Vec::new();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let phi = grid.node(i, j, k);
                let occ = (0.5 - phi / edge).clamp(0.0, 1.0);
                if occ > 0.0 {
                    samples.push((grid.node_position(i, j, k), occ * cell * density, phi));
                }
            }
        }
    }
    if !samples.iter().any(|s| s.2 < 0.0) {
        return Err(SdfError::NoInterior);
    }
    let mass: f64 = samples.iter().map(|s| s.1).sum();
    let com = samples.iter().fold(Vec3::ZERO, |acc, s| acc + s.0.scale(s.1)).scale(1.0 / mass);
    let mut m = [[0.0; 3]; 3];
    let cube = [(h.y * h.y + h.z * h.z) / 12.0, (h.x * h.x + h.z * h.z) / 12.0, (h.x * h.x + h.y * h.y) / 12.0];
    let mut radius: f64 = 0.0;
    for &(p, dm, phi) in &samples {
        let r = (p - com).to_array();
        let r2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
        for a in 0..3 {
            for b in 0..3 {
                let id = if a == b { r2 + cube[a] } else { 0.0 };
                m[a][b] += dm * (id - r[a] * r[b]);
            }
        }
        if phi < 0.0 {
            // The nearest surface point lies within |phi| of the node.
            radius = radius.max(r2.sqrt() - phi);
        }
    }
    // Symmetrize against round-off.
    for a in 0..3 {
        for b in a + 1..3 {
            let v = 0.5 * (m[a][b] + m[b][a]);
            m[a][b] = v;
            m[b][a] = v;
        }
    }
    RigidBody::new(mass, com, Mat3 { m }, radius)
}
