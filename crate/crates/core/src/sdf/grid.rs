use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use super::{Sdf, SdfError, SdfSample};
use crate::math::{Mat3, Transform, Vec3};

const MAGIC: &[u8; 4] = b"GSDF";
const VERSION: u32 = 1;

/// Signed distances sampled on a regular grid in the object's local frame,
/// interpolated trilinearly.
///
/// Outside the grid bounds the value is extended as
/// `phi(clamp(x)) + |x - clamp(x)|`.
#[derive(Clone, Debug, PartialEq)]
pub struct SdfGrid {
    dims: [usize; 3],
    min: Vec3,
    max: Vec3,
    spacing: Vec3,
    values: Vec<f64>,
    pose: Transform,
}

impl SdfGrid {
    /// `values` are laid out x-fastest: index `i + nx * (j + ny * k)`.
    pub fn new(dims: [usize; 3], min: Vec3, max: Vec3, values: Vec<f64>) -> Result<Self, SdfError> {
        if dims.iter().any(|&n| n < 2) {
            return Err(SdfError::Parameter(format!("grid needs at least 2 nodes per axis, got {dims:?}")));
        }
        let count = dims[0]
            .checked_mul(dims[1])
            .and_then(|v| v.checked_mul(dims[2]))
            .ok_or_else(|| SdfError::Parameter("grid too large".into()))?;
        if values.len() != count {
            return Err(SdfError::Parameter(format!("expected {count} values, got {}", values.len())));
        }
        for a in 0..3 {
            if !(max[a] > min[a]) || !min[a].is_finite() || !max[a].is_finite() {
                return Err(SdfError::Parameter(format!("degenerate bounds on axis {a}")));
            }
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SdfError::Parameter(format!("non-finite value at index {i}")));
        }
        let spacing = Vec3::new(
            (max.x - min.x) / (dims[0] - 1) as f64,
            (max.y - min.y) / (dims[1] - 1) as f64,
            (max.z - min.z) / (dims[2] - 1) as f64,
        );
        Ok(SdfGrid { dims, min, max, spacing, values, pose: Transform::IDENTITY })
    }

    /// Samples `f` at every node (in parallel).
    pub fn from_fn<F>(dims: [usize; 3], min: Vec3, max: Vec3, f: F) -> Result<Self, SdfError>
    where
        F: Fn(Vec3) -> f64 + Sync,
    {
        let mut g = SdfGrid::new(dims, min, max, vec![0.0; dims.iter().product()])?;
        let vals: Vec<f64> = (0..g.values.len()).into_par_iter().map(|i| f(g.node_position_flat(i))).collect();
        if let Some(i) = vals.iter().position(|v| !v.is_finite()) {
            return Err(SdfError::Parameter(format!("non-finite value at index {i}")));
        }
        g.values = vals;
        Ok(g)
    }

    pub fn with_pose(mut self, pose: Transform) -> Self {
        self.pose = pose;
        self
    }

    pub fn set_pose(&mut self, pose: Transform) {
        self.pose = pose;
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        (self.min, self.max)
    }

    pub fn spacing(&self) -> Vec3 {
        self.spacing
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn node(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.index(i, j, k)]
    }

    pub fn node_position(&self, i: usize, j: usize, k: usize) -> Vec3 {
        Vec3::new(
            self.min.x + i as f64 * self.spacing.x,
            self.min.y + j as f64 * self.spacing.y,
            self.min.z + k as f64 * self.spacing.z,
        )
    }

    fn node_position_flat(&self, idx: usize) -> Vec3 {
        let i = idx % self.dims[0];
        let j = (idx / self.dims[0]) % self.dims[1];
        let k = idx / (self.dims[0] * self.dims[1]);
        self.node_position(i, j, k)
    }

    /// Cell origin and fractional coordinate along one axis. Ties at an
    /// interior node go to the lower cell; near-node coordinates snap onto
    /// the node so node values are reproduced exactly.
    fn locate(&self, a: usize, p: f64) -> (usize, f64) {
        let n = self.dims[a];
        let mut u = (p - self.min[a]) / self.spacing[a];
        let r = u.round();
        if (u - r).abs() < 1e-9 {
            u = r;
        }
        let i = ((u.ceil() as isize) - 1).clamp(0, n as isize - 2) as usize;
        (i, (u - i as f64).clamp(0.0, 1.0))
    }

    /// Trilinear value, gradient and Hessian at a point inside the bounds.
    fn interpolate(&self, p: Vec3) -> (f64, [f64; 3], [[f64; 3]; 3]) {
        let (i, tx) = self.locate(0, p.x);
        let (j, ty) = self.locate(1, p.y);
        let (k, tz) = self.locate(2, p.z);
        let mut c = [[[0.0; 2]; 2]; 2];
        for (a, ca) in c.iter_mut().enumerate() {
            for (b, cb) in ca.iter_mut().enumerate() {
                for (d, cd) in cb.iter_mut().enumerate() {
                    *cd = self.node(i + a, j + b, k + d);
                }
            }
        }
        let w = |t: f64| [1.0 - t, t];
        let s = [-1.0, 1.0];
        let (wx, wy, wz) = (w(tx), w(ty), w(tz));
        let mut v = 0.0;
        let mut g = [0.0; 3];
        let (mut hxy, mut hxz, mut hyz) = (0.0, 0.0, 0.0);
        for a in 0..2 {
            for b in 0..2 {
                for d in 0..2 {
                    let cv = c[a][b][d];
                    v += cv * wx[a] * wy[b] * wz[d];
                    g[0] += cv * s[a] * wy[b] * wz[d];
                    g[1] += cv * wx[a] * s[b] * wz[d];
                    g[2] += cv * wx[a] * wy[b] * s[d];
                    hxy += cv * s[a] * s[b] * wz[d];
                    hxz += cv * s[a] * wy[b] * s[d];
                    hyz += cv * wx[a] * s[b] * s[d];
                }
            }
        }
        let h = self.spacing;
        let g = [g[0] / h.x, g[1] / h.y, g[2] / h.z];
        let hxy = hxy / (h.x * h.y);
        let hxz = hxz / (h.x * h.z);
        let hyz = hyz / (h.y * h.z);
        (v, g, [[0.0, hxy, hxz], [hxy, 0.0, hyz], [hxz, hyz, 0.0]])
    }

    fn clamp(&self, p: Vec3) -> Vec3 {
        Vec3::new(
            p.x.clamp(self.min.x, self.max.x),
            p.y.clamp(self.min.y, self.max.y),
            p.z.clamp(self.min.z, self.max.z),
        )
    }

    pub fn load(path: &Path) -> Result<Self, SdfError> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut f)
    }

    pub fn save(&self, path: &Path) -> Result<(), SdfError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    /// Little-endian: magic, version, 3 x u32 dims, 6 x f64 bounds
    /// (min then max), then f64 values x-fastest.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), SdfError> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        for &n in &self.dims {
            w.write_all(&(n as u32).to_le_bytes())?;
        }
        for v in [self.min.x, self.min.y, self.min.z, self.max.x, self.max.y, self.max.z] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, SdfError> {
        let mut magic = [0u8; 4];
        read_exact(r, &mut magic)?;
        if &magic != MAGIC {
            return Err(SdfError::Format("bad magic".into()));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(SdfError::Format(format!("unsupported version {version}")));
        }
        let mut dims = [0usize; 3];
        for d in &mut dims {
            *d = read_u32(r)? as usize;
        }
        let mut b = [0.0; 6];
        for v in &mut b {
            *v = read_f64(r)?;
        }
        let count = dims.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n));
        let count = match count {
            Some(c) if c <= (1 << 31) => c,
            _ => return Err(SdfError::Format(format!("implausible dims {dims:?}"))),
        };
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != count * 8 {
            return Err(SdfError::Format(format!("expected {} value bytes, found {}", count * 8, bytes.len())));
        }
        let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        SdfGrid::new(dims, Vec3::new(b[0], b[1], b[2]), Vec3::new(b[3], b[4], b[5]), values)
            .map_err(|e| SdfError::Format(e.to_string()))
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<(), SdfError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => SdfError::Format("truncated header".into()),
        _ => SdfError::Io(e),
    })
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, SdfError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64, SdfError> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(f64::from_le_bytes(b))
}

impl Sdf for SdfGrid {
    fn pose(&self) -> &Transform {
        &self.pose
    }

    fn value_local(&self, p: Vec3) -> f64 {
        let pc = self.clamp(p);
        let e = p - pc;
        self.interpolate(pc).0 + e.norm()
    }

    fn sample_local(&self, p: Vec3) -> SdfSample {
        let pc = self.clamp(p);
        let e = p - pc;
        let n = e.norm();
        let (v, g, h) = self.interpolate(pc);
        if n == 0.0 {
            return SdfSample {
                value: v,
                dvalue: Vec3::from(g),
                normal: Vec3::from(g),
                dnormal: Mat3 { m: h },
            };
        }
        // Clamped axes follow the exterior distance; free axes follow the
        // interpolant at the clamped point.
        let clamped = [e.x != 0.0, e.y != 0.0, e.z != 0.0];
        let mut dvalue = [0.0; 3];
        for a in 0..3 {
            dvalue[a] = if clamped[a] { e[a] / n } else { g[a] };
        }
        if n > 1e-9 {
            let u = [e.x / n, e.y / n, e.z / n];
            let mut m = [[0.0; 3]; 3];
            for (a, row) in m.iter_mut().enumerate() {
                for (b, x) in row.iter_mut().enumerate() {
                    let p = if a == b && clamped[a] { 1.0 } else { 0.0 };
                    *x = (p - u[a] * u[b]) / n;
                }
            }
            SdfSample { value: v + n, dvalue: Vec3::from(dvalue), normal: Vec3::from(u), dnormal: Mat3 { m } }
        } else {
            let mut m = h;
            for row in m.iter_mut() {
                for (b, x) in row.iter_mut().enumerate() {
                    if clamped[b] {
                        *x = 0.0;
                    }
                }
            }
            SdfSample { value: v + n, dvalue: Vec3::from(dvalue), normal: Vec3::from(g), dnormal: Mat3 { m } }
        }
    }
}
