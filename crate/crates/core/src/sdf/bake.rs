//! Mesh to signed-distance-grid conversion.
//!
//! Unsigned distance comes from closest-point queries against a bounding
//! volume hierarchy. The sign comes from ray parity along scanlines parallel
//! to each coordinate axis; a closed mesh gives the same answer on all three
//! axes, so disagreement away from the surface exposes holes.

use rayon::prelude::*;

use super::{SdfError, SdfGrid, TriMesh};
use crate::math::Vec3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BakeOptions {
    pub dims: [usize; 3],
    /// Margin added around the mesh bounding box, in meters.
    pub padding: f64,
}

impl Default for BakeOptions {
    fn default() -> Self {
        BakeOptions { dims: [256; 3], padding: 0.01 }
    }
}

/// Converts a closed, outward-oriented mesh to a grid.
pub fn bake(mesh: &TriMesh, opts: &BakeOptions) -> Result<SdfGrid, SdfError> {
    if opts.dims.iter().any(|&n| n < 2) {
        return Err(SdfError::Parameter(format!("dims must be at least 2, got {:?}", opts.dims)));
    }
    if !(opts.padding > 0.0) || !opts.padding.is_finite() {
        return Err(SdfError::Parameter(format!("padding must be positive, got {}", opts.padding)));
    }
    if mesh.faces.is_empty() {
        return Err(SdfError::Mesh("no faces".into()));
    }
    let (lo, hi) = mesh.bounds();
    let pad = Vec3::splat(opts.padding);
    let grid = SdfGrid::new(opts.dims, lo - pad, hi + pad, vec![0.0; opts.dims.iter().product()])?;

    let bvh = Bvh::build(mesh);
    let unsigned: Vec<f64> = (0..grid.values().len())
        .into_par_iter()
        .map(|idx| {
            let [i, j, k] = unflatten(opts.dims, idx);
            bvh.distance(mesh, grid.node_position(i, j, k))
        })
        .collect();

    let votes = [parity(mesh, &grid, 0), parity(mesh, &grid, 1), parity(mesh, &grid, 2)];
    let h = grid.spacing();
    let tol = h.x.max(h.y).max(h.z);
    let mut values = Vec::with_capacity(unsigned.len());
    let mut offending = Vec::new();
    for (idx, &d) in unsigned.iter().enumerate() {
        let n_in = votes.iter().filter(|v| v[idx]).count();
        if n_in != 0 && n_in != 3 && d > tol {
            offending.push(unflatten(opts.dims, idx));
        }
        values.push(if n_in >= 2 { -d } else { d });
    }
    if !offending.is_empty() {
        let count = offending.len();
        offending.truncate(8);
        return Err(SdfError::NotWatertight { count, examples: offending });
    }
    if !values.iter().any(|&v| v < 0.0) {
        return Err(SdfError::NoInterior);
    }
    SdfGrid::new(opts.dims, lo - pad, hi + pad, values)
}

fn unflatten(dims: [usize; 3], idx: usize) -> [usize; 3] {
    [idx % dims[0], (idx / dims[0]) % dims[1], idx / (dims[0] * dims[1])]
}

/// Inside flags from scanlines parallel to `axis`.
///
/// Lines are shifted by a tiny fixed offset so they avoid passing exactly
/// through vertices and edges of axis-aligned meshes. Edge functions are
/// evaluated with endpoints in index order so the two triangles sharing an
/// edge agree exactly on which side a line falls.
fn parity(mesh: &TriMesh, grid: &SdfGrid, axis: usize) -> Vec<bool> {
    let dims = grid.dims();
    let (min, _) = grid.bounds();
    let h = grid.spacing();
    let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
    let jitter = [1.234_567e-6, -2.345_678e-6, 3.141_593e-6];
    let off_u = jitter[u] * h[u];
    let off_v = jitter[v] * h[v];
    let (nu, nv) = (dims[u], dims[v]);
    let mut crossings: Vec<Vec<f64>> = vec![Vec::new(); nu * nv];

    let edge = |p: (f64, f64), a: (u32, (f64, f64)), b: (u32, (f64, f64))| -> f64 {
        let ((ia, pa), (ib, pb)) = (a, b);
        let (s, q0, q1) = if ia < ib { (1.0, pa, pb) } else { (-1.0, pb, pa) };
        s * ((q1.0 - q0.0) * (p.1 - q0.1) - (q1.1 - q0.1) * (p.0 - q0.0))
    };

    for f in &mesh.faces {
        let tri = [mesh.vertices[f[0] as usize], mesh.vertices[f[1] as usize], mesh.vertices[f[2] as usize]];
        let p2: Vec<(u32, (f64, f64))> = (0..3).map(|k| (f[k], (tri[k][u], tri[k][v]))).collect();
        let (mut lu, mut hu, mut lv, mut hv) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(_, (a, b)) in &p2 {
            lu = lu.min(a);
            hu = hu.max(a);
            lv = lv.min(b);
            hv = hv.max(b);
        }
        let i0 = (((lu - min[u] - off_u) / h[u]).floor().max(0.0)) as usize;
        let i1 = ((((hu - min[u] - off_u) / h[u]).ceil()) as isize).clamp(-1, nu as isize - 1);
        let j0 = (((lv - min[v] - off_v) / h[v]).floor().max(0.0)) as usize;
        let j1 = ((((hv - min[v] - off_v) / h[v]).ceil()) as isize).clamp(-1, nv as isize - 1);
        if i1 < 0 || j1 < 0 {
            continue;
        }
        for j in j0..=j1 as usize {
            let pv = min[v] + j as f64 * h[v] + off_v;
            for i in i0..=i1 as usize {
                let pu = min[u] + i as f64 * h[u] + off_u;
                let p = (pu, pv);
                let e0 = edge(p, p2[1], p2[2]);
                let e1 = edge(p, p2[2], p2[0]);
                let e2 = edge(p, p2[0], p2[1]);
                let inside = (e0 > 0.0 && e1 > 0.0 && e2 > 0.0) || (e0 < 0.0 && e1 < 0.0 && e2 < 0.0);
                if !inside {
                    continue;
                }
                let sum = e0 + e1 + e2;
                let t = (e0 * tri[0][axis] + e1 * tri[1][axis] + e2 * tri[2][axis]) / sum;
                crossings[i + nu * j].push(t);
            }
        }
    }

    let mut inside = vec![false; grid.values().len()];
    let na = dims[axis];
    for j in 0..nv {
        for i in 0..nu {
            let c = &mut crossings[i + nu * j];
            c.sort_by(|a, b| a.total_cmp(b));
            let mut next = 0;
            for s in 0..na {
                let x = min[axis] + s as f64 * h[axis];
                while next < c.len() && c[next] < x {
                    next += 1;
                }
                let mut node = [0usize; 3];
                node[axis] = s;
                node[u] = i;
                node[v] = j;
                inside[grid.index(node[0], node[1], node[2])] = next % 2 == 1;
            }
        }
    }
    inside
}

struct BvhNode {
    lo: Vec3,
    hi: Vec3,
    /// Leaf: `start..start + count` into `order`; interior: `count == 0` and
    /// children at `start` and `start + 1`.
    start: u32,
    count: u32,
}

struct Bvh {
    nodes: Vec<BvhNode>,
    order: Vec<u32>,
}

const LEAF_SIZE: usize = 4;

impl Bvh {
    fn build(mesh: &TriMesh) -> Bvh {
        let n = mesh.faces.len();
        let mut order: Vec<u32> = (0..n as u32).collect();
        let centroids: Vec<Vec3> = (0..n)
            .map(|f| {
                let [a, b, c] = mesh.triangle(f);
                (a + b + c).scale(1.0 / 3.0)
            })
            .collect();
        let mut nodes = vec![BvhNode { lo: Vec3::ZERO, hi: Vec3::ZERO, start: 0, count: 0 }];
        let mut stack = vec![(0usize, 0usize, n)];
        while let Some((node, s, e)) = stack.pop() {
            let (mut lo, mut hi) = (Vec3::splat(f64::INFINITY), Vec3::splat(f64::NEG_INFINITY));
            let (mut clo, mut chi) = (lo, hi);
            for &f in &order[s..e] {
                for p in mesh.triangle(f as usize) {
                    lo = lo.component_min(p);
                    hi = hi.component_max(p);
                }
                clo = clo.component_min(centroids[f as usize]);
                chi = chi.component_max(centroids[f as usize]);
            }
            nodes[node].lo = lo;
            nodes[node].hi = hi;
            if e - s <= LEAF_SIZE {
                nodes[node].start = s as u32;
                nodes[node].count = (e - s) as u32;
                continue;
            }
            let ext = chi - clo;
            let axis = if ext.x >= ext.y && ext.x >= ext.z {
                0
            } else if ext.y >= ext.z {
                1
            } else {
                2
            };
            let mid = (s + e) / 2;
            order[s..e].select_nth_unstable_by(mid - s, |&a, &b| {
                centroids[a as usize][axis].total_cmp(&centroids[b as usize][axis])
            });
            let left = nodes.len();
            nodes.push(BvhNode { lo: Vec3::ZERO, hi: Vec3::ZERO, start: 0, count: 0 });
            nodes.push(BvhNode { lo: Vec3::ZERO, hi: Vec3::ZERO, start: 0, count: 0 });
            nodes[node].start = left as u32;
            nodes[node].count = 0;
            stack.push((left, s, mid));
            stack.push((left + 1, mid, e));
        }
        Bvh { nodes, order }
    }

    fn box_distance_squared(node: &BvhNode, p: Vec3) -> f64 {
        let mut d = 0.0;
        for a in 0..3 {
            let v = if p[a] < node.lo[a] {
                node.lo[a] - p[a]
            } else if p[a] > node.hi[a] {
                p[a] - node.hi[a]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }

    fn distance(&self, mesh: &TriMesh, p: Vec3) -> f64 {
        let mut best = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if Self::box_distance_squared(node, p) >= best {
                continue;
            }
            if node.count > 0 {
                let s = node.start as usize;
                for &f in &self.order[s..s + node.count as usize] {
                    let [a, b, c] = mesh.triangle(f as usize);
                    let q = closest_point_on_triangle(p, a, b, c);
                    best = best.min((p - q).norm_squared());
                }
            } else {
                let (l, r) = (node.start as usize, node.start as usize + 1);
                let (dl, dr) = (Self::box_distance_squared(&self.nodes[l], p), Self::box_distance_squared(&self.nodes[r], p));
                // Visit the nearer child first.
                if dl < dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        best.sqrt()
    }
}

/// Closest point on triangle `abc` to `p` by Voronoi-region classification.
pub(crate) fn closest_point_on_triangle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab.scale(d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac.scale(d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b).scale((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab.scale(vb * denom) + ac.scale(vc * denom)
}
