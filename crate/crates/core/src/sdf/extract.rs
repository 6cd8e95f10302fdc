//! Level-set extraction by marching tetrahedra.

use std::collections::HashMap;

use super::TriMesh;
use crate::math::Vec3;

/// Kuhn split of a cube into six tetrahedra around the 0-7 diagonal. Corner
/// `c` sits at offset `(c & 1, (c >> 1) & 1, (c >> 2) & 1)`. Every cube uses
/// the same split, so shared faces are cut identically.
const TETS: [[usize; 4]; 6] = [[0, 1, 3, 7], [0, 3, 2, 7], [0, 2, 6, 7], [0, 6, 4, 7], [0, 4, 5, 7], [0, 5, 1, 7]];

/// Triangulates `{x | f(x) = level}` sampled on a `dims` lattice spanning
/// `lo..hi`. Faces are oriented toward increasing `f`. Returns an empty mesh
/// when the sampled field never crosses `level`.
pub fn extract_surface<F: Fn(Vec3) -> f64>(f: F, lo: Vec3, hi: Vec3, dims: [usize; 3], level: f64) -> TriMesh {
    let [nx, ny, nz] = dims;
    let mut mesh = TriMesh::default();
    if nx < 2 || ny < 2 || nz < 2 {
        return mesh;
    }
    let h = Vec3::new((hi.x - lo.x) / (nx - 1) as f64, (hi.y - lo.y) / (ny - 1) as f64, (hi.z - lo.z) / (nz - 1) as f64);
    let pos = |i: usize, j: usize, k: usize| Vec3::new(lo.x + i as f64 * h.x, lo.y + j as f64 * h.y, lo.z + k as f64 * h.z);
    let flat = |i: usize, j: usize, k: usize| i + nx * (j + ny * k);
    let mut vals = vec![0.0; nx * ny * nz];
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                vals[flat(i, j, k)] = f(pos(i, j, k)) - level;
            }
        }
    }
    let mut edge_vertex: HashMap<(usize, usize), u32> = HashMap::new();

    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let corner = |c: usize| (i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
                let ids: [usize; 8] = std::array::from_fn(|c| {
                    let (a, b, d) = corner(c);
                    flat(a, b, d)
                });
                let any_in = ids.iter().any(|&n| vals[n] < 0.0);
                let any_out = ids.iter().any(|&n| vals[n] >= 0.0);
                if !(any_in && any_out) {
                    continue;
                }
                for tet in TETS {
                    let t: [usize; 4] = tet.map(|c| ids[c]);
                    let (inside, outside): (Vec<usize>, Vec<usize>) = t.iter().partition(|&&n| vals[n] < 0.0);
                    if inside.is_empty() || outside.is_empty() {
                        continue;
                    }
                    let node_pos = |n: usize| {
                        let (a, b, d) = (n % nx, (n / nx) % ny, n / (nx * ny));
                        pos(a, b, d)
                    };
                    let mut cut = |a: usize, b: usize, mesh: &mut TriMesh| -> u32 {
                        let key = (a.min(b), a.max(b));
                        *edge_vertex.entry(key).or_insert_with(|| {
                            let (va, vb) = (vals[a], vals[b]);
                            let s = va / (va - vb);
                            let p = node_pos(a) + (node_pos(b) - node_pos(a)).scale(s);
                            mesh.vertices.push(p);
                            mesh.vertices.len() as u32 - 1
                        })
                    };
                    let centroid = |ns: &[usize]| ns.iter().fold(Vec3::ZERO, |acc, &n| acc + node_pos(n)).scale(1.0 / ns.len() as f64);
                    let outward = centroid(&outside) - centroid(&inside);
                    let mut tris: Vec<[u32; 3]> = Vec::new();
                    match inside.len() {
                        1 => tris.push([
                            cut(inside[0], outside[0], &mut mesh),
                            cut(inside[0], outside[1], &mut mesh),
                            cut(inside[0], outside[2], &mut mesh),
                        ]),
                        3 => tris.push([
                            cut(outside[0], inside[0], &mut mesh),
                            cut(outside[0], inside[1], &mut mesh),
                            cut(outside[0], inside[2], &mut mesh),
                        ]),
                        _ => {
                            let a = cut(inside[0], outside[0], &mut mesh);
                            let b = cut(inside[0], outside[1], &mut mesh);
                            let c = cut(inside[1], outside[1], &mut mesh);
                            let d = cut(inside[1], outside[0], &mut mesh);
                            tris.push([a, b, c]);
                            tris.push([a, c, d]);
                        }
                    }
                    for mut tri in tris {
                        let [p, q, r] = tri.map(|v| mesh.vertices[v as usize]);
                        if (q - p).cross(r - p).dot(outward) < 0.0 {
                            tri.swap(1, 2);
                        }
                        mesh.faces.push(tri);
                    }
                }
            }
        }
    }
    mesh
}
