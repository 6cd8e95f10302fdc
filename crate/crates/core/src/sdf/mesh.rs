use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::SdfError;
use crate::math::Vec3;

/// Indexed triangle mesh.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<Self, SdfError> {
        let n = vertices.len() as u32;
        if let Some(f) = faces.iter().find(|f| f.iter().any(|&i| i >= n)) {
            return Err(SdfError::Mesh(format!("face {f:?} references a missing vertex")));
        }
        if vertices.iter().any(|v| !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite())) {
            return Err(SdfError::Mesh("non-finite vertex".into()));
        }
        Ok(TriMesh { vertices, faces })
    }

    pub fn load_obj(path: &Path) -> Result<Self, SdfError> {
        Self::parse_obj(&std::fs::read_to_string(path)?)
    }

    /// Reads `v` and triangular `f` records; other records are ignored.
    pub fn parse_obj(text: &str) -> Result<Self, SdfError> {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let mut it = line.split_whitespace();
            let err = |m: &str| SdfError::Mesh(format!("line {}: {m}", lineno + 1));
            match it.next() {
                Some("v") => {
                    let c: Result<Vec<f64>, _> = it.take(3).map(str::parse).collect();
                    let c = c.map_err(|_| err("bad vertex coordinate"))?;
                    if c.len() != 3 {
                        return Err(err("vertex needs three coordinates"));
                    }
                    vertices.push(Vec3::new(c[0], c[1], c[2]));
                }
                Some("f") => {
                    let mut idx = Vec::new();
                    for tok in it {
                        let head = tok.split('/').next().unwrap_or("");
                        let i: i64 = head.parse().map_err(|_| err("bad face index"))?;
                        let n = vertices.len() as i64;
                        let i = if i < 0 { n + i } else { i - 1 };
                        if i < 0 || i >= n {
                            return Err(err("face index out of range"));
                        }
                        idx.push(i as u32);
                    }
                    if idx.len() != 3 {
                        return Err(err("only triangular faces are supported"));
                    }
                    faces.push([idx[0], idx[1], idx[2]]);
                }
                _ => {}
            }
        }
        if faces.is_empty() {
            return Err(SdfError::Mesh("no faces".into()));
        }
        TriMesh::new(vertices, faces)
    }

    pub fn to_obj(&self) -> String {
        let mut s = String::new();
        write_obj_group(&mut s, None, self, 0);
        s
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::splat(f64::INFINITY);
        let mut hi = Vec3::splat(f64::NEG_INFINITY);
        for &v in &self.vertices {
            lo = lo.component_min(v);
            hi = hi.component_max(v);
        }
        (lo, hi)
    }

    pub fn triangle(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    /// Signed enclosed volume (positive for outward-oriented faces).
    pub fn volume(&self) -> f64 {
        (0..self.faces.len())
            .map(|f| {
                let [a, b, c] = self.triangle(f);
                a.dot(b.cross(c)) / 6.0
            })
            .sum()
    }

    /// Every undirected edge is shared by exactly two faces.
    pub fn is_closed(&self) -> bool {
        let mut edges: HashMap<(u32, u32), u32> = HashMap::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        edges.values().all(|&c| c == 2)
    }

    /// Axis-aligned cube centered at the origin.
    pub fn cube(half: f64) -> TriMesh {
        let mut v = Vec::new();
        for k in 0..8 {
            let s = |b: usize| if k & b != 0 { half } else { -half };
            v.push(Vec3::new(s(1), s(2), s(4)));
        }
        let quads = [[0, 2, 3, 1], [4, 5, 7, 6], [0, 1, 5, 4], [2, 6, 7, 3], [0, 4, 6, 2], [1, 3, 7, 5]];
        let mut faces = Vec::new();
        for q in quads {
            faces.push([q[0], q[1], q[2]]);
            faces.push([q[0], q[2], q[3]]);
        }
        TriMesh { vertices: v, faces }
    }

    /// Subdivided icosahedron projected onto a sphere.
    pub fn icosphere(radius: f64, subdivisions: u32) -> TriMesh {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut v: Vec<Vec3> = [
            (-1.0, t, 0.0),
            (1.0, t, 0.0),
            (-1.0, -t, 0.0),
            (1.0, -t, 0.0),
            (0.0, -1.0, t),
            (0.0, 1.0, t),
            (0.0, -1.0, -t),
            (0.0, 1.0, -t),
            (t, 0.0, -1.0),
            (t, 0.0, 1.0),
            (-t, 0.0, -1.0),
            (-t, 0.0, 1.0),
        ]
        .iter()
        .map(|&(x, y, z)| Vec3::new(x, y, z).normalized())
        .collect();
        let mut faces: Vec<[u32; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
            let mut next = Vec::with_capacity(faces.len() * 4);
            let mut midpoint = |a: u32, b: u32, v: &mut Vec<Vec3>| -> u32 {
                *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    v.push((v[a as usize] + v[b as usize]).normalized());
                    v.len() as u32 - 1
                })
            };
            for [a, b, c] in faces {
                let ab = midpoint(a, b, &mut v);
                let bc = midpoint(b, c, &mut v);
                let ca = midpoint(c, a, &mut v);
                next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        for p in &mut v {
            *p = p.scale(radius);
        }
        TriMesh { vertices: v, faces }
    }
}

/// Appends `mesh` as an OBJ group; `offset` is the number of vertices
/// already written.
pub(crate) fn write_obj_group(out: &mut String, name: Option<&str>, mesh: &TriMesh, offset: usize) {
    if let Some(n) = name {
        let _ = writeln!(out, "g {n}");
    }
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for f in &mesh.faces {
        let _ = writeln!(
            out,
            "f {} {} {}",
            f[0] as usize + offset + 1,
            f[1] as usize + offset + 1,
            f[2] as usize + offset + 1
        );
    }
}
