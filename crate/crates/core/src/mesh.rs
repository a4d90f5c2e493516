//! Indexed triangle surface with optional per-vertex labels and scalars.

use std::collections::HashMap;

use crate::vec3;
use crate::{Error, Real, Result};

/// Indexed triangle mesh. Units are centimeters throughout the pipeline.
///
/// `labels` carries an optional per-vertex part id and `scalars` an optional
/// per-vertex attribute (fur length or thickness, cm); both are `None` or
/// exactly vertex-sized.
#[derive(Clone, Debug, Default)]
pub struct TriMesh<T: Real> {
    pub vertices: Vec<[T; 3]>,
    pub faces: Vec<[usize; 3]>,
    pub labels: Option<Vec<u8>>,
    pub scalars: Option<Vec<T>>,
}

/// Degenerate-face area tolerance used by [`TriMesh::validate`].
pub const DEGENERATE_AREA_TOL: f64 = 1e-12;

impl<T: Real> TriMesh<T> {
    pub fn new(vertices: Vec<[T; 3]>, faces: Vec<[usize; 3]>) -> Self {
        TriMesh {
            vertices,
            faces,
            labels: None,
            scalars: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty() || self.faces.is_empty()
    }

    /// Checks index ranges, attribute sizes and degenerate faces.
    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptyMesh);
        }
        for (f, tri) in self.faces.iter().enumerate() {
            for &i in tri {
                if i >= self.vertices.len() {
                    return Err(Error::FaceIndexOutOfRange {
                        face: f,
                        index: i,
                        count: self.vertices.len(),
                    });
                }
            }
        }
        if let Some(l) = &self.labels {
            if l.len() != self.vertices.len() {
                return Err(Error::InvalidArgument(format!(
                    "label count {} != vertex count {}",
                    l.len(),
                    self.vertices.len()
                )));
            }
        }
        if let Some(s) = &self.scalars {
            if s.len() != self.vertices.len() {
                return Err(Error::InvalidArgument(format!(
                    "scalar count {} != vertex count {}",
                    s.len(),
                    self.vertices.len()
                )));
            }
        }
        for f in 0..self.faces.len() {
            let area = self.face_area(f).f64();
            if area <= DEGENERATE_AREA_TOL {
                return Err(Error::DegenerateFace { face: f, area });
            }
        }
        Ok(())
    }

    pub fn face_positions(&self, f: usize) -> [[T; 3]; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn face_area(&self, f: usize) -> T {
        let [a, b, c] = self.face_positions(f);
        vec3::norm(vec3::cross(vec3::sub(b, a), vec3::sub(c, a))) * T::of(0.5)
    }

    /// Unit face normal; zero vector for degenerate faces.
    pub fn face_normal(&self, f: usize) -> [T; 3] {
        let [a, b, c] = self.face_positions(f);
        vec3::normalized(vec3::cross(vec3::sub(b, a), vec3::sub(c, a)))
            .unwrap_or([T::zero(); 3])
    }

    pub fn face_centroid(&self, f: usize) -> [T; 3] {
        let [a, b, c] = self.face_positions(f);
        vec3::scale(vec3::add(vec3::add(a, b), c), T::of(1.0 / 3.0))
    }

    pub fn total_area(&self) -> T {
        (0..self.faces.len()).fold(T::zero(), |acc, f| acc + self.face_area(f))
    }

    /// Signed volume via the divergence theorem; positive for outward winding.
    pub fn signed_volume(&self) -> T {
        let sixth = T::of(1.0 / 6.0);
        self.faces.iter().fold(T::zero(), |acc, &[a, b, c]| {
            let (a, b, c) = (self.vertices[a], self.vertices[b], self.vertices[c]);
            acc + vec3::dot(a, vec3::cross(b, c)) * sixth
        })
    }

    pub fn bounding_box(&self) -> ([T; 3], [T; 3]) {
        let mut lo = [T::infinity(); 3];
        let mut hi = [T::neg_infinity(); 3];
        for v in &self.vertices {
            for d in 0..3 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        (lo, hi)
    }

    pub fn bbox_diagonal(&self) -> T {
        let (lo, hi) = self.bounding_box();
        vec3::dist(lo, hi)
    }

    /// Map undirected edge -> incident face count.
    pub fn edge_face_counts(&self) -> HashMap<(usize, usize), usize> {
        let mut counts = HashMap::with_capacity(self.faces.len() * 3 / 2);
        for tri in &self.faces {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                *counts.entry(key).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Number of undirected edges bounding fewer than two faces.
    pub fn open_edge_count(&self) -> usize {
        self.edge_face_counts().values().filter(|&&c| c < 2).count()
    }

    /// Watertight means every edge bounds exactly two faces.
    pub fn is_watertight(&self) -> bool {
        !self.is_empty() && self.edge_face_counts().values().all(|&c| c == 2)
    }

    pub fn require_watertight(&self) -> Result<()> {
        let counts = self.edge_face_counts();
        let open = counts.values().filter(|&&c| c != 2).count();
        if open > 0 {
            return Err(Error::NotWatertight { open_edges: open });
        }
        Ok(())
    }

    /// Per-vertex one-ring neighbor lists (sorted, deduplicated).
    pub fn vertex_one_rings(&self) -> Vec<Vec<usize>> {
        let mut rings = vec![Vec::new(); self.vertices.len()];
        for tri in &self.faces {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                rings[a].push(b);
                rings[b].push(a);
            }
        }
        for ring in &mut rings {
            ring.sort_unstable();
            ring.dedup();
        }
        rings
    }

    /// For every face, the three edge-adjacent faces (usize::MAX on boundary).
    /// Errors on non-manifold edges (more than two incident faces).
    pub fn face_adjacency(&self) -> Result<Vec<[usize; 3]>> {
        let mut edge_faces: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (f, tri) in self.faces.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                edge_faces.entry((a.min(b), a.max(b))).or_default().push(f);
            }
        }
        let bad = edge_faces.values().filter(|v| v.len() > 2).count();
        if bad > 0 {
            return Err(Error::NonManifold { count: bad });
        }
        let mut adj = vec![[usize::MAX; 3]; self.faces.len()];
        for (f, tri) in self.faces.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let incident = &edge_faces[&(a.min(b), a.max(b))];
                for &g in incident {
                    if g != f {
                        adj[f][k] = g;
                    }
                }
            }
        }
        Ok(adj)
    }

    /// Euler characteristic V - E + F.
    pub fn euler_characteristic(&self) -> i64 {
        let e = self.edge_face_counts().len() as i64;
        self.vertices.len() as i64 - e + self.faces.len() as i64
    }

    /// Area-weighted per-vertex normals (unit where defined).
    pub fn vertex_normals(&self) -> Vec<[T; 3]> {
        let mut normals = vec![[T::zero(); 3]; self.vertices.len()];
        for (f, tri) in self.faces.iter().enumerate() {
            let [a, b, c] = self.face_positions(f);
            let n = vec3::cross(vec3::sub(b, a), vec3::sub(c, a));
            for &i in tri {
                normals[i] = vec3::add(normals[i], n);
            }
        }
        for n in &mut normals {
            if let Some(u) = vec3::normalized(*n) {
                *n = u;
            }
        }
        normals
    }

    /// Face-connected components (shared edge connectivity); returns a
    /// per-face component id and the component count.
    pub fn face_components(&self) -> (Vec<usize>, usize) {
        let mut edge_faces: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (f, tri) in self.faces.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                edge_faces.entry((a.min(b), a.max(b))).or_default().push(f);
            }
        }
        let mut comp = vec![usize::MAX; self.faces.len()];
        let mut n_comp = 0;
        let mut stack = Vec::new();
        for seed in 0..self.faces.len() {
            if comp[seed] != usize::MAX {
                continue;
            }
            comp[seed] = n_comp;
            stack.push(seed);
            while let Some(f) = stack.pop() {
                let tri = self.faces[f];
                for k in 0..3 {
                    let (a, b) = (tri[k], tri[(k + 1) % 3]);
                    for &g in &edge_faces[&(a.min(b), a.max(b))] {
                        if comp[g] == usize::MAX {
                            comp[g] = n_comp;
                            stack.push(g);
                        }
                    }
                }
            }
            n_comp += 1;
        }
        (comp, n_comp)
    }
}

/// Icosphere of the given radius; `subdivisions = 4` gives 2562 vertices.
pub fn icosphere<T: Real>(radius: T, subdivisions: usize) -> TriMesh<T> {
    let phi = T::of((1.0 + 5.0_f64.sqrt()) / 2.0);
    let mut vertices: Vec<[T; 3]> = vec![
        [-T::one(), phi, T::zero()],
        [T::one(), phi, T::zero()],
        [-T::one(), -phi, T::zero()],
        [T::one(), -phi, T::zero()],
        [T::zero(), -T::one(), phi],
        [T::zero(), T::one(), phi],
        [T::zero(), -T::one(), -phi],
        [T::zero(), T::one(), -phi],
        [phi, T::zero(), -T::one()],
        [phi, T::zero(), T::one()],
        [-phi, T::zero(), -T::one()],
        [-phi, T::zero(), T::one()],
    ];
    let mut faces: Vec<[usize; 3]> = vec![
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
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let mut mid = |i: usize, j: usize, vertices: &mut Vec<[T; 3]>| -> usize {
                let key = (i.min(j), i.max(j));
                *midpoint.entry(key).or_insert_with(|| {
                    let m = vec3::scale(vec3::add(vertices[i], vertices[j]), T::of(0.5));
                    vertices.push(m);
                    vertices.len() - 1
                })
            };
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    for v in &mut vertices {
        *v = vec3::scale(vec3::normalized(*v).unwrap(), radius);
    }
    TriMesh::new(vertices, faces)
}

/// Flat grid of (nx-1)*(ny-1)*2 triangles in the z = 0 plane.
pub fn planar_grid<T: Real>(nx: usize, ny: usize, spacing: T) -> TriMesh<T> {
    let mut vertices = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            vertices.push([
                T::of(i as f64) * spacing,
                T::of(j as f64) * spacing,
                T::zero(),
            ]);
        }
    }
    let mut faces = Vec::with_capacity((nx - 1) * (ny - 1) * 2);
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let a = j * nx + i;
            let b = a + 1;
            let c = a + nx;
            let d = c + 1;
            faces.push([a, b, d]);
            faces.push([a, d, c]);
        }
    }
    TriMesh::new(vertices, faces)
}

/// Open cylinder shell around the z axis (no caps).
pub fn cylinder_shell<T: Real>(
    segments: usize,
    rings: usize,
    radius: T,
    height: T,
) -> TriMesh<T> {
    let mut vertices = Vec::with_capacity(segments * (rings + 1));
    for r in 0..=rings {
        let z = height * (T::of(r as f64) / T::of(rings as f64) - T::of(0.5));
        for s in 0..segments {
            let a = T::of(std::f64::consts::TAU * s as f64 / segments as f64);
            vertices.push([radius * a.cos(), radius * a.sin(), z]);
        }
    }
    let mut faces = Vec::with_capacity(segments * rings * 2);
    for r in 0..rings {
        for s in 0..segments {
            let s1 = (s + 1) % segments;
            let a = r * segments + s;
            let b = r * segments + s1;
            let c = (r + 1) * segments + s;
            let d = (r + 1) * segments + s1;
            faces.push([a, b, d]);
            faces.push([a, d, c]);
        }
    }
    TriMesh::new(vertices, faces)
}

/// Axis-aligned box mesh (12 triangles, outward winding).
pub fn box_mesh<T: Real>(lo: [T; 3], hi: [T; 3]) -> TriMesh<T> {
    let v = |x: usize, y: usize, z: usize| -> [T; 3] {
        [
            if x == 0 { lo[0] } else { hi[0] },
            if y == 0 { lo[1] } else { hi[1] },
            if z == 0 { lo[2] } else { hi[2] },
        ]
    };
    let vertices = vec![
        v(0, 0, 0),
        v(1, 0, 0),
        v(1, 1, 0),
        v(0, 1, 0),
        v(0, 0, 1),
        v(1, 0, 1),
        v(1, 1, 1),
        v(0, 1, 1),
    ];
    let faces = vec![
        [0, 2, 1],
        [0, 3, 2], // z = lo (normal -z)
        [4, 5, 6],
        [4, 6, 7], // z = hi (+z)
        [0, 1, 5],
        [0, 5, 4], // y = lo (-y)
        [3, 6, 2],
        [3, 7, 6], // y = hi (+y)
        [0, 7, 3],
        [0, 4, 7], // x = lo (-x)
        [1, 2, 6],
        [1, 6, 5], // x = hi (+x)
    ];
    TriMesh::new(vertices, faces)
}
