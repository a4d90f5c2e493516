//! Mesh decimation by iterative edge collapse with quadric error.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use crate::vec3;
use crate::{Error, Real, Result, TriMesh};

/// Symmetric 4x4 quadric stored as the 10 unique coefficients of
/// [A b; b^T c] with A symmetric 3x3.
#[derive(Clone, Copy, Debug, Default)]
struct Quadric {
    a: [f64; 6], // xx, xy, xz, yy, yz, zz
    b: [f64; 3],
    c: f64,
}

impl Quadric {
    fn from_plane(n: [f64; 3], d: f64, weight: f64) -> Self {
        Quadric {
            a: [
                weight * n[0] * n[0],
                weight * n[0] * n[1],
                weight * n[0] * n[2],
                weight * n[1] * n[1],
                weight * n[1] * n[2],
                weight * n[2] * n[2],
            ],
            b: [weight * d * n[0], weight * d * n[1], weight * d * n[2]],
            c: weight * d * d,
        }
    }

    fn add(&mut self, other: &Quadric) {
        for i in 0..6 {
            self.a[i] += other.a[i];
        }
        for i in 0..3 {
            self.b[i] += other.b[i];
        }
        self.c += other.c;
    }

    fn eval(&self, p: [f64; 3]) -> f64 {
        let ap = [
            self.a[0] * p[0] + self.a[1] * p[1] + self.a[2] * p[2],
            self.a[1] * p[0] + self.a[3] * p[1] + self.a[4] * p[2],
            self.a[2] * p[0] + self.a[4] * p[1] + self.a[5] * p[2],
        ];
        vec3::dot(ap, p) + 2.0 * vec3::dot(self.b, p) + self.c
    }

    /// Minimizer of the quadric, when A is well conditioned.
    fn optimum(&self) -> Option<[f64; 3]> {
        let m = [
            [self.a[0], self.a[1], self.a[2]],
            [self.a[1], self.a[3], self.a[4]],
            [self.a[2], self.a[4], self.a[5]],
        ];
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        let scale = m.iter().flatten().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if det.abs() <= 1e-10 * scale.powi(3).max(1e-300) {
            return None;
        }
        let rhs = [-self.b[0], -self.b[1], -self.b[2]];
        let inv_det = 1.0 / det;
        let x = [
            rhs[0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (rhs[1] * m[2][2] - m[1][2] * rhs[2])
                + m[0][2] * (rhs[1] * m[2][1] - m[1][1] * rhs[2]),
            m[0][0] * (rhs[1] * m[2][2] - m[1][2] * rhs[2])
                - rhs[0] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * rhs[2] - rhs[1] * m[2][0]),
            m[0][0] * (m[1][1] * rhs[2] - rhs[1] * m[2][1])
                - m[0][1] * (m[1][0] * rhs[2] - rhs[1] * m[2][0])
                + rhs[0] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]),
        ];
        Some(vec3::scale(x, inv_det))
    }
}

#[derive(PartialEq)]
struct HeapEntry {
    cost: f64,
    u: usize,
    v: usize,
    ver_u: u32,
    ver_v: u32,
    position: [f64; 3],
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap by (cost, u, v); BinaryHeap is a max-heap, so reverse.
        other
            .cost
            .partial_cmp(&self.cost)
            .unwrap_or(Ordering::Equal)
            .then(other.u.cmp(&self.u))
            .then(other.v.cmp(&self.v))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Decimate to `target_faces` by quadric-error edge collapse.
///
/// Returns an error when topology constraints stall the collapse loop more
/// than 2% above the target. Meshes at or below the target pass through.
pub fn decimate<T: Real>(mesh: &TriMesh<T>, target_faces: usize) -> Result<TriMesh<T>> {
    if target_faces < 4 {
        return Err(Error::InvalidArgument(
            "target face count must be at least 4".into(),
        ));
    }
    if mesh.faces.len() <= target_faces {
        return Ok(mesh.clone());
    }

    let mut verts: Vec<[f64; 3]> = mesh
        .vertices
        .iter()
        .map(|v| [v[0].f64(), v[1].f64(), v[2].f64()])
        .collect();
    let mut faces: Vec<[usize; 3]> = mesh.faces.clone();
    let mut face_alive = vec![true; faces.len()];
    let mut vert_alive = vec![true; verts.len()];
    let mut vert_faces: Vec<Vec<usize>> = vec![Vec::new(); verts.len()];
    for (f, tri) in faces.iter().enumerate() {
        for &i in tri {
            vert_faces[i].push(f);
        }
    }

    let mut quadrics = vec![Quadric::default(); verts.len()];
    for tri in &faces {
        let (a, b, c) = (verts[tri[0]], verts[tri[1]], verts[tri[2]]);
        let n2 = vec3::cross(vec3::sub(b, a), vec3::sub(c, a));
        let area = vec3::norm(n2) * 0.5;
        if area <= 0.0 {
            continue;
        }
        let n = vec3::scale(n2, 1.0 / (2.0 * area));
        let d = -vec3::dot(n, a);
        let q = Quadric::from_plane(n, d, area);
        for &i in tri {
            quadrics[i].add(&q);
        }
    }

    let mut versions = vec![0u32; verts.len()];
    let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::new();

    let push_edge = |heap: &mut BinaryHeap<HeapEntry>,
                     quadrics: &[Quadric],
                     verts: &[[f64; 3]],
                     versions: &[u32],
                     u: usize,
                     v: usize| {
        let (u, v) = (u.min(v), u.max(v));
        let mut q = quadrics[u];
        q.add(&quadrics[v]);
        let mid = vec3::scale(vec3::add(verts[u], verts[v]), 0.5);
        let mut best_p = mid;
        let mut best_c = q.eval(mid);
        for cand in [q.optimum(), Some(verts[u]), Some(verts[v])].into_iter().flatten() {
            let c = q.eval(cand);
            if c < best_c {
                best_c = c;
                best_p = cand;
            }
        }
        heap.push(HeapEntry {
            cost: best_c.max(0.0),
            u,
            v,
            ver_u: versions[u],
            ver_v: versions[v],
            position: best_p,
        });
    };

    let mut edges: HashSet<(usize, usize)> = HashSet::new();
    for tri in &faces {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            edges.insert((a.min(b), a.max(b)));
        }
    }
    let mut sorted_edges: Vec<(usize, usize)> = edges.into_iter().collect();
    sorted_edges.sort_unstable();
    for (u, v) in sorted_edges {
        push_edge(&mut heap, &quadrics, &verts, &versions, u, v);
    }

    let mut live_faces = faces.len();

    let neighbors = |vert_faces: &Vec<Vec<usize>>,
                     faces: &Vec<[usize; 3]>,
                     face_alive: &Vec<bool>,
                     u: usize|
     -> Vec<usize> {
        let mut out = Vec::new();
        for &f in &vert_faces[u] {
            if !face_alive[f] {
                continue;
            }
            for &w in &faces[f] {
                if w != u {
                    out.push(w);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    };

    while live_faces > target_faces {
        let Some(entry) = heap.pop() else { break };
        let (u, v) = (entry.u, entry.v);
        if !vert_alive[u]
            || !vert_alive[v]
            || versions[u] != entry.ver_u
            || versions[v] != entry.ver_v
        {
            continue;
        }

        // Shared faces along the edge; link condition: shared one-ring
        // vertices must all belong to those faces.
        let shared: Vec<usize> = vert_faces[u]
            .iter()
            .copied()
            .filter(|&f| face_alive[f] && faces[f].contains(&v))
            .collect();
        if shared.is_empty() {
            continue;
        }
        let nu = neighbors(&vert_faces, &faces, &face_alive, u);
        let nv = neighbors(&vert_faces, &faces, &face_alive, v);
        let common: Vec<usize> = nu.iter().copied().filter(|w| nv.contains(w)).collect();
        let mut ring_of_shared: Vec<usize> = shared
            .iter()
            .flat_map(|&f| faces[f].iter().copied())
            .filter(|&w| w != u && w != v)
            .collect();
        ring_of_shared.sort_unstable();
        ring_of_shared.dedup();
        if common != ring_of_shared {
            continue;
        }

        // Reject collapses that flip a surviving face.
        let p_new = entry.position;
        let mut flips = false;
        for &w in &[u, v] {
            for &f in &vert_faces[w] {
                if !face_alive[f] || shared.contains(&f) {
                    continue;
                }
                let tri = faces[f];
                let pos_of = |i: usize, moved: bool| -> [f64; 3] {
                    if moved && (i == u || i == v) {
                        p_new
                    } else {
                        verts[i]
                    }
                };
                let n_before = vec3::cross(
                    vec3::sub(pos_of(tri[1], false), pos_of(tri[0], false)),
                    vec3::sub(pos_of(tri[2], false), pos_of(tri[0], false)),
                );
                let n_after = vec3::cross(
                    vec3::sub(pos_of(tri[1], true), pos_of(tri[0], true)),
                    vec3::sub(pos_of(tri[2], true), pos_of(tri[0], true)),
                );
                if vec3::dot(n_before, n_after) <= 0.0 || vec3::norm(n_after) < 1e-14 {
                    flips = true;
                    break;
                }
            }
            if flips {
                break;
            }
        }
        if flips {
            continue;
        }

        // Collapse v into u at the optimal position.
        verts[u] = p_new;
        vert_alive[v] = false;
        for &f in &shared {
            if face_alive[f] {
                face_alive[f] = false;
                live_faces -= 1;
            }
        }
        let v_faces = std::mem::take(&mut vert_faces[v]);
        for f in v_faces {
            if !face_alive[f] {
                continue;
            }
            for slot in faces[f].iter_mut() {
                if *slot == v {
                    *slot = u;
                }
            }
            vert_faces[u].push(f);
        }
        let mut qu = quadrics[u];
        qu.add(&quadrics[v]);
        quadrics[u] = qu;
        versions[u] += 1;

        for w in neighbors(&vert_faces, &faces, &face_alive, u) {
            push_edge(&mut heap, &quadrics, &verts, &versions, u, w);
        }
    }

    if live_faces > target_faces + target_faces / 50 {
        return Err(Error::InvalidArgument(format!(
            "decimation stalled at {live_faces} faces (target {target_faces})"
        )));
    }

    let out_faces: Vec<[usize; 3]> = faces
        .iter()
        .zip(&face_alive)
        .filter(|(_, &alive)| alive)
        .map(|(&t, _)| t)
        .collect();
    let out = TriMesh {
        vertices: verts
            .iter()
            .map(|v| [T::of(v[0]), T::of(v[1]), T::of(v[2])])
            .collect(),
        faces: out_faces,
        labels: mesh.labels.clone(),
        scalars: mesh.scalars.clone(),
    };
    Ok(crate::repair::compact_vertices(&out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::icosphere;

    #[test]
    fn sphere_to_500_faces() {
        let mesh = icosphere::<f64>(1.0, 4); // 5120 faces
        let out = decimate(&mesh, 500).unwrap();
        assert!(
            (out.faces.len() as i64 - 500).unsigned_abs() <= 10,
            "faces {}",
            out.faces.len()
        );
        assert!(out.is_watertight());
        // Shape preserved: vertices remain near the unit sphere.
        for v in &out.vertices {
            let r = vec3::norm(*v);
            assert!((r - 1.0).abs() < 0.05, "r {r}");
        }
    }

    #[test]
    fn already_small_mesh_passes_through() {
        let mesh = icosphere::<f64>(1.0, 1);
        let out = decimate(&mesh, 200).unwrap();
        assert_eq!(out.faces.len(), mesh.faces.len());
    }
}
