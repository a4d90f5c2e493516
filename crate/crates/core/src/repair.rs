//! Basic mesh repair: vertex welding, degenerate-face removal, component
//! filtering, unused-vertex compaction.

use std::collections::HashMap;

use crate::mesh::DEGENERATE_AREA_TOL;
use crate::vec3;
use crate::{Real, TriMesh};

/// Weld vertices closer than `tol` (absolute) by snapping to a grid of that
/// pitch; face indices are remapped, attributes follow the kept vertex.
pub fn weld_vertices<T: Real>(mesh: &TriMesh<T>, tol: T) -> TriMesh<T> {
    if tol <= T::zero() {
        return mesh.clone();
    }
    let inv = T::one() / tol;
    let mut cell_to_kept: HashMap<(i64, i64, i64), usize> = HashMap::new();
    let mut remap = vec![usize::MAX; mesh.vertices.len()];
    let mut vertices = Vec::new();
    let mut labels = mesh.labels.as_ref().map(|_| Vec::new());
    let mut scalars = mesh.scalars.as_ref().map(|_| Vec::new());
    for (i, &v) in mesh.vertices.iter().enumerate() {
        let key = (
            (v[0] * inv).round().to_f64().unwrap() as i64,
            (v[1] * inv).round().to_f64().unwrap() as i64,
            (v[2] * inv).round().to_f64().unwrap() as i64,
        );
        let idx = *cell_to_kept.entry(key).or_insert_with(|| {
            vertices.push(v);
            if let (Some(ls), Some(src)) = (&mut labels, &mesh.labels) {
                ls.push(src[i]);
            }
            if let (Some(ss), Some(src)) = (&mut scalars, &mesh.scalars) {
                ss.push(src[i]);
            }
            vertices.len() - 1
        });
        remap[i] = idx;
    }
    let faces = mesh
        .faces
        .iter()
        .map(|&[a, b, c]| [remap[a], remap[b], remap[c]])
        .filter(|&[a, b, c]| a != b && b != c && a != c)
        .collect();
    TriMesh {
        vertices,
        faces,
        labels,
        scalars,
    }
}

/// Drop faces whose area is at or below the degeneracy tolerance.
pub fn remove_degenerate_faces<T: Real>(mesh: &TriMesh<T>) -> TriMesh<T> {
    let mut out = mesh.clone();
    out.faces = (0..mesh.faces.len())
        .filter(|&f| mesh.face_area(f).f64() > DEGENERATE_AREA_TOL)
        .map(|f| mesh.faces[f])
        .collect();
    out
}

/// Keep only the largest face-connected component, ranked by absolute
/// enclosed volume with total area as tie-break.
pub fn largest_component<T: Real>(mesh: &TriMesh<T>) -> TriMesh<T> {
    let (comp, n_comp) = mesh.face_components();
    if n_comp <= 1 {
        return mesh.clone();
    }
    let mut volume = vec![T::zero(); n_comp];
    let mut area = vec![T::zero(); n_comp];
    let sixth = T::of(1.0 / 6.0);
    for (f, &[a, b, c]) in mesh.faces.iter().enumerate() {
        let (pa, pb, pc) = (mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]);
        volume[comp[f]] += vec3::dot(pa, vec3::cross(pb, pc)) * sixth;
        area[comp[f]] += mesh.face_area(f);
    }
    let mut best = 0;
    for i in 1..n_comp {
        let key = (volume[i].abs(), area[i]);
        let best_key = (volume[best].abs(), area[best]);
        if key > best_key {
            best = i;
        }
    }
    let mut out = mesh.clone();
    out.faces = mesh
        .faces
        .iter()
        .enumerate()
        .filter(|&(f, _)| comp[f] == best)
        .map(|(_, &t)| t)
        .collect();
    compact_vertices(&out)
}

/// Drop vertices referenced by no face and remap indices.
pub fn compact_vertices<T: Real>(mesh: &TriMesh<T>) -> TriMesh<T> {
    let mut used = vec![false; mesh.vertices.len()];
    for tri in &mesh.faces {
        for &i in tri {
            used[i] = true;
        }
    }
    let mut remap = vec![usize::MAX; mesh.vertices.len()];
    let mut vertices = Vec::new();
    let mut labels = mesh.labels.as_ref().map(|_| Vec::new());
    let mut scalars = mesh.scalars.as_ref().map(|_| Vec::new());
    for i in 0..mesh.vertices.len() {
        if used[i] {
            remap[i] = vertices.len();
            vertices.push(mesh.vertices[i]);
            if let (Some(ls), Some(src)) = (&mut labels, &mesh.labels) {
                ls.push(src[i]);
            }
            if let (Some(ss), Some(src)) = (&mut scalars, &mesh.scalars) {
                ss.push(src[i]);
            }
        }
    }
    let faces = mesh
        .faces
        .iter()
        .map(|&[a, b, c]| [remap[a], remap[b], remap[c]])
        .collect();
    TriMesh {
        vertices,
        faces,
        labels,
        scalars,
    }
}
