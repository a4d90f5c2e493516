//! De-furring: inward offsetting of the full-surface SDF by the locally
//! annotated fur thickness, then bald-mesh extraction.

use rayon::prelude::*;

use fur_core::{decimate, knn::KdTree, marching, repair, Grid, Mesh};

use crate::annotation::VertexAnnotation;
use crate::{Error, Result};

/// Per-grid-node shrinkage: the smoothed thickness of the nearest annotated
/// mesh vertex.
pub fn shrinkage_field(grid: &Grid, mesh: &Mesh, vertex_ann: &[VertexAnnotation]) -> Result<Vec<f64>> {
    if vertex_ann.len() != mesh.vertices.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} annotations for {} vertices",
            vertex_ann.len(),
            mesh.vertices.len()
        )));
    }
    if mesh.vertices.is_empty() {
        return Err(Error::InvalidInput("empty mesh".into()));
    }
    let tree = KdTree::build(&mesh.vertices);
    let [nx, ny, nz] = grid.dims;
    let n = nx * ny * nz;
    Ok((0..n)
        .into_par_iter()
        .map(|idx| {
            let i = idx % nx;
            let j = (idx / nx) % ny;
            let k = idx / (nx * ny);
            let p = grid.node_position(i, j, k);
            let (nearest, _) = tree.nearest_one(p).expect("non-empty tree");
            vertex_ann[nearest].thickness_cm
        })
        .collect())
}

/// SDF_defur(x) = SDF(x) + s(x), node-wise.
///
/// The result is an offset field rather than a true SDF; its zero level set
/// is the bald surface and its sign drives the penetration hinge.
pub fn defur_sdf(grid: &Grid, shrink: &[f64]) -> Result<Grid> {
    if shrink.len() != grid.values.len() {
        return Err(Error::DimensionMismatch(format!(
            "shrinkage field has {} values, grid has {}",
            shrink.len(),
            grid.values.len()
        )));
    }
    let mut out = grid.clone();
    for (v, s) in out.values.iter_mut().zip(shrink) {
        *v += *s;
    }
    Ok(out)
}

/// Zero level set of the de-furred field, repaired and decimated:
/// largest component, degenerate faces dropped, vertices welded at
/// 1e-6 x diagonal, then quadric decimation to `target_faces` (within 2%).
pub fn extract_bald_mesh(defurred: &Grid, target_faces: usize) -> Result<Mesh> {
    let raw = marching::marching_cubes(defurred, 0.0)?;
    let kept = repair::largest_component(&raw);
    let cleaned = repair::remove_degenerate_faces(&kept);
    let welded = repair::weld_vertices(&cleaned, 1e-6 * cleaned.bbox_diagonal());
    let cleaned = repair::remove_degenerate_faces(&welded);
    let compact = repair::compact_vertices(&cleaned);
    Ok(decimate::decimate(&compact, target_faces)?)
}
