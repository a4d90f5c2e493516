//! Marching-cubes iso-surface extraction.
//!
//! Each sign-changing cell is polygonized by pairing the crossing points on
//! its faces (marching squares per face, ambiguous faces decided by the
//! bilinear face-center value), tracing the pairings into closed loops and
//! fan-triangulating. The decider depends only on the shared face's corner
//! values, so neighboring cells always agree and the output is watertight
//! whenever the iso-surface stays inside the grid. Crossing vertices sit on
//! grid edges by linear interpolation and are shared between cells.

use std::collections::HashMap;

use crate::vec3;
use crate::{Error, Real, Result, SdfGrid, TriMesh};

/// Cube corners in (dx, dy, dz) order; corner id = dx + 2*dy + 4*dz.
const CORNER: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [0, 1, 0],
    [1, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [0, 1, 1],
    [1, 1, 1],
];

/// The 12 cube edges as corner pairs.
const EDGE: [[usize; 2]; 12] = [
    [0, 1],
    [2, 3],
    [4, 5],
    [6, 7], // x-aligned
    [0, 2],
    [1, 3],
    [4, 6],
    [5, 7], // y-aligned
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7], // z-aligned
];

/// The 6 cube faces as corner quads, counter-clockwise seen from outside the
/// cube, with the edge id connecting quad corner k to k+1.
const FACE: [([usize; 4], [usize; 4]); 6] = [
    ([0, 4, 6, 2], [8, 6, 10, 4]),  // x = 0
    ([1, 3, 7, 5], [5, 11, 7, 9]),  // x = 1
    ([0, 1, 5, 4], [0, 9, 2, 8]),   // y = 0
    ([2, 6, 7, 3], [10, 3, 11, 1]), // y = 1
    ([0, 2, 3, 1], [4, 1, 5, 0]),   // z = 0
    ([4, 5, 7, 6], [2, 7, 3, 6]),   // z = 1
];

/// Extract the iso-surface of `grid` at level `iso`.
pub fn marching_cubes<T: Real>(grid: &SdfGrid<T>, iso: T) -> Result<TriMesh<T>> {
    let shifted: Vec<T> = grid.values.iter().map(|&v| v - iso).collect();
    if !has_crossing(&shifted) {
        return Err(Error::EmptySurface);
    }

    let [nx, ny, nz] = grid.dims;
    let mut vertices: Vec<[T; 3]> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();
    // Global edge key -> vertex id, so neighboring cells share vertices.
    let mut edge_vertex: HashMap<(usize, usize, usize, u8), usize> = HashMap::new();

    let value = |i: usize, j: usize, k: usize| shifted[(k * ny + j) * nx + i];

    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let corner_val: [T; 8] = std::array::from_fn(|c| {
                    value(i + CORNER[c][0], j + CORNER[c][1], k + CORNER[c][2])
                });
                let inside: [bool; 8] = std::array::from_fn(|c| corner_val[c] < T::zero());
                if inside.iter().all(|&b| b) || inside.iter().all(|&b| !b) {
                    continue;
                }
                polygonize_cell(
                    grid,
                    (i, j, k),
                    &corner_val,
                    &inside,
                    &mut vertices,
                    &mut faces,
                    &mut edge_vertex,
                );
            }
        }
    }

    if faces.is_empty() {
        return Err(Error::EmptySurface);
    }
    Ok(TriMesh::new(vertices, faces))
}

fn has_crossing<T: Real>(values: &[T]) -> bool {
    let pos = values.iter().any(|&v| v >= T::zero());
    let neg = values.iter().any(|&v| v < T::zero());
    pos && neg
}

/// Canonical key for a cell edge: lowest incident node plus axis.
fn edge_key(cell: (usize, usize, usize), edge: usize) -> (usize, usize, usize, u8) {
    let (a, b) = (EDGE[edge][0], EDGE[edge][1]);
    let na = (
        cell.0 + CORNER[a][0],
        cell.1 + CORNER[a][1],
        cell.2 + CORNER[a][2],
    );
    let nb = (
        cell.0 + CORNER[b][0],
        cell.1 + CORNER[b][1],
        cell.2 + CORNER[b][2],
    );
    let axis = if na.0 != nb.0 {
        0u8
    } else if na.1 != nb.1 {
        1
    } else {
        2
    };
    let lo = na.min(nb);
    (lo.0, lo.1, lo.2, axis)
}

fn polygonize_cell<T: Real>(
    grid: &SdfGrid<T>,
    cell: (usize, usize, usize),
    corner_val: &[T; 8],
    inside: &[bool; 8],
    vertices: &mut Vec<[T; 3]>,
    faces: &mut Vec<[usize; 3]>,
    edge_vertex: &mut HashMap<(usize, usize, usize, u8), usize>,
) {
    // Directed segment links between cell edges. A crossing at quad position
    // c is a "tail" (segment departs) when quad corner c is outside and a
    // "head" (segment arrives) when it is inside; with quads CCW from
    // outside, tracing tail -> head loops yields outward-facing polygons.
    let mut next: [i8; 12] = [-1; 12];
    for (quad, edges) in FACE {
        let ins: [bool; 4] = std::array::from_fn(|c| inside[quad[c]]);
        let crossings: Vec<usize> = (0..4).filter(|&c| ins[c] != ins[(c + 1) % 4]).collect();
        match crossings.len() {
            0 => {}
            2 => {
                let (a, b) = (crossings[0], crossings[1]);
                let (tail, head) = if ins[a] { (b, a) } else { (a, b) };
                next[edges[tail]] = edges[head] as i8;
            }
            4 => {
                // Ambiguous face: the bilinear center decides which diagonal
                // corner pair stays connected.
                let center = (corner_val[quad[0]]
                    + corner_val[quad[1]]
                    + corner_val[quad[2]]
                    + corner_val[quad[3]])
                    * T::of(0.25);
                let center_inside = center < T::zero();
                for c in 0..4 {
                    if !ins[c] {
                        // Tail at c wraps an outside corner when the center
                        // is inside (link back to c-1), an inside corner
                        // otherwise (link forward to c+1).
                        let head = if center_inside { (c + 3) % 4 } else { (c + 1) % 4 };
                        next[edges[c]] = edges[head] as i8;
                    }
                }
            }
            _ => unreachable!("a quad has 0, 2 or 4 sign crossings"),
        }
    }

    // Interpolated crossing vertex on a cell edge, shared across cells.
    let mut vertex_on = |e: usize, vertices: &mut Vec<[T; 3]>| -> usize {
        let key = edge_key(cell, e);
        *edge_vertex.entry(key).or_insert_with(|| {
            let (a, b) = (EDGE[e][0], EDGE[e][1]);
            let (va, vb) = (corner_val[a], corner_val[b]);
            let t = (va / (va - vb)).max(T::zero()).min(T::one());
            let pa = grid.node_position(
                cell.0 + CORNER[a][0],
                cell.1 + CORNER[a][1],
                cell.2 + CORNER[a][2],
            );
            let pb = grid.node_position(
                cell.0 + CORNER[b][0],
                cell.1 + CORNER[b][1],
                cell.2 + CORNER[b][2],
            );
            vertices.push(vec3::lerp(pa, pb, t));
            vertices.len() - 1
        })
    };

    // Trace the directed loops (every crossing edge is tail exactly once).
    let mut done = [false; 12];
    for start in 0..12 {
        if next[start] < 0 || done[start] {
            continue;
        }
        let mut loop_ids: Vec<usize> = Vec::with_capacity(7);
        let mut e = start;
        loop {
            done[e] = true;
            loop_ids.push(vertex_on(e, vertices));
            e = next[e] as usize;
            if e == start {
                break;
            }
        }
        for w in 1..loop_ids.len().saturating_sub(1) {
            let tri = [loop_ids[0], loop_ids[w], loop_ids[w + 1]];
            if tri[0] != tri[1] && tri[1] != tri[2] && tri[0] != tri[2] {
                faces.push(tri);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdf::build_sdf;

    #[test]
    fn sphere_level_set_radii() {
        let grid = SdfGrid::<f64>::analytic_sphere(1.0, 1.5, 64);
        let mesh = marching_cubes(&grid, 0.0).unwrap();
        mesh.validate().unwrap();
        let half_cell = grid.spacing * 0.5;
        for v in &mesh.vertices {
            let r = vec3::norm(*v);
            assert!((r - 1.0).abs() <= half_cell, "radius {r}");
        }
    }

    #[test]
    fn watertight_genus_zero_sphere() {
        let grid = SdfGrid::<f64>::analytic_sphere(1.0, 1.5, 32);
        let mesh = marching_cubes(&grid, 0.0).unwrap();
        assert!(mesh.is_watertight(), "open edges {}", mesh.open_edge_count());
        assert_eq!(mesh.euler_characteristic(), 2);
    }

    #[test]
    fn outward_orientation() {
        let grid = SdfGrid::<f64>::analytic_sphere(1.0, 1.5, 32);
        let mesh = marching_cubes(&grid, 0.0).unwrap();
        assert!(mesh.signed_volume() > 0.0);
        for f in 0..mesh.faces.len() {
            let n = mesh.face_normal(f);
            let c = mesh.face_centroid(f);
            assert!(vec3::dot(n, c) > 0.0, "face {f} points inward");
        }
    }

    #[test]
    fn all_positive_grid_is_empty_surface() {
        let grid = SdfGrid::<f64>::new([0.0; 3], 1.0, [4, 4, 4], vec![1.0; 64]).unwrap();
        assert!(matches!(marching_cubes(&grid, 0.0), Err(Error::EmptySurface)));
    }

    #[test]
    fn nonzero_iso_level() {
        let grid = SdfGrid::<f64>::analytic_sphere(1.0, 2.0, 48);
        let mesh = marching_cubes(&grid, 0.5).unwrap();
        let half_cell = grid.spacing * 0.5;
        for v in &mesh.vertices {
            assert!((vec3::norm(*v) - 1.5).abs() <= half_cell);
        }
    }

    #[test]
    fn round_trip_hausdorff_under_two_cells() {
        let mesh0 = crate::mesh::icosphere::<f64>(1.0, 3);
        let grid = build_sdf(&mesh0, 64).unwrap();
        let mesh1 = marching_cubes(&grid, 0.0).unwrap();
        // The source surface is the unit sphere, so point-to-surface distance
        // is |r - 1|; sample both directions for a brute-force Hausdorff.
        let mut worst = 0.0_f64;
        for v in &mesh1.vertices {
            worst = worst.max((vec3::norm(*v) - 1.0).abs());
        }
        let samples = crate::sample::sample_surface(&mesh0, 2000, 1).unwrap();
        let bvh = crate::bvh::TriBvh::build(&mesh1);
        for s in &samples {
            worst = worst.max(bvh.distance(s.position));
        }
        assert!(worst < 2.0 * grid.spacing, "hausdorff {worst}");
    }

    #[test]
    fn ambiguous_saddle_cells_stay_watertight() {
        // Union of two diagonal blobs hits ambiguous face configurations at
        // coarse resolution.
        let n = 24;
        let spacing = 4.0 / (n - 1) as f64;
        let mut values = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let p = [
                        -2.0 + i as f64 * spacing,
                        -2.0 + j as f64 * spacing,
                        -2.0 + k as f64 * spacing,
                    ];
                    let d1 = vec3::dist(p, [-0.55, -0.55, 0.0]) - 0.8;
                    let d2 = vec3::dist(p, [0.55, 0.55, 0.25]) - 0.8;
                    values.push(d1.min(d2));
                }
            }
        }
        let grid = SdfGrid::new([-2.0; 3], spacing, [n; 3], values).unwrap();
        let mesh = marching_cubes(&grid, 0.0).unwrap();
        assert!(mesh.is_watertight(), "open edges: {}", mesh.open_edge_count());
    }
}
