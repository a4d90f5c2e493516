//! Bounding-volume hierarchy over triangles: exact closest-point queries and
//! a hierarchically accelerated generalized winding number.
//!
//! The winding number uses the exact van Oosterom-Strackee solid angle for
//! nearby triangles and an area-weighted dipole approximation for far
//! clusters, so inside/outside classification stays robust on meshes with
//! slightly inconsistent winding.

use crate::vec3;
use crate::{Real, TriMesh};

#[derive(Clone, Debug)]
struct BvhNode<T: Real> {
    aabb_lo: [T; 3],
    aabb_hi: [T; 3],
    /// Area-weighted normal sum over the subtree (one half of the cross sums).
    area_normal: [T; 3],
    /// Area-weighted centroid of the subtree.
    centroid: [T; 3],
    /// Radius of the subtree around `centroid`.
    radius: T,
    /// Leaf: [start, end) into `tri_ids`. Inner: children indices.
    left: u32,
    right: u32,
    leaf: bool,
}

pub struct TriBvh<T: Real> {
    nodes: Vec<BvhNode<T>>,
    tri_ids: Vec<u32>,
    tris: Vec<[[T; 3]; 3]>,
}

const LEAF_SIZE: usize = 8;
/// Far-field acceptance factor for the dipole approximation.
const WINDING_BETA: f64 = 2.0;

impl<T: Real> TriBvh<T> {
    pub fn build(mesh: &TriMesh<T>) -> Self {
        let tris: Vec<[[T; 3]; 3]> = (0..mesh.faces.len()).map(|f| mesh.face_positions(f)).collect();
        let centroids: Vec<[T; 3]> = tris
            .iter()
            .map(|t| vec3::scale(vec3::add(vec3::add(t[0], t[1]), t[2]), T::of(1.0 / 3.0)))
            .collect();
        let mut tri_ids: Vec<u32> = (0..tris.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * tris.len() / LEAF_SIZE + 2);
        if !tris.is_empty() {
            Self::build_rec(&tris, &centroids, &mut tri_ids, 0, tris.len(), &mut nodes);
        }
        TriBvh { nodes, tri_ids, tris }
    }

    fn build_rec(
        tris: &[[[T; 3]; 3]],
        centroids: &[[T; 3]],
        tri_ids: &mut [u32],
        start: usize,
        end: usize,
        nodes: &mut Vec<BvhNode<T>>,
    ) -> u32 {
        let mut lo = [T::infinity(); 3];
        let mut hi = [T::neg_infinity(); 3];
        let mut area_normal = [T::zero(); 3];
        let mut weighted = [T::zero(); 3];
        let mut area_sum = T::zero();
        for &id in &tri_ids[start..end] {
            let t = &tris[id as usize];
            for v in t {
                for d in 0..3 {
                    lo[d] = lo[d].min(v[d]);
                    hi[d] = hi[d].max(v[d]);
                }
            }
            let n2 = vec3::cross(vec3::sub(t[1], t[0]), vec3::sub(t[2], t[0]));
            area_normal = vec3::add_scaled(area_normal, n2, T::of(0.5));
            let area = vec3::norm(n2) * T::of(0.5);
            weighted = vec3::add_scaled(weighted, centroids[id as usize], area);
            area_sum += area;
        }
        let centroid = if area_sum > T::zero() {
            vec3::scale(weighted, T::one() / area_sum)
        } else {
            vec3::scale(vec3::add(lo, hi), T::of(0.5))
        };
        let mut radius = T::zero();
        for &id in &tri_ids[start..end] {
            for v in &tris[id as usize] {
                radius = radius.max(vec3::dist(centroid, *v));
            }
        }
        let node_id = nodes.len() as u32;
        nodes.push(BvhNode {
            aabb_lo: lo,
            aabb_hi: hi,
            area_normal,
            centroid,
            radius,
            left: start as u32,
            right: end as u32,
            leaf: true,
        });
        if end - start > LEAF_SIZE {
            // Median split along the widest axis; index tie-break keeps the
            // permutation deterministic.
            let mut axis = 0;
            for d in 1..3 {
                if hi[d] - lo[d] > hi[axis] - lo[axis] {
                    axis = d;
                }
            }
            let mid = (start + end) / 2;
            tri_ids[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                centroids[a as usize][axis]
                    .partial_cmp(&centroids[b as usize][axis])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let left = Self::build_rec(tris, centroids, tri_ids, start, mid, nodes);
            let right = Self::build_rec(tris, centroids, tri_ids, mid, end, nodes);
            let n = &mut nodes[node_id as usize];
            n.left = left;
            n.right = right;
            n.leaf = false;
        }
        node_id
    }

    fn aabb_dist2(lo: [T; 3], hi: [T; 3], p: [T; 3]) -> T {
        let mut d2 = T::zero();
        for d in 0..3 {
            let v = if p[d] < lo[d] {
                lo[d] - p[d]
            } else if p[d] > hi[d] {
                p[d] - hi[d]
            } else {
                T::zero()
            };
            d2 += v * v;
        }
        d2
    }

    /// Unsigned distance from `p` to the surface.
    pub fn distance(&self, p: [T; 3]) -> T {
        self.closest(p).1.sqrt()
    }

    /// (triangle id, squared distance) of the closest surface point.
    pub fn closest(&self, p: [T; 3]) -> (usize, T) {
        let mut best = (usize::MAX, T::infinity());
        if !self.nodes.is_empty() {
            self.closest_rec(0, p, &mut best);
        }
        best
    }

    fn closest_rec(&self, node: u32, p: [T; 3], best: &mut (usize, T)) {
        let n = &self.nodes[node as usize];
        if Self::aabb_dist2(n.aabb_lo, n.aabb_hi, p) >= best.1 {
            return;
        }
        if n.leaf {
            for &id in &self.tri_ids[n.left as usize..n.right as usize] {
                let t = &self.tris[id as usize];
                let q = closest_point_on_triangle(p, t[0], t[1], t[2]);
                let d2 = vec3::dist2(p, q);
                if d2 < best.1 || (d2 == best.1 && (id as usize) < best.0) {
                    *best = (id as usize, d2);
                }
            }
            return;
        }
        let dl = Self::aabb_dist2(
            self.nodes[n.left as usize].aabb_lo,
            self.nodes[n.left as usize].aabb_hi,
            p,
        );
        let dr = Self::aabb_dist2(
            self.nodes[n.right as usize].aabb_lo,
            self.nodes[n.right as usize].aabb_hi,
            p,
        );
        if dl <= dr {
            self.closest_rec(n.left, p, best);
            self.closest_rec(n.right, p, best);
        } else {
            self.closest_rec(n.right, p, best);
            self.closest_rec(n.left, p, best);
        }
    }

    /// Generalized winding number of the surface seen from `p`
    /// (approximately 1 inside a watertight mesh, 0 outside).
    pub fn winding_number(&self, p: [T; 3]) -> T {
        if self.nodes.is_empty() {
            return T::zero();
        }
        let four_pi = T::of(4.0 * std::f64::consts::PI);
        self.winding_rec(0, p) / four_pi
    }

    fn winding_rec(&self, node: u32, p: [T; 3]) -> T {
        let n = &self.nodes[node as usize];
        let to_c = vec3::sub(n.centroid, p);
        let dist = vec3::norm(to_c);
        if dist > T::of(WINDING_BETA) * n.radius && dist > T::zero() {
            // Dipole: area vector dotted with the direction kernel.
            return vec3::dot(n.area_normal, to_c) / (dist * dist * dist);
        }
        if n.leaf {
            let mut omega = T::zero();
            for &id in &self.tri_ids[n.left as usize..n.right as usize] {
                let t = &self.tris[id as usize];
                omega += solid_angle(p, t[0], t[1], t[2]);
            }
            return omega;
        }
        self.winding_rec(n.left, p) + self.winding_rec(n.right, p)
    }

    /// Exact (non-hierarchical) winding number; the test oracle.
    pub fn winding_number_exact(&self, p: [T; 3]) -> T {
        let four_pi = T::of(4.0 * std::f64::consts::PI);
        let omega = self
            .tris
            .iter()
            .fold(T::zero(), |acc, t| acc + solid_angle(p, t[0], t[1], t[2]));
        omega / four_pi
    }
}

/// Signed solid angle of triangle (a, b, c) seen from `p`
/// (van Oosterom & Strackee).
pub fn solid_angle<T: Real>(p: [T; 3], a: [T; 3], b: [T; 3], c: [T; 3]) -> T {
    let a = vec3::sub(a, p);
    let b = vec3::sub(b, p);
    let c = vec3::sub(c, p);
    let la = vec3::norm(a);
    let lb = vec3::norm(b);
    let lc = vec3::norm(c);
    let numerator = vec3::dot(a, vec3::cross(b, c));
    let denominator =
        la * lb * lc + vec3::dot(a, b) * lc + vec3::dot(b, c) * la + vec3::dot(c, a) * lb;
    T::of(2.0) * numerator.atan2(denominator)
}

/// Closest point on triangle (a, b, c) to `p` (Ericson, Real-Time Collision
/// Detection, 5.1.5).
pub fn closest_point_on_triangle<T: Real>(p: [T; 3], a: [T; 3], b: [T; 3], c: [T; 3]) -> [T; 3] {
    let ab = vec3::sub(b, a);
    let ac = vec3::sub(c, a);
    let ap = vec3::sub(p, a);
    let d1 = vec3::dot(ab, ap);
    let d2 = vec3::dot(ac, ap);
    if d1 <= T::zero() && d2 <= T::zero() {
        return a;
    }
    let bp = vec3::sub(p, b);
    let d3 = vec3::dot(ab, bp);
    let d4 = vec3::dot(ac, bp);
    if d3 >= T::zero() && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= T::zero() && d1 >= T::zero() && d3 <= T::zero() {
        let v = d1 / (d1 - d3);
        return vec3::add_scaled(a, ab, v);
    }
    let cp = vec3::sub(p, c);
    let d5 = vec3::dot(ab, cp);
    let d6 = vec3::dot(ac, cp);
    if d6 >= T::zero() && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= T::zero() && d2 >= T::zero() && d6 <= T::zero() {
        let w = d2 / (d2 - d6);
        return vec3::add_scaled(a, ac, w);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= T::zero() && (d4 - d3) >= T::zero() && (d5 - d6) >= T::zero() {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return vec3::add_scaled(b, vec3::sub(c, b), w);
    }
    let denominator = T::one() / (va + vb + vc);
    let v = vb * denominator;
    let w = vc * denominator;
    vec3::add(vec3::add_scaled(a, ab, v), vec3::scale(ac, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{box_mesh, icosphere};
    use crate::Pcg32;

    #[test]
    fn closest_point_cases() {
        let (a, b, c) = ([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        // Above the interior projects onto the plane.
        let q = closest_point_on_triangle([0.2, 0.2, 1.0], a, b, c);
        assert!(vec3::dist(q, [0.2, 0.2, 0.0]) < 1e-12);
        // Beyond a vertex clamps to the vertex.
        let q = closest_point_on_triangle([-1.0, -1.0, 0.0], a, b, c);
        assert!(vec3::dist(q, a) < 1e-12);
        // Beyond an edge clamps to the edge.
        let q = closest_point_on_triangle([0.5, -1.0, 0.0], a, b, c);
        assert!(vec3::dist(q, [0.5, 0.0, 0.0]) < 1e-12);
    }

    #[test]
    fn sphere_distances() {
        let mesh = icosphere::<f64>(1.0, 4);
        let bvh = TriBvh::build(&mesh);
        assert!((bvh.distance([0.0; 3]) - 1.0).abs() < 2e-3);
        assert!((bvh.distance([2.0, 0.0, 0.0]) - 1.0).abs() < 2e-3);
    }

    #[test]
    fn winding_inside_outside() {
        let mesh = icosphere::<f64>(1.0, 3);
        let bvh = TriBvh::build(&mesh);
        assert!((bvh.winding_number([0.0; 3]) - 1.0).abs() < 0.05);
        assert!(bvh.winding_number([3.0, 0.0, 0.0]).abs() < 0.05);
        let cube = box_mesh::<f64>([-1.0; 3], [1.0; 3]);
        let bvh = TriBvh::build(&cube);
        assert!((bvh.winding_number([0.0, 0.0, 0.0]) - 1.0).abs() < 0.05);
        assert!(bvh.winding_number([0.0, 0.0, 5.0]).abs() < 0.05);
        assert!((bvh.winding_number_exact([0.0, 0.0, 0.0]) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fast_winding_classifies_like_exact() {
        // The dipole far field carries percent-level error, which is far
        // below the 0.5 classification margin the SDF sign relies on.
        let mesh = icosphere::<f64>(1.0, 3);
        let bvh = TriBvh::build(&mesh);
        let mut rng = Pcg32::seeded(17);
        for _ in 0..300 {
            let p = [
                rng.next_f64() * 4.0 - 2.0,
                rng.next_f64() * 4.0 - 2.0,
                rng.next_f64() * 4.0 - 2.0,
            ];
            let fast = bvh.winding_number(p);
            let exact = bvh.winding_number_exact(p);
            assert!(
                (fast - exact).abs() < 0.05,
                "fast {fast} vs exact {exact} at {p:?}"
            );
            if (exact - 0.5).abs() > 0.1 {
                assert_eq!(fast > 0.5, exact > 0.5, "classification flip at {p:?}");
            }
        }
    }
}
