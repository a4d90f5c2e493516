//! Exact k-nearest-neighbor queries over 3D point sets.
//!
//! A median-split kd-tree, branch-and-bound query. Ordering is by
//! (squared distance, index), so ties always resolve to the lower index and
//! results match a brute-force scan exactly.

use rayon::prelude::*;

use crate::vec3;
use crate::{Error, Real, Result};

#[derive(Clone, Debug)]
struct Node {
    /// Index into the point array.
    point: usize,
    axis: usize,
    left: i32,
    right: i32,
}

/// Static kd-tree over a borrowed-by-value copy of the points.
#[derive(Clone, Debug)]
pub struct KdTree<T: Real> {
    points: Vec<[T; 3]>,
    nodes: Vec<Node>,
    root: i32,
}

impl<T: Real> KdTree<T> {
    pub fn build(points: &[[T; 3]]) -> Self {
        let mut ids: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let root = Self::build_rec(points, &mut ids, 0, &mut nodes);
        KdTree {
            points: points.to_vec(),
            nodes,
            root,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> [T; 3] {
        self.points[i]
    }

    fn build_rec(points: &[[T; 3]], ids: &mut [usize], depth: usize, nodes: &mut Vec<Node>) -> i32 {
        if ids.is_empty() {
            return -1;
        }
        let axis = depth % 3;
        let mid = ids.len() / 2;
        ids.select_nth_unstable_by(mid, |&a, &b| {
            points[a][axis]
                .partial_cmp(&points[b][axis])
                .unwrap()
                .then(a.cmp(&b))
        });
        let point = ids[mid];
        let node_id = nodes.len() as i32;
        nodes.push(Node {
            point,
            axis,
            left: -1,
            right: -1,
        });
        let (lo, rest) = ids.split_at_mut(mid);
        let hi = &mut rest[1..];
        let left = Self::build_rec(points, lo, depth + 1, nodes);
        let right = Self::build_rec(points, hi, depth + 1, nodes);
        nodes[node_id as usize].left = left;
        nodes[node_id as usize].right = right;
        node_id
    }

    /// Indices of the k nearest points, closest first; ties by lower index.
    pub fn nearest_k(&self, query: [T; 3], k: usize) -> Vec<(usize, T)> {
        let mut best: Vec<(T, usize)> = Vec::with_capacity(k + 1);
        self.search(self.root, query, k, &mut best);
        best.into_iter().map(|(d, i)| (i, d)).collect()
    }

    /// Index and squared distance of the single nearest point.
    pub fn nearest_one(&self, query: [T; 3]) -> Option<(usize, T)> {
        self.nearest_k(query, 1).into_iter().next()
    }

    /// All points with squared distance <= r2, unordered.
    pub fn within_radius2(&self, query: [T; 3], r2: T) -> Vec<usize> {
        let mut out = Vec::new();
        self.radius_rec(self.root, query, r2, &mut out);
        out
    }

    fn radius_rec(&self, node: i32, query: [T; 3], r2: T, out: &mut Vec<usize>) {
        if node < 0 {
            return;
        }
        let n = &self.nodes[node as usize];
        let p = self.points[n.point];
        if vec3::dist2(query, p) <= r2 {
            out.push(n.point);
        }
        let delta = query[n.axis] - p[n.axis];
        let (near, far) = if delta < T::zero() {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        self.radius_rec(near, query, r2, out);
        if delta * delta <= r2 {
            self.radius_rec(far, query, r2, out);
        }
    }

    fn search(&self, node: i32, query: [T; 3], k: usize, best: &mut Vec<(T, usize)>) {
        if node < 0 {
            return;
        }
        let n = &self.nodes[node as usize];
        let p = self.points[n.point];
        let d2 = vec3::dist2(query, p);
        let candidate = (d2, n.point);
        if best.len() < k {
            let pos = best.partition_point(|&(bd, bi)| (bd, bi) < candidate);
            best.insert(pos, candidate);
        } else if let Some(&worst) = best.last() {
            if candidate < worst {
                let pos = best.partition_point(|&(bd, bi)| (bd, bi) < candidate);
                best.insert(pos, candidate);
                best.pop();
            }
        }
        let delta = query[n.axis] - p[n.axis];
        let (near, far) = if delta < T::zero() {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        self.search(near, query, k, best);
        // The far side can still hold a winner when the splitting plane is
        // closer than the current k-th distance (or we have fewer than k).
        let need_far = best.len() < k || delta * delta <= best.last().unwrap().0;
        if need_far {
            self.search(far, query, k, best);
        }
    }
}

/// Exact k nearest reference indices for every query point.
///
/// Ties are broken by the lower reference index so results are deterministic
/// and match a brute-force scan.
pub fn knn<T: Real>(
    query: &[[T; 3]],
    reference: &[[T; 3]],
    k: usize,
) -> Result<Vec<Vec<usize>>> {
    if reference.is_empty() {
        return Err(Error::EmptyReference);
    }
    if k > reference.len() {
        return Err(Error::KTooLarge {
            k,
            size: reference.len(),
        });
    }
    let tree = KdTree::build(reference);
    Ok(query
        .par_iter()
        .map(|&q| tree.nearest_k(q, k).into_iter().map(|(i, _)| i).collect())
        .collect())
}

/// Brute-force reference implementation; used by callers as an oracle.
pub fn knn_brute_force<T: Real>(query: &[[T; 3]], reference: &[[T; 3]], k: usize) -> Vec<Vec<usize>> {
    query
        .iter()
        .map(|&q| {
            let mut order: Vec<(T, usize)> = reference
                .iter()
                .enumerate()
                .map(|(i, &r)| (vec3::dist2(q, r), i))
                .collect();
            order.sort_by(|a, b| a.partial_cmp(b).unwrap());
            order.into_iter().take(k).map(|(_, i)| i).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Pcg32;

    #[test]
    fn line_of_points() {
        let reference = vec![[1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [3.0, 0.0, 0.0]];
        let res = knn(&[[0.0, 0.0, 0.0]], &reference, 2).unwrap();
        assert_eq!(res[0], vec![0, 1]);
    }

    #[test]
    fn query_on_reference_point() {
        let reference = vec![[1.0, 1.0, 1.0], [5.0, 5.0, 5.0]];
        let res = knn(&[[5.0, 5.0, 5.0]], &reference, 1).unwrap();
        assert_eq!(res[0], vec![1]);
    }

    #[test]
    fn empty_reference_rejected() {
        let err = knn::<f64>(&[[0.0; 3]], &[], 1).unwrap_err();
        assert!(matches!(err, Error::EmptyReference));
    }

    #[test]
    fn matches_brute_force_on_random_points() {
        let mut rng = Pcg32::seeded(99);
        let pt = |rng: &mut Pcg32| {
            [
                rng.next_f64() * 10.0 - 5.0,
                rng.next_f64() * 10.0 - 5.0,
                rng.next_f64() * 10.0 - 5.0,
            ]
        };
        let reference: Vec<[f64; 3]> = (0..100).map(|_| pt(&mut rng)).collect();
        let query: Vec<[f64; 3]> = (0..40).map(|_| pt(&mut rng)).collect();
        let fast = knn(&query, &reference, 10).unwrap();
        let slow = knn_brute_force(&query, &reference, 10);
        assert_eq!(fast, slow);
    }

    #[test]
    fn matches_brute_force_over_many_configurations() {
        // 1000 random configurations of varying size and k.
        let mut rng = Pcg32::seeded(2024);
        for config in 0..1000 {
            let n_ref = 3 + rng.next_below(12);
            let n_query = 1 + rng.next_below(4);
            let k = 1 + rng.next_below(n_ref);
            let pt = |rng: &mut Pcg32| {
                [
                    rng.next_f64() * 4.0 - 2.0,
                    rng.next_f64() * 4.0 - 2.0,
                    rng.next_f64() * 4.0 - 2.0,
                ]
            };
            let reference: Vec<[f64; 3]> = (0..n_ref).map(|_| pt(&mut rng)).collect();
            let query: Vec<[f64; 3]> = (0..n_query).map(|_| pt(&mut rng)).collect();
            let fast = knn(&query, &reference, k).unwrap();
            let slow = knn_brute_force(&query, &reference, k);
            assert_eq!(fast, slow, "configuration {config}");
        }
    }

    #[test]
    fn tie_break_by_lower_index() {
        // Two reference points at identical coordinates.
        let reference = vec![[1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        let res = knn(&[[0.0; 3]], &reference, 2).unwrap();
        assert_eq!(res[0], vec![0, 1]);
    }

    #[test]
    fn radius_query_exact() {
        let mut rng = Pcg32::seeded(3);
        let reference: Vec<[f64; 3]> = (0..200)
            .map(|_| [rng.next_f64(), rng.next_f64(), rng.next_f64()])
            .collect();
        let tree = KdTree::build(&reference);
        let q = [0.5, 0.5, 0.5];
        let r2 = 0.09;
        let mut got = tree.within_radius2(q, r2);
        got.sort_unstable();
        let expect: Vec<usize> = (0..reference.len())
            .filter(|&i| vec3::dist2(q, reference[i]) <= r2)
            .collect();
        assert_eq!(got, expect);
    }
}
