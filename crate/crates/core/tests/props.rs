use fur_core::{knn, vec3};
use proptest::prelude::*;

fn point() -> impl Strategy<Value = [f64; 3]> {
    [-50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64]
}

proptest! {
    #[test]
    fn knn_always_matches_brute_force(
        reference in proptest::collection::vec(point(), 1..40),
        query in proptest::collection::vec(point(), 1..10),
        k_seed in 0usize..40,
    ) {
        let k = 1 + k_seed % reference.len();
        let fast = knn::knn(&query, &reference, k).unwrap();
        let slow = knn::knn_brute_force(&query, &reference, k);
        prop_assert_eq!(fast, slow);
    }

    #[test]
    fn rotation_preserves_norms_and_angles(
        v in point(),
        w in point(),
        axis in point(),
        angle in -10.0..10.0f64,
    ) {
        prop_assume!(vec3::norm(axis) > 1e-6);
        let k = vec3::normalized(axis).unwrap();
        let rv = vec3::rotate_about(v, k, angle);
        let rw = vec3::rotate_about(w, k, angle);
        prop_assert!((vec3::norm(rv) - vec3::norm(v)).abs() < 1e-9 * (1.0 + vec3::norm(v)));
        prop_assert!((vec3::dot(rv, rw) - vec3::dot(v, w)).abs() < 1e-7 * (1.0 + vec3::norm(v) * vec3::norm(w)));
    }
}
