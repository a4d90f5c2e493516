//! Area-weighted uniform surface sampling.

use crate::vec3;
use crate::{Error, Pcg32, Real, Result, TriMesh};

/// A point on a mesh surface together with its face and unit normal.
#[derive(Clone, Copy, Debug)]
pub struct PointSample<T: Real> {
    pub position: [T; 3],
    pub normal: [T; 3],
    pub face: usize,
}

/// Cumulative-area table for drawing faces proportionally to their area.
pub struct AreaTable<T: Real> {
    cumulative: Vec<T>,
    total: T,
}

impl<T: Real> AreaTable<T> {
    pub fn new(mesh: &TriMesh<T>) -> Result<Self> {
        Self::with_face_filter(mesh, |_| true)
    }

    /// Restrict sampling to faces accepted by the filter; rejected faces get
    /// zero weight. Errors when no face survives.
    pub fn with_face_filter(mesh: &TriMesh<T>, keep: impl Fn(usize) -> bool) -> Result<Self> {
        if mesh.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let mut cumulative = Vec::with_capacity(mesh.faces.len());
        let mut total = T::zero();
        for f in 0..mesh.faces.len() {
            if keep(f) {
                total += mesh.face_area(f);
            }
            cumulative.push(total);
        }
        if total <= T::zero() {
            return Err(Error::InvalidArgument(
                "no positive-area face available for sampling".into(),
            ));
        }
        Ok(AreaTable { cumulative, total })
    }

    pub fn total_area(&self) -> T {
        self.total
    }

    /// Draw a face index proportionally to area.
    pub fn draw_face(&self, rng: &mut Pcg32) -> usize {
        let target = T::of(rng.next_f64()) * self.total;
        // partition_point: first face whose cumulative area exceeds target.
        self.cumulative.partition_point(|&c| c <= target).min(self.cumulative.len() - 1)
    }
}

/// Uniform barycentric coordinates via the square-root trick.
pub fn uniform_barycentric<T: Real>(rng: &mut Pcg32) -> [T; 3] {
    let su = T::of(rng.next_f64()).sqrt();
    let v = T::of(rng.next_f64());
    let a = T::one() - su;
    let b = su * (T::one() - v);
    let c = su * v;
    [a, b, c]
}

/// One sample at a given face and barycentric coordinate.
pub fn sample_at<T: Real>(mesh: &TriMesh<T>, face: usize, bary: [T; 3]) -> PointSample<T> {
    let [p0, p1, p2] = mesh.face_positions(face);
    let position = vec3::add(
        vec3::add(vec3::scale(p0, bary[0]), vec3::scale(p1, bary[1])),
        vec3::scale(p2, bary[2]),
    );
    PointSample {
        position,
        normal: mesh.face_normal(face),
        face,
    }
}

/// `n` area-weighted uniform samples; deterministic for a fixed seed.
pub fn sample_surface<T: Real>(mesh: &TriMesh<T>, n: usize, seed: u64) -> Result<Vec<PointSample<T>>> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be >= 1".into()));
    }
    let table = AreaTable::new(mesh)?;
    let mut rng = Pcg32::new(seed, 0x5a11_0b5e);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let face = table.draw_face(&mut rng);
        let bary = uniform_barycentric(&mut rng);
        out.push(sample_at(mesh, face, bary));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_triangle() -> TriMesh<f64> {
        TriMesh::new(
            vec![[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 2.0, 0.0]],
            vec![[0, 1, 2]],
        )
    }

    #[test]
    fn samples_inside_triangle_centroid_converges() {
        let mesh = single_triangle();
        let samples = sample_surface(&mesh, 1000, 7).unwrap();
        let mut mean = [0.0; 3];
        for s in &samples {
            // Inside test: barycentric coordinates of the sample are all >= 0.
            assert!(s.position[0] >= 0.0 && s.position[1] >= 0.0);
            assert!(s.position[0] + s.position[1] <= 2.0 + 1e-12);
            mean = vec3::add(mean, s.position);
        }
        mean = vec3::scale(mean, 1.0 / samples.len() as f64);
        let centroid = mesh.face_centroid(0);
        // Monte-Carlo centroid: within 5% of the bbox scale.
        assert!(vec3::dist(mean, centroid) < 0.05 * 2.0, "mean {mean:?}");
    }

    #[test]
    fn area_ratio_respected() {
        // Two triangles with area ratio 3:1.
        let mesh = TriMesh::new(
            vec![
                [0.0, 0.0, 0.0],
                [3.0, 0.0, 0.0],
                [0.0, 2.0, 0.0],
                [10.0, 0.0, 0.0],
                [11.0, 0.0, 0.0],
                [10.0, 2.0, 0.0],
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        );
        let samples = sample_surface(&mesh, 10000, 42).unwrap();
        let big = samples.iter().filter(|s| s.face == 0).count() as f64;
        let ratio = big / (samples.len() as f64 - big);
        assert!((ratio - 3.0).abs() < 0.15 * 3.0, "ratio {ratio}");
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let mesh = single_triangle();
        let a = sample_surface(&mesh, 100, 5).unwrap();
        let b = sample_surface(&mesh, 100, 5).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.position, y.position);
            assert_eq!(x.face, y.face);
        }
    }

    #[test]
    fn chi_square_two_triangle_density() {
        let mesh = TriMesh::new(
            vec![
                [0.0, 0.0, 0.0],
                [3.0, 0.0, 0.0],
                [0.0, 2.0, 0.0],
                [10.0, 0.0, 0.0],
                [11.0, 0.0, 0.0],
                [10.0, 2.0, 0.0],
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        );
        let n = 10000;
        let samples = sample_surface(&mesh, n, 11).unwrap();
        let observed0 = samples.iter().filter(|s| s.face == 0).count() as f64;
        let observed1 = n as f64 - observed0;
        let expected0 = n as f64 * 0.75;
        let expected1 = n as f64 * 0.25;
        let chi2 = (observed0 - expected0).powi(2) / expected0
            + (observed1 - expected1).powi(2) / expected1;
        // 1 dof, p = 0.01 critical value.
        assert!(chi2 < 6.635, "chi2 = {chi2}");
    }

    #[test]
    fn empty_mesh_rejected() {
        let mesh = TriMesh::<f64>::default();
        assert!(sample_surface(&mesh, 10, 0).is_err());
    }
}
