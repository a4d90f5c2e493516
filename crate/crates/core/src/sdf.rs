//! Uniform signed-distance grids.

use rayon::prelude::*;

use crate::bvh::TriBvh;
use crate::vec3;
use crate::{Error, Real, Result, TriMesh};

/// Uniform voxel grid of signed distances (cm, negative inside). Values live
/// on grid nodes; trilinear interpolation is defined on the closed grid box.
#[derive(Clone, Debug)]
pub struct SdfGrid<T: Real> {
    pub origin: [T; 3],
    pub spacing: T,
    pub dims: [usize; 3],
    pub values: Vec<T>,
}

impl<T: Real> SdfGrid<T> {
    pub fn new(origin: [T; 3], spacing: T, dims: [usize; 3], values: Vec<T>) -> Result<Self> {
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidGrid {
                reason: format!("dims {dims:?} must be >= 2 per axis"),
            });
        }
        if spacing <= T::zero() {
            return Err(Error::InvalidGrid {
                reason: "spacing must be positive".into(),
            });
        }
        if values.len() != dims[0] * dims[1] * dims[2] {
            return Err(Error::InvalidGrid {
                reason: format!(
                    "value count {} != {}x{}x{}",
                    values.len(),
                    dims[0],
                    dims[1],
                    dims[2]
                ),
            });
        }
        Ok(SdfGrid {
            origin,
            spacing,
            dims,
            values,
        })
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> T {
        self.values[self.index(i, j, k)]
    }

    pub fn node_position(&self, i: usize, j: usize, k: usize) -> [T; 3] {
        [
            self.origin[0] + T::of(i as f64) * self.spacing,
            self.origin[1] + T::of(j as f64) * self.spacing,
            self.origin[2] + T::of(k as f64) * self.spacing,
        ]
    }

    pub fn max_corner(&self) -> [T; 3] {
        self.node_position(self.dims[0] - 1, self.dims[1] - 1, self.dims[2] - 1)
    }

    pub fn cell_diagonal(&self) -> T {
        self.spacing * T::of(3.0_f64.sqrt())
    }

    pub fn contains(&self, p: [T; 3]) -> bool {
        let hi = self.max_corner();
        (0..3).all(|d| p[d] >= self.origin[d] && p[d] <= hi[d])
    }

    /// Fractional grid coordinates clamped to the closed grid box.
    fn local_clamped(&self, p: [T; 3]) -> [T; 3] {
        let mut q = [T::zero(); 3];
        for d in 0..3 {
            let v = (p[d] - self.origin[d]) / self.spacing;
            q[d] = v.max(T::zero()).min(T::of((self.dims[d] - 1) as f64));
        }
        q
    }

    /// Distance from `p` to the closed grid box (zero inside).
    pub fn box_distance(&self, p: [T; 3]) -> T {
        let hi = self.max_corner();
        let mut d2 = T::zero();
        for d in 0..3 {
            let v = if p[d] < self.origin[d] {
                self.origin[d] - p[d]
            } else if p[d] > hi[d] {
                p[d] - hi[d]
            } else {
                T::zero()
            };
            d2 += v * v;
        }
        d2.sqrt()
    }

    /// Trilinear interpolation. Queries outside the box evaluate at the
    /// clamped position plus the Euclidean distance to the box, which keeps
    /// distance-like fields growing away from the domain.
    pub fn sample(&self, p: [T; 3]) -> T {
        self.sample_inside(p) + self.box_distance(p)
    }

    fn sample_inside(&self, p: [T; 3]) -> T {
        let q = self.local_clamped(p);
        let cell = |v: T, n: usize| -> (usize, T) {
            let i = (v.to_f64().unwrap().floor() as usize).min(n - 2);
            (i, v - T::of(i as f64))
        };
        let (i, fx) = cell(q[0], self.dims[0]);
        let (j, fy) = cell(q[1], self.dims[1]);
        let (k, fz) = cell(q[2], self.dims[2]);
        let one = T::one();
        let mut acc = T::zero();
        for dz in 0..2 {
            for dy in 0..2 {
                for dx in 0..2 {
                    let w = (if dx == 0 { one - fx } else { fx })
                        * (if dy == 0 { one - fy } else { fy })
                        * (if dz == 0 { one - fz } else { fz });
                    acc += w * self.at(i + dx, j + dy, k + dz);
                }
            }
        }
        acc
    }

    /// Value and exact gradient of the trilinear interpolant at `p`.
    ///
    /// This is the derivative finite differences of [`SdfGrid::sample`] see,
    /// which is what loss backpropagation needs; [`SdfGrid::gradient`] is the
    /// smoother node-stencil variant.
    pub fn sample_with_gradient(&self, p: [T; 3]) -> (T, [T; 3]) {
        let q = self.local_clamped(p);
        let cell = |v: T, n: usize| -> (usize, T) {
            let i = (v.to_f64().unwrap().floor() as usize).min(n - 2);
            (i, v - T::of(i as f64))
        };
        let (i, fx) = cell(q[0], self.dims[0]);
        let (j, fy) = cell(q[1], self.dims[1]);
        let (k, fz) = cell(q[2], self.dims[2]);
        let one = T::one();
        let inv = T::one() / self.spacing;
        let mut value = T::zero();
        let mut grad = [T::zero(); 3];
        for dz in 0..2 {
            let (wz, dwz) = if dz == 0 { (one - fz, -inv) } else { (fz, inv) };
            for dy in 0..2 {
                let (wy, dwy) = if dy == 0 { (one - fy, -inv) } else { (fy, inv) };
                for dx in 0..2 {
                    let (wx, dwx) = if dx == 0 { (one - fx, -inv) } else { (fx, inv) };
                    let v = self.at(i + dx, j + dy, k + dz);
                    value += wx * wy * wz * v;
                    grad[0] += dwx * wy * wz * v;
                    grad[1] += wx * dwy * wz * v;
                    grad[2] += wx * wy * dwz * v;
                }
            }
        }
        // Outside the box the value grows as the distance to the clamped
        // point; the gradient follows the offset direction there.
        let hi = self.max_corner();
        let mut offset = [T::zero(); 3];
        let mut outside = false;
        for d in 0..3 {
            if p[d] < self.origin[d] {
                offset[d] = p[d] - self.origin[d];
                outside = true;
            } else if p[d] > hi[d] {
                offset[d] = p[d] - hi[d];
                outside = true;
            }
        }
        if outside {
            let dist = vec3::norm(offset);
            for d in 0..3 {
                if offset[d] != T::zero() {
                    grad[d] = offset[d] / dist;
                }
            }
            value += dist;
        }
        (value, grad)
    }

    /// Gradient of the sampled field at `p`: trilinear interpolation of
    /// central differences of node values.
    pub fn gradient(&self, p: [T; 3]) -> [T; 3] {
        let q = self.local_clamped(p);
        let cell = |v: T, n: usize| -> (usize, T) {
            let i = (v.to_f64().unwrap().floor() as usize).min(n - 2);
            (i, v - T::of(i as f64))
        };
        let (i, fx) = cell(q[0], self.dims[0]);
        let (j, fy) = cell(q[1], self.dims[1]);
        let (k, fz) = cell(q[2], self.dims[2]);
        let one = T::one();
        let mut grad = [T::zero(); 3];
        for dz in 0..2 {
            for dy in 0..2 {
                for dx in 0..2 {
                    let w = (if dx == 0 { one - fx } else { fx })
                        * (if dy == 0 { one - fy } else { fy })
                        * (if dz == 0 { one - fz } else { fz });
                    let g = self.node_gradient(i + dx, j + dy, k + dz);
                    grad = vec3::add_scaled(grad, g, w);
                }
            }
        }
        grad
    }

    /// Central differences at a node (one-sided on the boundary).
    pub fn node_gradient(&self, i: usize, j: usize, k: usize) -> [T; 3] {
        let diff = |lo: T, hi: T, span: T| (hi - lo) / (span * self.spacing);
        let two = T::of(2.0);
        let gx = match i {
            0 => diff(self.at(0, j, k), self.at(1, j, k), T::one()),
            i if i == self.dims[0] - 1 => diff(self.at(i - 1, j, k), self.at(i, j, k), T::one()),
            _ => diff(self.at(i - 1, j, k), self.at(i + 1, j, k), two),
        };
        let gy = match j {
            0 => diff(self.at(i, 0, k), self.at(i, 1, k), T::one()),
            j if j == self.dims[1] - 1 => diff(self.at(i, j - 1, k), self.at(i, j, k), T::one()),
            _ => diff(self.at(i, j - 1, k), self.at(i, j + 1, k), two),
        };
        let gz = match k {
            0 => diff(self.at(i, j, 0), self.at(i, j, 1), T::one()),
            k if k == self.dims[2] - 1 => diff(self.at(i, j, k - 1), self.at(i, j, k), T::one()),
            _ => diff(self.at(i, j, k - 1), self.at(i, j, k + 1), two),
        };
        [gx, gy, gz]
    }

    pub fn has_sign_change(&self) -> bool {
        let mut pos = false;
        let mut neg = false;
        for &v in &self.values {
            pos |= v > T::zero();
            neg |= v < T::zero();
            if pos && neg {
                return true;
            }
        }
        // An exact zero next to any nonzero value also yields an iso-surface.
        self.values.iter().any(|&v| v == T::zero()) && (pos || neg)
    }

    /// Analytic sphere SDF sampled on a symmetric grid around the origin;
    /// used widely in tests.
    pub fn analytic_sphere(radius: T, half_extent: T, resolution: usize) -> Self {
        let spacing = T::of(2.0) * half_extent / T::of((resolution - 1) as f64);
        let origin = [-half_extent; 3];
        let mut values = Vec::with_capacity(resolution * resolution * resolution);
        for k in 0..resolution {
            for j in 0..resolution {
                for i in 0..resolution {
                    let p = [
                        origin[0] + T::of(i as f64) * spacing,
                        origin[1] + T::of(j as f64) * spacing,
                        origin[2] + T::of(k as f64) * spacing,
                    ];
                    values.push(vec3::norm(p) - radius);
                }
            }
        }
        SdfGrid::new(origin, spacing, [resolution; 3], values).unwrap()
    }
}

/// Build a signed-distance grid for a watertight mesh.
///
/// The grid is a cube around the padded bounding box with `resolution` nodes
/// per axis. Magnitudes are exact point-to-surface distances at the nodes;
/// signs come from the generalized winding number, which tolerates slightly
/// inconsistent triangle orientation.
pub fn build_sdf<T: Real>(mesh: &TriMesh<T>, resolution: usize) -> Result<SdfGrid<T>> {
    if resolution < 8 {
        return Err(Error::InvalidArgument(format!(
            "resolution {resolution} must be >= 8"
        )));
    }
    mesh.validate()?;
    mesh.require_watertight()?;

    let (lo, hi) = mesh.bounding_box();
    let center = vec3::scale(vec3::add(lo, hi), T::of(0.5));
    let mut half = T::zero();
    for d in 0..3 {
        half = half.max((hi[d] - lo[d]) * T::of(0.5));
    }
    // Pad so the surface never touches the grid boundary.
    half = half * T::of(1.2) + T::of(1e-6);
    let spacing = T::of(2.0) * half / T::of((resolution - 1) as f64);
    let origin = vec3::sub(center, [half; 3]);

    let bvh = TriBvh::build(mesh);
    let dims = [resolution; 3];
    let n = resolution * resolution * resolution;
    let values: Vec<T> = (0..n)
        .into_par_iter()
        .map(|idx| {
            let i = idx % resolution;
            let j = (idx / resolution) % resolution;
            let k = idx / (resolution * resolution);
            let p = [
                origin[0] + T::of(i as f64) * spacing,
                origin[1] + T::of(j as f64) * spacing,
                origin[2] + T::of(k as f64) * spacing,
            ];
            let d = bvh.distance(p);
            let inside = bvh.winding_number(p) > T::of(0.5);
            if inside {
                -d
            } else {
                d
            }
        })
        .collect();

    SdfGrid::new(origin, spacing, dims, values)
}
