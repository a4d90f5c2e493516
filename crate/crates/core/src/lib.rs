//! Geometry primitives shared by every stage of the fur-groom pipeline:
//! triangle meshes, signed-distance grids, marching cubes, surface sampling,
//! nearest-neighbor queries, smooth tangent fields and quadric decimation.
//!
//! All math is generic over the scalar type (`f32` or `f64`) through the
//! [`Real`] trait; the concrete aliases below are what the pipeline layer
//! consumes.

pub mod bvh;
pub mod decimate;
mod error;
pub mod io;
pub mod knn;
pub mod marching;
pub mod mesh;
pub mod repair;
pub mod rng;
pub mod sample;
mod scalar;
pub mod sdf;
pub mod tangent;
pub mod vec3;

pub use error::Error;
pub use knn::KdTree;
pub use mesh::TriMesh;
pub use rng::Pcg32;
pub use sample::PointSample;
pub use scalar::Real;
pub use sdf::SdfGrid;
pub use tangent::TbnFrame;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Default scalar for the pipeline: all file formats and optimizers run in f64.
pub type Vec3 = [f64; 3];
/// Single-precision 3-vector, used at the f32 interchange boundary.
pub type Vec3f = [f32; 3];
/// Double-precision triangle mesh.
pub type Mesh = TriMesh<f64>;
/// Single-precision triangle mesh.
pub type MeshF = TriMesh<f32>;
/// Double-precision signed-distance grid.
pub type Grid = SdfGrid<f64>;
/// Double-precision surface sample.
pub type Sample = PointSample<f64>;
/// Double-precision tangent-bitangent-normal frame.
pub type Frame = TbnFrame<f64>;
