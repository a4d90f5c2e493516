//! Fur-groom reconstruction pipeline.
//!
//! Takes a furred surface mesh plus per-body-part annotations and produces a
//! bald body mesh and an optimized strand set, with losses, metrics and
//! interchange formats. Geometry primitives come from `fur-core`; everything
//! here runs in f64 and exchanges float32 on disk.

pub mod annotation;
pub mod defur;
pub mod demo;
mod error;
pub mod lbs;
pub mod losses;
pub mod metrics;
pub mod optimize;
pub mod render;
pub mod sfur;
pub mod strand;

pub use annotation::{AnnotationSet, PartAnnotation, PartLabel, VertexAnnotation};
pub use error::Error;
pub use strand::{Strand, StrandField, StrandSet};

pub type Result<T> = std::result::Result<T, Error>;

/// Concrete mesh/scalar aliases re-exported for pipeline consumers.
pub use fur_core::{Grid, Mesh, Sample, Vec3};
