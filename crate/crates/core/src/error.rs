use thiserror::Error;

/// Errors raised by the geometry kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh is empty")]
    EmptyMesh,

    #[error("face {face} references vertex {index} out of range ({count} vertices)")]
    FaceIndexOutOfRange {
        face: usize,
        index: usize,
        count: usize,
    },

    #[error("face {face} is degenerate (area {area} below tolerance)")]
    DegenerateFace { face: usize, area: f64 },

    #[error("mesh is not watertight: {open_edges} open edge(s)")]
    NotWatertight { open_edges: usize },

    #[error("mesh has {count} non-manifold edge(s)")]
    NonManifold { count: usize },

    #[error("grid contains no sign change; iso-surface is empty")]
    EmptySurface,

    #[error("grid shape mismatch: {left:?} vs {right:?}")]
    GridShapeMismatch { left: [usize; 3], right: [usize; 3] },

    #[error("invalid grid: {reason}")]
    InvalidGrid { reason: String },

    #[error("reference set is empty")]
    EmptyReference,

    #[error("k = {k} exceeds reference size {size}")]
    KTooLarge { k: usize, size: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid face index {index} ({count} faces)")]
    InvalidFaceIndex { index: usize, count: usize },

    #[error("parse error in {path} at line {line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("unsupported file content in {path}: {reason}")]
    Unsupported { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
