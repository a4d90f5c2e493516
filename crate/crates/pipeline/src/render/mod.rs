//! Image-domain machinery: cameras, Gabor orientation maps, a differentiable
//! Gaussian-segment splat rasterizer, and the silhouette and orientation
//! losses.

pub mod camera;
pub mod gabor;
pub mod imgio;
pub mod splat;

pub use camera::load_cameras;

pub use camera::Camera;
pub use gabor::{gabor_orientation_map, GrayImage, OrientationMap};
pub use splat::{
    backprop_to_strands, orientation_loss, silhouette_loss, splat_render, GaussianAdjoint,
    RenderOptions, RenderedMaps,
};
