//! Gabor-filter orientation maps.

use rayon::prelude::*;

use crate::{Error, Result};

/// Grayscale image, row-major, values in [0, 1].
#[derive(Clone, Debug)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} pixels for {width}x{height}",
                pixels.len()
            )));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    fn at_clamped(&self, x: i64, y: i64) -> f64 {
        let xi = x.clamp(0, self.width as i64 - 1) as usize;
        let yi = y.clamp(0, self.height as i64 - 1) as usize;
        self.pixels[yi * self.width + xi]
    }
}

/// Per-pixel undirected orientation and filter response.
#[derive(Clone, Debug)]
pub struct OrientationMap {
    pub width: usize,
    pub height: usize,
    /// Angle of strongest response in [0, pi).
    pub beta: Vec<f64>,
    /// Magnitude of the strongest response.
    pub magnitude: Vec<f64>,
    /// Per-pixel evaluation mask (all true from the filter itself; callers
    /// intersect with silhouette masks).
    pub mask: Vec<bool>,
}

#[derive(Clone, Copy, Debug)]
pub struct GaborParams {
    pub wavelength: f64,
    pub sigma: f64,
}

impl Default for GaborParams {
    fn default() -> Self {
        GaborParams {
            wavelength: 4.0,
            sigma: 2.0,
        }
    }
}

/// Zero-mean cosine-phase Gabor kernel tuned to stripes running along
/// `theta`: the carrier modulates across the stripe direction.
fn gabor_kernel(theta: f64, params: &GaborParams) -> (usize, Vec<f64>) {
    let radius = (3.0 * params.sigma).ceil() as i64;
    let size = (2 * radius + 1) as usize;
    let mut kernel = Vec::with_capacity(size * size);
    let (sin_t, cos_t) = theta.sin_cos();
    let two_sigma2 = 2.0 * params.sigma * params.sigma;
    let omega = 2.0 * std::f64::consts::PI / params.wavelength;
    let mut sum = 0.0;
    for y in -radius..=radius {
        for x in -radius..=radius {
            let (xf, yf) = (x as f64, y as f64);
            // Coordinate across the stripes.
            let across = -xf * sin_t + yf * cos_t;
            let r2 = xf * xf + yf * yf;
            let v = (-r2 / two_sigma2).exp() * (omega * across).cos();
            kernel.push(v);
            sum += v;
        }
    }
    // Remove the DC component so flat regions respond with zero.
    let mean = sum / (size * size) as f64;
    for v in kernel.iter_mut() {
        *v -= mean;
    }
    (size, kernel)
}

/// Convolve with `n_orientations` equally spaced Gabor kernels over [0, pi);
/// per pixel keep the angle of the strongest absolute response.
pub fn gabor_orientation_map(
    image: &GrayImage,
    n_orientations: usize,
    params: &GaborParams,
) -> Result<OrientationMap> {
    if n_orientations < 4 {
        return Err(Error::InvalidInput(format!(
            "need at least 4 orientations, got {n_orientations}"
        )));
    }
    let kernels: Vec<(f64, usize, Vec<f64>)> = (0..n_orientations)
        .map(|i| {
            let theta = std::f64::consts::PI * i as f64 / n_orientations as f64;
            let (size, k) = gabor_kernel(theta, params);
            (theta, size, k)
        })
        .collect();
    let size = kernels[0].1;
    if image.width < size || image.height < size {
        return Err(Error::InvalidInput(format!(
            "image {}x{} smaller than the {size}x{size} kernel",
            image.width, image.height
        )));
    }
    let radius = (size / 2) as i64;

    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..image.height)
        .into_par_iter()
        .map(|y| {
            let mut beta_row = vec![0.0; image.width];
            let mut mag_row = vec![0.0; image.width];
            for x in 0..image.width {
                let mut best = (0.0_f64, 0.0_f64); // (magnitude, angle)
                for (theta, _, kernel) in &kernels {
                    let mut acc = 0.0;
                    let mut idx = 0;
                    for ky in -radius..=radius {
                        for kx in -radius..=radius {
                            acc += kernel[idx] * image.at_clamped(x as i64 + kx, y as i64 + ky);
                            idx += 1;
                        }
                    }
                    let mag = acc.abs();
                    if mag > best.0 {
                        best = (mag, *theta);
                    }
                }
                beta_row[x] = best.1;
                mag_row[x] = best.0;
            }
            (beta_row, mag_row)
        })
        .collect();

    let mut beta = Vec::with_capacity(image.width * image.height);
    let mut magnitude = Vec::with_capacity(image.width * image.height);
    for (b, m) in rows {
        beta.extend(b);
        magnitude.extend(m);
    }
    Ok(OrientationMap {
        width: image.width,
        height: image.height,
        beta,
        magnitude,
        mask: vec![true; image.width * image.height],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stripes(width: usize, height: usize, horizontal: bool, period: f64) -> GrayImage {
        let pixels = (0..width * height)
            .map(|i| {
                let (x, y) = (i % width, i / width);
                let coord = if horizontal { y as f64 } else { x as f64 };
                0.5 + 0.5 * (2.0 * std::f64::consts::PI * coord / period).sin()
            })
            .collect();
        GrayImage::new(width, height, pixels).unwrap()
    }

    #[test]
    fn horizontal_stripes_orientation_zero() {
        // Stripes varying along y run along the x axis: beta ~ 0.
        let img = stripes(48, 48, true, 4.0);
        let map = gabor_orientation_map(&img, 16, &GaborParams::default()).unwrap();
        let tol = std::f64::consts::PI / 16.0;
        let mut checked = 0;
        for y in 8..40 {
            for x in 8..40 {
                let p = y * 48 + x;
                if map.magnitude[p] > 0.5 {
                    let b = map.beta[p];
                    let wrapped = b.min(std::f64::consts::PI - b);
                    assert!(wrapped <= tol + 1e-12, "beta {b} at ({x},{y})");
                    checked += 1;
                }
            }
        }
        assert!(checked > 100, "checked {checked}");
    }

    #[test]
    fn vertical_stripes_orientation_half_pi() {
        let img = stripes(48, 48, false, 4.0);
        let map = gabor_orientation_map(&img, 16, &GaborParams::default()).unwrap();
        let tol = std::f64::consts::PI / 16.0;
        let mut checked = 0;
        for y in 8..40 {
            for x in 8..40 {
                let p = y * 48 + x;
                if map.magnitude[p] > 0.5 {
                    let err = (map.beta[p] - std::f64::consts::FRAC_PI_2).abs();
                    assert!(err <= tol + 1e-12, "beta {} at ({x},{y})", map.beta[p]);
                    checked += 1;
                }
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn constant_image_zero_magnitude() {
        let img = GrayImage::new(32, 32, vec![0.7; 1024]).unwrap();
        let map = gabor_orientation_map(&img, 8, &GaborParams::default()).unwrap();
        for &m in &map.magnitude {
            assert!(m < 1e-9, "magnitude {m}");
        }
    }

    #[test]
    fn image_smaller_than_kernel_rejected() {
        let img = GrayImage::new(8, 8, vec![0.0; 64]).unwrap();
        assert!(gabor_orientation_map(&img, 8, &GaborParams::default()).is_err());
    }
}
