//! Pinhole cameras with world-to-camera extrinsics.

use std::path::Path;

use fur_core::vec3;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Camera {
    /// fx, fy, cx, cy in pixels.
    pub intrinsics: [f64; 4],
    /// Row-major 4x4 world-to-camera matrix (last row 0 0 0 1).
    pub world_to_camera: [[f64; 4]; 4],
    pub width: usize,
    pub height: usize,
}

impl Camera {
    pub fn fx(&self) -> f64 {
        self.intrinsics[0]
    }
    pub fn fy(&self) -> f64 {
        self.intrinsics[1]
    }
    pub fn cx(&self) -> f64 {
        self.intrinsics[2]
    }
    pub fn cy(&self) -> f64 {
        self.intrinsics[3]
    }

    pub fn rotation(&self) -> [[f64; 3]; 3] {
        let m = &self.world_to_camera;
        [
            [m[0][0], m[0][1], m[0][2]],
            [m[1][0], m[1][1], m[1][2]],
            [m[2][0], m[2][1], m[2][2]],
        ]
    }

    pub fn translation(&self) -> [f64; 3] {
        let m = &self.world_to_camera;
        [m[0][3], m[1][3], m[2][3]]
    }

    pub fn to_camera(&self, p: [f64; 3]) -> [f64; 3] {
        let r = self.rotation();
        vec3::add(
            [
                vec3::dot(r[0], p),
                vec3::dot(r[1], p),
                vec3::dot(r[2], p),
            ],
            self.translation(),
        )
    }

    /// Rotate a world direction into camera coordinates.
    pub fn dir_to_camera(&self, d: [f64; 3]) -> [f64; 3] {
        let r = self.rotation();
        [vec3::dot(r[0], d), vec3::dot(r[1], d), vec3::dot(r[2], d)]
    }

    /// World vector of a camera-frame vector (rotation transpose).
    pub fn dir_to_world(&self, d: [f64; 3]) -> [f64; 3] {
        let r = self.rotation();
        [
            r[0][0] * d[0] + r[1][0] * d[1] + r[2][0] * d[2],
            r[0][1] * d[0] + r[1][1] * d[1] + r[2][1] * d[2],
            r[0][2] * d[0] + r[1][2] * d[1] + r[2][2] * d[2],
        ]
    }

    pub fn project(&self, cam: [f64; 3]) -> [f64; 2] {
        [
            self.fx() * cam[0] / cam[2] + self.cx(),
            self.fy() * cam[1] / cam[2] + self.cy(),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if self.fx() <= 0.0 || self.fy() <= 0.0 {
            return Err(Error::InvalidInput("camera focal lengths must be positive".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidInput("camera image size must be positive".into()));
        }
        let r = self.rotation();
        for i in 0..3 {
            for j in 0..3 {
                let dot = vec3::dot(r[i], r[j]);
                let expect = if i == j { 1.0 } else { 0.0 };
                if (dot - expect).abs() > 1e-6 {
                    return Err(Error::InvalidInput(
                        "camera rotation is not orthonormal".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// A camera at `eye` looking at `target` (up = +y world), producing
    /// `width` x `height` images with the given focal length in pixels.
    pub fn look_at(
        eye: [f64; 3],
        target: [f64; 3],
        focal_px: f64,
        width: usize,
        height: usize,
    ) -> Camera {
        let forward = vec3::normalized(vec3::sub(target, eye)).expect("eye != target");
        let world_up = if forward[1].abs() > 0.99 {
            [0.0, 0.0, 1.0]
        } else {
            [0.0, 1.0, 0.0]
        };
        let right = vec3::normalized(vec3::cross(forward, world_up)).unwrap();
        let down = vec3::cross(forward, right);
        // Camera frame: x right, y down, z forward.
        let r = [right, down, forward];
        let t = [
            -vec3::dot(r[0], eye),
            -vec3::dot(r[1], eye),
            -vec3::dot(r[2], eye),
        ];
        Camera {
            intrinsics: [focal_px, focal_px, width as f64 / 2.0, height as f64 / 2.0],
            world_to_camera: [
                [r[0][0], r[0][1], r[0][2], t[0]],
                [r[1][0], r[1][1], r[1][2], t[1]],
                [r[2][0], r[2][1], r[2][2], t[2]],
                [0.0, 0.0, 0.0, 1.0],
            ],
            width,
            height,
        }
    }
}

/// Load a JSON list of cameras.
pub fn load_cameras(path: impl AsRef<Path>) -> Result<Vec<Camera>> {
    let text = std::fs::read_to_string(path)?;
    let cams: Vec<Camera> = serde_json::from_str(&text)?;
    for c in &cams {
        c.validate()?;
    }
    Ok(cams)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn look_at_projects_target_to_center() {
        let cam = Camera::look_at([0.0, 0.0, -5.0], [0.0; 3], 100.0, 64, 64);
        cam.validate().unwrap();
        let c = cam.to_camera([0.0; 3]);
        assert!(c[2] > 0.0);
        let p = cam.project(c);
        assert!((p[0] - 32.0).abs() < 1e-9 && (p[1] - 32.0).abs() < 1e-9);
    }
}
