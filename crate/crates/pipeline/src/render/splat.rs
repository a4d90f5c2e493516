//! Differentiable Gaussian-segment splat rasterizer.
//!
//! Forward: project means with a pinhole camera, project covariances with the
//! first-order (Jacobian) screen-space approximation, depth-sort, composite
//! front to back. Outputs an accumulated-opacity silhouette, an undirected
//! per-pixel orientation (opacity-weighted doubled-angle average of projected
//! segment directions) and the accumulated opacity as confidence.
//!
//! Backward: exact adjoints of those maps with respect to Gaussian means,
//! world covariances and segment directions, including the Jacobian's
//! dependence on the camera-space mean. Compositing order is treated as
//! fixed, the standard splatting convention.

use rayon::prelude::*;

use fur_core::vec3;

use crate::losses::PointGrads;
use crate::render::camera::Camera;
use crate::strand::{GaussianSegment, StrandSet};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct RenderOptions {
    /// Isotropic screen-space blur added to projected covariances (px^2).
    pub blur: f64,
    /// Upper clamp on per-splat alpha.
    pub alpha_clamp: f64,
    /// Per-pixel Gaussian exponent cutoff; `None` evaluates every pixel of
    /// the image for every splat (exact, used by gradient tests).
    pub power_cutoff: Option<f64>,
    /// Transmittance below which compositing stops.
    pub termination: f64,
    /// Near-plane cull distance.
    pub near: f64,
    /// Confidence floor for the orientation loss.
    pub tau_floor: f64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            blur: 0.3,
            alpha_clamp: 0.995,
            power_cutoff: Some(-12.0),
            termination: 1e-7,
            near: 1e-2,
            tau_floor: 1e-4,
        }
    }
}

/// Rendered maps, row-major, y down.
#[derive(Clone, Debug)]
pub struct RenderedMaps {
    pub width: usize,
    pub height: usize,
    /// Accumulated opacity in [0, 1).
    pub silhouette: Vec<f64>,
    /// Undirected orientation in [0, pi); 0 where no coverage.
    pub beta: Vec<f64>,
    /// Rendered confidence (= accumulated opacity).
    pub tau: Vec<f64>,
    /// Opacity-weighted doubled-angle moments, kept for the backward pass.
    pub moment_c: Vec<f64>,
    pub moment_s: Vec<f64>,
}

#[derive(Clone, Debug)]
struct Splat {
    gauss: u32,
    xc: [f64; 3],
    proj: [f64; 2],
    /// Inverse of the projected covariance, blur included (a00, a01, a11).
    inv: [f64; 3],
    /// Camera-space direction and its screen projection.
    dcam: [f64; 3],
    ds: [f64; 2],
    /// Doubled-angle components of the screen direction.
    dir2: [f64; 2],
    /// World-to-camera covariance, cached for the backward pass.
    v_cam: [[f64; 3]; 3],
    opacity: f64,
    bbox: [usize; 4], // x0, x1, y0, y1 inclusive
}

/// Forward products kept alive so the backward pass can replay compositing.
pub struct SplatScene {
    options: RenderOptions,
    width: usize,
    height: usize,
    rotation: [[f64; 3]; 3],
    intrinsics: [f64; 4],
    splats: Vec<Splat>,
    /// Per-pixel splat lists in front-to-back order.
    pixel_lists: Vec<Vec<u32>>,
    n_gaussians: usize,
}

fn mat3_mul_sym(r: &[[f64; 3]; 3], c: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    // R C R^T for world->camera rotation.
    let mut rc = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                rc[i][j] += r[i][k] * c[k][j];
            }
        }
    }
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                out[i][j] += rc[i][k] * r[j][k];
            }
        }
    }
    out
}

fn jacobian(fx: f64, fy: f64, xc: [f64; 3]) -> [[f64; 3]; 2] {
    let z = xc[2];
    [
        [fx / z, 0.0, -fx * xc[0] / (z * z)],
        [0.0, fy / z, -fy * xc[1] / (z * z)],
    ]
}

/// Rasterize Gaussian segments into silhouette/orientation/confidence maps.
/// Gaussians behind the near plane are culled.
pub fn splat_render(
    gaussians: &[GaussianSegment],
    camera: &Camera,
    options: &RenderOptions,
) -> Result<(RenderedMaps, SplatScene)> {
    camera.validate()?;
    for (i, g) in gaussians.iter().enumerate() {
        if g.mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("gaussian {i} has non-finite mean")));
        }
    }
    let (width, height) = (camera.width, camera.height);
    let (fx, fy) = (camera.fx(), camera.fy());
    let rotation = camera.rotation();

    let mut splats: Vec<Splat> = gaussians
        .iter()
        .enumerate()
        .filter_map(|(i, g)| {
            let xc = camera.to_camera(g.mean);
            if xc[2] <= options.near {
                return None; // behind the camera
            }
            let jac = jacobian(fx, fy, xc);
            let v_cam = mat3_mul_sym(&rotation, &g.cov);
            // Sigma' = J V J^T + blur I.
            let mut jv = [[0.0; 3]; 2];
            for r in 0..2 {
                for c in 0..3 {
                    for k in 0..3 {
                        jv[r][c] += jac[r][k] * v_cam[k][c];
                    }
                }
            }
            let mut sig = [options.blur, 0.0, options.blur];
            for k in 0..3 {
                sig[0] += jv[0][k] * jac[0][k];
                sig[1] += jv[0][k] * jac[1][k];
                sig[2] += jv[1][k] * jac[1][k];
            }
            let det = sig[0] * sig[2] - sig[1] * sig[1];
            if det <= 1e-12 {
                return None;
            }
            let inv = [sig[2] / det, -sig[1] / det, sig[0] / det];
            let proj = camera.project(xc);

            let dcam = camera.dir_to_camera(g.direction);
            let ds = [
                jac[0][0] * dcam[0] + jac[0][2] * dcam[2],
                jac[1][1] * dcam[1] + jac[1][2] * dcam[2],
            ];
            let r2 = ds[0] * ds[0] + ds[1] * ds[1];
            let dir2 = if r2 > 1e-24 {
                [(ds[0] * ds[0] - ds[1] * ds[1]) / r2, 2.0 * ds[0] * ds[1] / r2]
            } else {
                [0.0, 0.0]
            };

            let bbox = match options.power_cutoff {
                None => [0, width - 1, 0, height - 1],
                Some(cutoff) => {
                    // 2x2 largest eigenvalue bounds the footprint radius.
                    let half_trace = 0.5 * (sig[0] + sig[2]);
                    let disc =
                        (0.25 * (sig[0] - sig[2]) * (sig[0] - sig[2]) + sig[1] * sig[1]).sqrt();
                    let lambda_max = half_trace + disc;
                    let radius = (2.0 * cutoff.abs() * lambda_max).sqrt().ceil() + 1.0;
                    let x0 = (proj[0] - radius).floor().max(0.0) as usize;
                    let y0 = (proj[1] - radius).floor().max(0.0) as usize;
                    let x1 = (proj[0] + radius).ceil().min(width as f64 - 1.0);
                    let y1 = (proj[1] + radius).ceil().min(height as f64 - 1.0);
                    if x1 < 0.0 || y1 < 0.0 || x0 > width - 1 || y0 > height - 1 {
                        return None;
                    }
                    [x0, x1 as usize, y0, y1 as usize]
                }
            };
            Some(Splat {
                gauss: i as u32,
                xc,
                proj,
                inv,
                dcam,
                ds,
                dir2,
                v_cam,
                opacity: g.opacity,
                bbox,
            })
        })
        .collect();

    // Front-to-back depth order; index tie-break keeps it deterministic.
    splats.sort_by(|a, b| {
        a.xc[2]
            .partial_cmp(&b.xc[2])
            .unwrap()
            .then(a.gauss.cmp(&b.gauss))
    });

    let mut pixel_lists: Vec<Vec<u32>> = vec![Vec::new(); width * height];
    for (s_idx, s) in splats.iter().enumerate() {
        for y in s.bbox[2]..=s.bbox[3] {
            for x in s.bbox[0]..=s.bbox[1] {
                pixel_lists[y * width + x].push(s_idx as u32);
            }
        }
    }

    let scene = SplatScene {
        options: *options,
        width,
        height,
        rotation,
        intrinsics: camera.intrinsics,
        splats,
        pixel_lists,
        n_gaussians: gaussians.len(),
    };

    let rows: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..height)
        .into_par_iter()
        .map(|y| {
            let mut sil = vec![0.0; width];
            let mut mc = vec![0.0; width];
            let mut ms = vec![0.0; width];
            for x in 0..width {
                let (s, c2, s2) = scene.composite_pixel(x, y);
                sil[x] = s;
                mc[x] = c2;
                ms[x] = s2;
            }
            (sil, mc, ms)
        })
        .collect();

    let mut silhouette = Vec::with_capacity(width * height);
    let mut moment_c = Vec::with_capacity(width * height);
    let mut moment_s = Vec::with_capacity(width * height);
    for (s, c, m) in rows {
        silhouette.extend(s);
        moment_c.extend(c);
        moment_s.extend(m);
    }
    let beta: Vec<f64> = moment_c
        .iter()
        .zip(&moment_s)
        .map(|(&c, &s)| {
            if c * c + s * s > 1e-24 {
                let b = 0.5 * s.atan2(c);
                if b < 0.0 {
                    b + std::f64::consts::PI
                } else {
                    b
                }
            } else {
                0.0
            }
        })
        .collect();

    let maps = RenderedMaps {
        width,
        height,
        tau: silhouette.clone(),
        silhouette,
        beta,
        moment_c,
        moment_s,
    };
    Ok((maps, scene))
}

impl SplatScene {
    fn pixel_center(x: usize, y: usize) -> [f64; 2] {
        [x as f64 + 0.5, y as f64 + 0.5]
    }

    fn composite_pixel(&self, x: usize, y: usize) -> (f64, f64, f64) {
        let center = Self::pixel_center(x, y);
        let mut transmittance = 1.0;
        let mut sil = 0.0;
        let mut c2 = 0.0;
        let mut s2 = 0.0;
        for &s_idx in &self.pixel_lists[y * self.width + x] {
            let s = &self.splats[s_idx as usize];
            let dx = center[0] - s.proj[0];
            let dy = center[1] - s.proj[1];
            let power =
                -0.5 * (s.inv[0] * dx * dx + 2.0 * s.inv[1] * dx * dy + s.inv[2] * dy * dy);
            if let Some(cutoff) = self.options.power_cutoff {
                if power < cutoff {
                    continue;
                }
            }
            let alpha = (s.opacity * power.exp()).min(self.options.alpha_clamp);
            let w = alpha * transmittance;
            sil += w;
            c2 += w * s.dir2[0];
            s2 += w * s.dir2[1];
            transmittance *= 1.0 - alpha;
            if transmittance < self.options.termination {
                break;
            }
        }
        (sil, c2, s2)
    }

    /// Backward through compositing, projection and the covariance chain.
    /// Inputs are per-pixel adjoints of (silhouette, moment_c, moment_s);
    /// output is one adjoint per input Gaussian (culled ones stay zero).
    pub fn backward(&self, d_sil: &[f64], d_c2: &[f64], d_s2: &[f64]) -> Vec<GaussianAdjoint> {
        assert_eq!(d_sil.len(), self.width * self.height);
        let mut acc: Vec<SplatAdjoint> = vec![SplatAdjoint::default(); self.splats.len()];

        for y in 0..self.height {
            for x in 0..self.width {
                let p = y * self.width + x;
                if d_sil[p] == 0.0 && d_c2[p] == 0.0 && d_s2[p] == 0.0 {
                    continue;
                }
                self.backward_pixel(x, y, d_sil[p], d_c2[p], d_s2[p], &mut acc);
            }
        }

        let mut out = vec![GaussianAdjoint::default(); self.n_gaussians];
        let (fx, fy) = (self.intrinsics[0], self.intrinsics[1]);
        for (s, a) in self.splats.iter().zip(&acc) {
            let g = &mut out[s.gauss as usize];
            let (xx, yy, z) = (s.xc[0], s.xc[1], s.xc[2]);
            let jac = jacobian(fx, fy, s.xc);

            let mut d_xc = [
                jac[0][0] * a.d_proj[0],
                jac[1][1] * a.d_proj[1],
                jac[0][2] * a.d_proj[0] + jac[1][2] * a.d_proj[1],
            ];

            // Sigma' = J V J^T + blur; dV = J^T dSigma J, dJ = 2 dSigma J V.
            let dsig = [[a.d_sigma[0], a.d_sigma[1]], [a.d_sigma[1], a.d_sigma[2]]];
            let mut d_v = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    for r in 0..2 {
                        for c in 0..2 {
                            d_v[i][j] += jac[r][i] * dsig[r][c] * jac[c][j];
                        }
                    }
                }
            }
            let mut d_jac = [[0.0; 3]; 2];
            for r in 0..2 {
                for c in 0..3 {
                    let mut jv = 0.0;
                    for k in 0..2 {
                        let mut vj = 0.0;
                        for m in 0..3 {
                            vj += jac[k][m] * s.v_cam[m][c];
                        }
                        jv += 2.0 * dsig[r][k] * vj;
                    }
                    d_jac[r][c] += jv;
                }
            }

            // Screen direction ds = J dcam feeding the doubled angle.
            let (dx, dy) = (s.ds[0], s.ds[1]);
            let r2 = dx * dx + dy * dy;
            let mut d_dcam = [0.0; 3];
            if r2 > 1e-24 && (a.d_dir2[0] != 0.0 || a.d_dir2[1] != 0.0) {
                let r4 = r2 * r2;
                let dc2_ddx = 4.0 * dx * dy * dy / r4;
                let dc2_ddy = -4.0 * dx * dx * dy / r4;
                let ds2_ddx = 2.0 * dy * (dy * dy - dx * dx) / r4;
                let ds2_ddy = 2.0 * dx * (dx * dx - dy * dy) / r4;
                let d_ds = [
                    a.d_dir2[0] * dc2_ddx + a.d_dir2[1] * ds2_ddx,
                    a.d_dir2[0] * dc2_ddy + a.d_dir2[1] * ds2_ddy,
                ];
                d_jac[0][0] += d_ds[0] * s.dcam[0];
                d_jac[0][2] += d_ds[0] * s.dcam[2];
                d_jac[1][1] += d_ds[1] * s.dcam[1];
                d_jac[1][2] += d_ds[1] * s.dcam[2];
                d_dcam = [
                    jac[0][0] * d_ds[0],
                    jac[1][1] * d_ds[1],
                    jac[0][2] * d_ds[0] + jac[1][2] * d_ds[1],
                ];
            }

            // J's own dependence on the camera-space position.
            let z2 = z * z;
            let z3 = z2 * z;
            d_xc[0] += d_jac[0][2] * (-fx / z2);
            d_xc[1] += d_jac[1][2] * (-fy / z2);
            d_xc[2] += d_jac[0][0] * (-fx / z2)
                + d_jac[0][2] * (2.0 * fx * xx / z3)
                + d_jac[1][1] * (-fy / z2)
                + d_jac[1][2] * (2.0 * fy * yy / z3);

            // Rotate everything back to world.
            let r = &self.rotation;
            let rt = |v: [f64; 3]| -> [f64; 3] {
                [
                    r[0][0] * v[0] + r[1][0] * v[1] + r[2][0] * v[2],
                    r[0][1] * v[0] + r[1][1] * v[1] + r[2][1] * v[2],
                    r[0][2] * v[0] + r[1][2] * v[1] + r[2][2] * v[2],
                ]
            };
            g.d_mean = vec3::add(g.d_mean, rt(d_xc));
            g.d_dir = vec3::add(g.d_dir, rt(d_dcam));
            // dC = R^T dV R.
            let mut rt_dv = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        rt_dv[i][j] += r[k][i] * d_v[k][j];
                    }
                }
            }
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        g.d_cov[i][j] += rt_dv[i][k] * r[k][j];
                    }
                }
            }
        }
        out
    }

    fn backward_pixel(
        &self,
        x: usize,
        y: usize,
        d_sil: f64,
        d_c2: f64,
        d_s2: f64,
        acc: &mut [SplatAdjoint],
    ) {
        let center = Self::pixel_center(x, y);
        let list = &self.pixel_lists[y * self.width + x];
        // Replay the forward pass, recording per-splat state.
        let mut stack: Vec<(u32, f64, f64, f64, f64, f64)> = Vec::new(); // (splat, g, alpha, T, dx, dy)
        let mut transmittance = 1.0;
        for &s_idx in list {
            let s = &self.splats[s_idx as usize];
            let dx = center[0] - s.proj[0];
            let dy = center[1] - s.proj[1];
            let power =
                -0.5 * (s.inv[0] * dx * dx + 2.0 * s.inv[1] * dx * dy + s.inv[2] * dy * dy);
            if let Some(cutoff) = self.options.power_cutoff {
                if power < cutoff {
                    continue;
                }
            }
            let g = power.exp();
            let alpha = (s.opacity * g).min(self.options.alpha_clamp);
            stack.push((s_idx, g, alpha, transmittance, dx, dy));
            transmittance *= 1.0 - alpha;
            if transmittance < self.options.termination {
                break;
            }
        }
        // Reverse sweep with the suffix accumulator for the transmittance
        // chain.
        let mut suffix = 0.0;
        for &(s_idx, g, alpha, t_before, dx, dy) in stack.iter().rev() {
            let s = &self.splats[s_idx as usize];
            let w = alpha * t_before;
            let dw = d_sil + d_c2 * s.dir2[0] + d_s2 * s.dir2[1];
            let a = &mut acc[s_idx as usize];
            a.d_dir2[0] += w * d_c2;
            a.d_dir2[1] += w * d_s2;
            let d_alpha = dw * t_before - suffix / (1.0 - alpha);
            suffix += dw * w;
            if alpha >= self.options.alpha_clamp {
                continue; // clamped: zero derivative branch
            }
            let d_g = s.opacity * d_alpha;
            let d_power = g * d_g;
            // q = A delta.
            let q = [
                s.inv[0] * dx + s.inv[1] * dy,
                s.inv[1] * dx + s.inv[2] * dy,
            ];
            a.d_proj[0] += d_power * q[0];
            a.d_proj[1] += d_power * q[1];
            // Full-matrix adjoint of Sigma': 0.5 q q^T (the off-diagonal is
            // mirrored when the 2x2 is rebuilt, so no pair factor here).
            a.d_sigma[0] += 0.5 * q[0] * q[0] * d_power;
            a.d_sigma[1] += 0.5 * q[0] * q[1] * d_power;
            a.d_sigma[2] += 0.5 * q[1] * q[1] * d_power;
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct SplatAdjoint {
    d_proj: [f64; 2],
    d_sigma: [f64; 3],
    d_dir2: [f64; 2],
}

/// Adjoint of one Gaussian's parameters.
#[derive(Clone, Copy, Debug, Default)]
pub struct GaussianAdjoint {
    pub d_mean: [f64; 3],
    pub d_cov: [[f64; 3]; 3],
    pub d_dir: [f64; 3],
}

/// Masked mean-L1 silhouette loss; gradient is per pixel of the rendered
/// silhouette (sign convention: zero exactly at equality).
pub fn silhouette_loss(
    rendered: &RenderedMaps,
    target: &[f64],
    mask: &[bool],
) -> Result<(f64, Vec<f64>)> {
    let n = rendered.silhouette.len();
    if target.len() != n || mask.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "silhouette {} vs target {} vs mask {}",
            n,
            target.len(),
            mask.len()
        )));
    }
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(Error::InvalidInput("empty silhouette mask".into()));
    }
    let inv = 1.0 / count as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0; n];
    for p in 0..n {
        if !mask[p] {
            continue;
        }
        let diff = rendered.silhouette[p] - target[p];
        value += diff.abs() * inv;
        grad[p] = diff.signum() * inv * if diff == 0.0 { 0.0 } else { 1.0 };
    }
    Ok((value, grad))
}

/// Orientation loss: sum over masked pixels with confidence above the floor
/// of `tau * angdiff(beta, target) - ln(tau)`, angles undirected (mod pi).
/// Returns the value plus gradients with respect to the beta and tau maps.
pub fn orientation_loss(
    rendered: &RenderedMaps,
    target_beta: &[f64],
    mask: &[bool],
    tau_floor: f64,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let n = rendered.beta.len();
    if target_beta.len() != n || mask.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "beta {} vs target {} vs mask {}",
            n,
            target_beta.len(),
            mask.len()
        )));
    }
    let mut value = 0.0;
    let mut d_beta = vec![0.0; n];
    let mut d_tau = vec![0.0; n];
    for p in 0..n {
        if !mask[p] {
            continue;
        }
        let tau = rendered.tau[p];
        if tau < tau_floor {
            continue;
        }
        let raw = rendered.beta[p] - target_beta[p];
        let d = raw.abs();
        // Undirected wrap: the angular distance is min(d, |d - pi|, |d + pi|).
        let (ang, sign) = if d <= std::f64::consts::PI - d {
            (d, raw.signum())
        } else {
            (std::f64::consts::PI - d, -raw.signum())
        };
        value += tau * ang - tau.ln();
        d_beta[p] = tau * sign;
        d_tau[p] = ang - 1.0 / tau;
    }
    Ok((value, d_beta, d_tau))
}

/// Fold beta/tau adjoints into the moment/silhouette adjoints the scene
/// backward consumes.
pub fn orientation_adjoints_to_moments(
    rendered: &RenderedMaps,
    d_beta: &[f64],
    d_tau: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = rendered.beta.len();
    let mut d_sil = vec![0.0; n];
    let mut d_c2 = vec![0.0; n];
    let mut d_s2 = vec![0.0; n];
    for p in 0..n {
        d_sil[p] += d_tau[p]; // tau is the accumulated opacity
        if d_beta[p] != 0.0 {
            let (c, s) = (rendered.moment_c[p], rendered.moment_s[p]);
            let r2 = c * c + s * s;
            if r2 > 1e-24 {
                d_c2[p] += d_beta[p] * (-s / (2.0 * r2));
                d_s2[p] += d_beta[p] * (c / (2.0 * r2));
            }
        }
    }
    (d_sil, d_c2, d_s2)
}

/// Chain Gaussian adjoints back to strand points: means sit at segment
/// midpoints, covariance and direction are functions of the segment vector.
pub fn backprop_to_strands(
    strands: &StrandSet,
    adjoints: &[GaussianAdjoint],
    width: f64,
    k_scale: f64,
) -> PointGrads {
    let mut grads: PointGrads = strands
        .strands
        .iter()
        .map(|s| vec![[0.0; 3]; s.points.len()])
        .collect();
    let mut g_idx = 0;
    for (i, strand) in strands.strands.iter().enumerate() {
        for seg in 0..strand.points.len() - 1 {
            let a = &adjoints[g_idx];
            g_idx += 1;
            let p0 = strand.points[seg];
            let p1 = strand.points[seg + 1];
            let d = vec3::sub(p1, p0);
            let s = vec3::norm2(d);
            if s <= 1e-300 {
                continue;
            }
            let len = s.sqrt();
            let b = vec3::scale(d, 1.0 / len);

            // Mean: midpoint.
            let half = vec3::scale(a.d_mean, 0.5);
            grads[i][seg] = vec3::add(grads[i][seg], half);
            grads[i][seg + 1] = vec3::add(grads[i][seg + 1], half);

            // Covariance: C = w^2 I + (k^2 - w^2/s) d d^T.
            let coeff = k_scale * k_scale - width * width / s;
            let dc_sym = a.d_cov;
            let mut dcd = [0.0; 3];
            for r in 0..3 {
                for c in 0..3 {
                    dcd[r] += (dc_sym[r][c] + dc_sym[c][r]) * d[c];
                }
            }
            let quad = vec3::dot(d, [
                dc_sym[0][0] * d[0] + dc_sym[0][1] * d[1] + dc_sym[0][2] * d[2],
                dc_sym[1][0] * d[0] + dc_sym[1][1] * d[1] + dc_sym[1][2] * d[2],
                dc_sym[2][0] * d[0] + dc_sym[2][1] * d[1] + dc_sym[2][2] * d[2],
            ]);
            let mut dd = vec3::scale(dcd, coeff);
            dd = vec3::add_scaled(dd, d, 2.0 * width * width / (s * s) * quad);

            // Direction: b = d / |d|.
            let db_dot_b = vec3::dot(a.d_dir, b);
            let db = vec3::scale(vec3::sub(a.d_dir, vec3::scale(b, db_dot_b)), 1.0 / len);
            dd = vec3::add(dd, db);

            grads[i][seg + 1] = vec3::add(grads[i][seg + 1], dd);
            grads[i][seg] = vec3::sub(grads[i][seg], dd);
        }
    }
    grads
}

/// Binary coverage mask of the faces accepted by `keep`, projected through
/// `camera` (flat fill, no depth test: a silhouette union).
pub fn rasterize_face_mask(
    mesh: &fur_core::Mesh,
    keep: impl Fn(usize) -> bool,
    camera: &Camera,
) -> Vec<bool> {
    let (w, h) = (camera.width, camera.height);
    let mut mask = vec![false; w * h];
    for f in 0..mesh.faces.len() {
        if !keep(f) {
            continue;
        }
        let mut screen = [[0.0f64; 2]; 3];
        let mut ok = true;
        for (k, &v) in mesh.faces[f].iter().enumerate() {
            let cam = camera.to_camera(mesh.vertices[v]);
            if cam[2] <= 1e-3 {
                ok = false;
                break;
            }
            screen[k] = camera.project(cam);
        }
        if !ok {
            continue;
        }
        let min_x = screen.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let max_x = screen.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        let min_y = screen.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
        let max_y = screen.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
        let x0 = min_x.floor().max(0.0) as usize;
        let x1 = (max_x.ceil() as i64).min(w as i64 - 1);
        let y0 = min_y.floor().max(0.0) as usize;
        let y1 = (max_y.ceil() as i64).min(h as i64 - 1);
        if x1 < 0 || y1 < 0 {
            continue;
        }
        let (a, b, c) = (screen[0], screen[1], screen[2]);
        let area = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        if area.abs() < 1e-12 {
            continue;
        }
        for y in y0..=y1 as usize {
            for x in x0..=x1 as usize {
                let p = [x as f64 + 0.5, y as f64 + 0.5];
                let w0 = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
                let w1 = (c[0] - b[0]) * (p[1] - b[1]) - (c[1] - b[1]) * (p[0] - b[0]);
                let w2 = (a[0] - c[0]) * (p[1] - c[1]) - (a[1] - c[1]) * (p[0] - c[0]);
                let inside = if area > 0.0 {
                    w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0
                } else {
                    w0 <= 0.0 && w1 <= 0.0 && w2 <= 0.0
                };
                if inside {
                    mask[y * w + x] = true;
                }
            }
        }
    }
    mask
}
