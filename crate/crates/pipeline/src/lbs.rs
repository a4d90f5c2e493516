//! Linear-blend-skinning template model and the three-stage fitting used to
//! localize part labels on a reconstructed mesh.

pub mod quadruped;

use std::path::Path;

use fur_core::{knn::KdTree, sample, vec3, Mesh, Pcg32};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

type Mat3 = [[f64; 3]; 3];

fn mat3_identity() -> Mat3 {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

fn mat3_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

fn mat3_mul_vec(a: &Mat3, v: [f64; 3]) -> [f64; 3] {
    [
        vec3::dot(a[0], v),
        vec3::dot(a[1], v),
        vec3::dot(a[2], v),
    ]
}

fn mat3_tmul_vec(a: &Mat3, v: [f64; 3]) -> [f64; 3] {
    [
        a[0][0] * v[0] + a[1][0] * v[1] + a[2][0] * v[2],
        a[0][1] * v[0] + a[1][1] * v[1] + a[2][1] * v[2],
        a[0][2] * v[0] + a[1][2] * v[1] + a[2][2] * v[2],
    ]
}

fn mat3_tmul(a: &Mat3, b: &Mat3) -> Mat3 {
    // a^T b
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                out[i][j] += a[k][i] * b[k][j];
            }
        }
    }
    out
}

fn mat3_mul_t(a: &Mat3, b: &Mat3) -> Mat3 {
    // a b^T
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                out[i][j] += a[i][k] * b[j][k];
            }
        }
    }
    out
}

fn outer(a: [f64; 3], b: [f64; 3]) -> Mat3 {
    [
        [a[0] * b[0], a[0] * b[1], a[0] * b[2]],
        [a[1] * b[0], a[1] * b[1], a[1] * b[2]],
        [a[2] * b[0], a[2] * b[1], a[2] * b[2]],
    ]
}

fn skew(v: [f64; 3]) -> Mat3 {
    [
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ]
}

/// Rodrigues rotation from an axis-angle vector.
pub fn rodrigues(theta: [f64; 3]) -> Mat3 {
    let angle = vec3::norm(theta);
    if angle < 1e-12 {
        // Second-order expansion keeps the map smooth through zero.
        let k = skew(theta);
        let k2 = mat3_mul(&k, &k);
        let mut r = mat3_identity();
        for i in 0..3 {
            for j in 0..3 {
                r[i][j] += k[i][j] + 0.5 * k2[i][j];
            }
        }
        return r;
    }
    let axis = vec3::scale(theta, 1.0 / angle);
    let k = skew(axis);
    let k2 = mat3_mul(&k, &k);
    let (s, c) = angle.sin_cos();
    let mut r = mat3_identity();
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] += s * k[i][j] + (1.0 - c) * k2[i][j];
        }
    }
    r
}

/// Partial derivatives of the Rodrigues map: dR/dtheta_i for i = 0, 1, 2
/// (Gallego & Yezzi closed form, with the limit at theta = 0).
pub fn rodrigues_jacobian(theta: [f64; 3]) -> [Mat3; 3] {
    let angle2 = vec3::norm2(theta);
    if angle2 < 1e-16 {
        let e = mat3_identity();
        return [skew(e[0]), skew([0.0, 1.0, 0.0]), skew([0.0, 0.0, 1.0])];
    }
    let r = rodrigues(theta);
    let mut out = [[[0.0; 3]; 3]; 3];
    for i in 0..3 {
        let mut e_i = [0.0; 3];
        e_i[i] = 1.0;
        // (I - R) e_i
        let re = mat3_mul_vec(&r, e_i);
        let ime = vec3::sub(e_i, re);
        let cross = vec3::cross(theta, ime);
        let mut m = skew(cross);
        let tskew = skew(theta);
        for a in 0..3 {
            for b in 0..3 {
                m[a][b] = (theta[i] * tskew[a][b] + m[a][b]) / angle2;
            }
        }
        out[i] = mat3_mul(&m, &r);
    }
    out
}

/// LBS template: a labeled mesh with blendshapes, skinning weights, a joint
/// regressor and a kinematic tree.
#[derive(Clone, Debug)]
pub struct LbsModel {
    pub template: Mesh,
    /// Per blendshape, per vertex 3D offset.
    pub blendshapes: Vec<Vec<[f64; 3]>>,
    /// Per vertex sparse (joint, weight); rows sum to one.
    pub weights: Vec<Vec<(usize, f64)>>,
    /// Per joint sparse (vertex, weight) regressing the joint position.
    pub joint_regressor: Vec<Vec<(usize, f64)>>,
    /// Parent index per joint; exactly one root (-1).
    pub parents: Vec<i64>,
}

/// Pose, shape and deformation parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitParams {
    pub betas: Vec<f64>,
    /// Axis-angle per joint.
    pub thetas: Vec<[f64; 3]>,
    pub translation: [f64; 3],
    /// Optional per-vertex free-form offsets (stage 3).
    pub offsets: Option<Vec<[f64; 3]>>,
}

impl FitParams {
    pub fn rest(model: &LbsModel) -> FitParams {
        FitParams {
            betas: vec![0.0; model.blendshapes.len()],
            thetas: vec![[0.0; 3]; model.parents.len()],
            translation: [0.0; 3],
            offsets: None,
        }
    }
}

impl LbsModel {
    pub fn n_joints(&self) -> usize {
        self.parents.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.template.vertices.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.template
            .validate()
            .map_err(|e| Error::InvalidInput(format!("template: {e}")))?;
        if self.weights.len() != self.n_vertices() {
            return Err(Error::InvalidInput("weight rows != vertex count".into()));
        }
        for (v, row) in self.weights.iter().enumerate() {
            let sum: f64 = row.iter().map(|(_, w)| w).sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidInput(format!(
                    "weight row {v} sums to {sum}"
                )));
            }
            if row.iter().any(|&(j, w)| j >= self.n_joints() || w < 0.0) {
                return Err(Error::InvalidInput(format!("bad weight entry at vertex {v}")));
            }
        }
        // Kinematic tree: single root, acyclic.
        let roots = self.parents.iter().filter(|&&p| p < 0).count();
        if roots != 1 {
            return Err(Error::InvalidInput(format!("{roots} roots in kinematic tree")));
        }
        for (j, &p) in self.parents.iter().enumerate() {
            if p >= 0 && p as usize >= j {
                return Err(Error::InvalidInput(
                    "parents must precede children (topological order)".into(),
                ));
            }
        }
        for shape in &self.blendshapes {
            if shape.len() != self.n_vertices() {
                return Err(Error::InvalidInput("blendshape size mismatch".into()));
            }
        }
        Ok(())
    }

    fn check_params(&self, params: &FitParams) -> Result<()> {
        if params.betas.len() != self.blendshapes.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} betas for {} blendshapes",
                params.betas.len(),
                self.blendshapes.len()
            )));
        }
        if params.thetas.len() != self.n_joints() {
            return Err(Error::DimensionMismatch(format!(
                "{} rotations for {} joints",
                params.thetas.len(),
                self.n_joints()
            )));
        }
        if let Some(d) = &params.offsets {
            if d.len() != self.n_vertices() {
                return Err(Error::DimensionMismatch("offsets size mismatch".into()));
            }
        }
        Ok(())
    }

    pub fn shaped_vertices(&self, betas: &[f64]) -> Vec<[f64; 3]> {
        let mut v = self.template.vertices.clone();
        for (beta, shape) in betas.iter().zip(&self.blendshapes) {
            if *beta == 0.0 {
                continue;
            }
            for (out, offset) in v.iter_mut().zip(shape) {
                *out = vec3::add_scaled(*out, *offset, *beta);
            }
        }
        v
    }

    pub fn regress_joints(&self, shaped: &[[f64; 3]]) -> Vec<[f64; 3]> {
        self.joint_regressor
            .iter()
            .map(|row| {
                let mut p = [0.0; 3];
                for &(v, w) in row {
                    p = vec3::add_scaled(p, shaped[v], w);
                }
                p
            })
            .collect()
    }

    /// Standard LBS forward: shape blend, joint regression, rotations
    /// composed along the tree, skinning, then global translation and
    /// per-vertex offsets.
    pub fn forward(&self, params: &FitParams) -> Result<Mesh> {
        self.check_params(params)?;
        let shaped = self.shaped_vertices(&params.betas);
        let joints = self.regress_joints(&shaped);
        let n_j = self.n_joints();

        let mut global_rot = vec![mat3_identity(); n_j];
        let mut global_t = vec![[0.0; 3]; n_j];
        for j in 0..n_j {
            let local_rot = rodrigues(params.thetas[j]);
            if self.parents[j] < 0 {
                global_rot[j] = local_rot;
                global_t[j] = joints[j];
            } else {
                let p = self.parents[j] as usize;
                let local_t = vec3::sub(joints[j], joints[p]);
                global_rot[j] = mat3_mul(&global_rot[p], &local_rot);
                global_t[j] = vec3::add(global_t[p], mat3_mul_vec(&global_rot[p], local_t));
            }
        }
        // Skinning transform removes the rest joint position.
        let skin: Vec<(Mat3, [f64; 3])> = (0..n_j)
            .map(|j| {
                let t = vec3::sub(global_t[j], mat3_mul_vec(&global_rot[j], joints[j]));
                (global_rot[j], t)
            })
            .collect();

        let mut out = self.template.clone();
        for (i, v) in out.vertices.iter_mut().enumerate() {
            let mut acc = [0.0; 3];
            for &(j, w) in &self.weights[i] {
                let (rot, t) = &skin[j];
                acc = vec3::add_scaled(acc, vec3::add(mat3_mul_vec(rot, shaped[i]), *t), w);
            }
            acc = vec3::add(acc, params.translation);
            if let Some(offsets) = &params.offsets {
                acc = vec3::add(acc, offsets[i]);
            }
            *v = acc;
        }
        Ok(out)
    }
}

/// Fitting energy weights (Chamfer has unit weight).
#[derive(Clone, Copy, Debug)]
pub struct EnergyWeights {
    pub laplacian: f64,
    pub edge: f64,
    pub normal: f64,
}

impl Default for EnergyWeights {
    fn default() -> Self {
        EnergyWeights {
            laplacian: 0.01,
            edge: 0.8,
            normal: 0.02,
        }
    }
}

/// Deterministic evaluation context: fixed model-surface sample locations
/// and cached template topology quantities.
pub struct EnergyContext {
    /// (face, barycentric) sampling of the model surface.
    pub model_samples: Vec<(usize, [f64; 3])>,
    pub weights: EnergyWeights,
    one_rings: Vec<Vec<usize>>,
    edges: Vec<(usize, usize, f64)>, // (v0, v1, rest length)
    interior: Vec<(usize, usize)>,   // adjacent face pairs
}

impl EnergyContext {
    pub fn new(model: &LbsModel, n_model_samples: usize, seed: u64) -> Result<EnergyContext> {
        let mut rng = Pcg32::new(seed, 0x10b5);
        let table = sample::AreaTable::new(&model.template)?;
        let model_samples = (0..n_model_samples)
            .map(|_| {
                let f = table.draw_face(&mut rng);
                (f, sample::uniform_barycentric::<f64>(&mut rng))
            })
            .collect();
        let one_rings = model.template.vertex_one_rings();
        let mut edges = Vec::new();
        for (a, b) in model.template.edge_face_counts().keys() {
            let rest = vec3::dist(model.template.vertices[*a], model.template.vertices[*b]);
            edges.push((*a, *b, rest));
        }
        edges.sort_unstable_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        let adjacency = model.template.face_adjacency()?;
        let mut interior = Vec::new();
        for (f, adj) in adjacency.iter().enumerate() {
            for &g in adj {
                if g != usize::MAX && g > f {
                    interior.push((f, g));
                }
            }
        }
        Ok(EnergyContext {
            model_samples,
            weights: EnergyWeights::default(),
            one_rings,
            edges,
            interior,
        })
    }
}

/// Value and per-deformed-vertex gradient of the fitting energy:
/// symmetric Chamfer + 0.01 Laplacian + 0.8 relative edge + 0.02 normal
/// agreement.
pub fn fit_energy_on_vertices(
    model: &LbsModel,
    deformed: &[[f64; 3]],
    target_samples: &[[f64; 3]],
    ctx: &EnergyContext,
) -> Result<(f64, Vec<[f64; 3]>)> {
    if target_samples.is_empty() {
        return Err(Error::InvalidInput("no target samples".into()));
    }
    let faces = &model.template.faces;
    let mut grad = vec![[0.0; 3]; deformed.len()];

    // Model surface points from fixed barycentric samples.
    let model_points: Vec<[f64; 3]> = ctx
        .model_samples
        .iter()
        .map(|&(f, bc)| {
            let [a, b, c] = faces[f];
            vec3::add(
                vec3::add(
                    vec3::scale(deformed[a], bc[0]),
                    vec3::scale(deformed[b], bc[1]),
                ),
                vec3::scale(deformed[c], bc[2]),
            )
        })
        .collect();

    // Symmetric Chamfer with fixed nearest assignments.
    let target_tree = KdTree::build(target_samples);
    let model_tree = KdTree::build(&model_points);
    let inv_m = 1.0 / model_points.len() as f64;
    let inv_t = 1.0 / target_samples.len() as f64;
    let mut chamfer = 0.0;
    let mut d_model_points = vec![[0.0; 3]; model_points.len()];
    for (s, &p) in model_points.iter().enumerate() {
        let (idx, d2) = target_tree.nearest_one(p).unwrap();
        chamfer += d2 * inv_m;
        let g = vec3::scale(vec3::sub(p, target_samples[idx]), 2.0 * inv_m);
        d_model_points[s] = vec3::add(d_model_points[s], g);
    }
    for &t in target_samples {
        let (idx, d2) = model_tree.nearest_one(t).unwrap();
        chamfer += d2 * inv_t;
        let g = vec3::scale(vec3::sub(model_points[idx], t), 2.0 * inv_t);
        d_model_points[idx] = vec3::add(d_model_points[idx], g);
    }
    for (&(f, bc), dmp) in ctx.model_samples.iter().zip(&d_model_points) {
        let [a, b, c] = faces[f];
        grad[a] = vec3::add_scaled(grad[a], *dmp, bc[0]);
        grad[b] = vec3::add_scaled(grad[b], *dmp, bc[1]);
        grad[c] = vec3::add_scaled(grad[c], *dmp, bc[2]);
    }

    // Uniform Laplacian smoothness.
    let mut laplacian = 0.0;
    if ctx.weights.laplacian != 0.0 {
        let inv_v = 1.0 / deformed.len() as f64;
        for (i, ring) in ctx.one_rings.iter().enumerate() {
            if ring.is_empty() {
                continue;
            }
            let inv_r = 1.0 / ring.len() as f64;
            let mut mean = [0.0; 3];
            for &j in ring {
                mean = vec3::add(mean, deformed[j]);
            }
            mean = vec3::scale(mean, inv_r);
            let r = vec3::sub(deformed[i], mean);
            laplacian += vec3::norm2(r) * inv_v;
            let g = vec3::scale(r, 2.0 * inv_v * ctx.weights.laplacian);
            grad[i] = vec3::add(grad[i], g);
            for &j in ring {
                grad[j] = vec3::add_scaled(grad[j], g, -inv_r);
            }
        }
    }

    // Relative edge-length preservation.
    let mut edge_term = 0.0;
    if ctx.weights.edge != 0.0 {
        let inv_e = 1.0 / ctx.edges.len() as f64;
        for &(a, b, rest) in &ctx.edges {
            let d = vec3::sub(deformed[b], deformed[a]);
            let len = vec3::norm(d);
            let rel = (len - rest) / rest;
            edge_term += rel * rel * inv_e;
            if len > 1e-12 {
                let coeff = 2.0 * rel * inv_e / (rest * len) * ctx.weights.edge;
                let g = vec3::scale(d, coeff);
                grad[b] = vec3::add(grad[b], g);
                grad[a] = vec3::sub(grad[a], g);
            }
        }
    }

    // Normal agreement across interior edges: 1 - mean cosine.
    let mut normal_term = 0.0;
    if ctx.weights.normal != 0.0 {
        let inv_p = 1.0 / ctx.interior.len() as f64;
        let face_normal = |f: usize| -> ([f64; 3], f64, [usize; 3]) {
            let [a, b, c] = faces[f];
            let n = vec3::cross(
                vec3::sub(deformed[b], deformed[a]),
                vec3::sub(deformed[c], deformed[a]),
            );
            let len = vec3::norm(n);
            (n, len, [a, b, c])
        };
        let mut mean_cos = 0.0;
        for &(f, g) in &ctx.interior {
            let (nf, lf, vf) = face_normal(f);
            let (ng, lg, vg) = face_normal(g);
            if lf <= 1e-12 || lg <= 1e-12 {
                continue;
            }
            let uf = vec3::scale(nf, 1.0 / lf);
            let ug = vec3::scale(ng, 1.0 / lg);
            let cos = vec3::dot(uf, ug);
            mean_cos += cos * inv_p;
            // d(-cos)/dn for each face, through the normalization.
            let scale = -inv_p * ctx.weights.normal;
            let d_uf = vec3::scale(ug, scale);
            let d_ug = vec3::scale(uf, scale);
            let d_nf = vec3::scale(
                vec3::sub(d_uf, vec3::scale(uf, vec3::dot(uf, d_uf))),
                1.0 / lf,
            );
            let d_ng = vec3::scale(
                vec3::sub(d_ug, vec3::scale(ug, vec3::dot(ug, d_ug))),
                1.0 / lg,
            );
            // n = (b - a) x (c - a): adjoints via the cross-product rule.
            let mut apply = |verts: [usize; 3], dn: [f64; 3]| {
                let (a, b, c) = (verts[0], verts[1], verts[2]);
                let u = vec3::sub(deformed[b], deformed[a]);
                let v = vec3::sub(deformed[c], deformed[a]);
                let db = vec3::cross(v, dn);
                let dc = vec3::cross(dn, u);
                grad[b] = vec3::add(grad[b], db);
                grad[c] = vec3::add(grad[c], dc);
                grad[a] = vec3::sub(grad[a], vec3::add(db, dc));
            };
            apply(vf, d_nf);
            apply(vg, d_ng);
        }
        normal_term = 1.0 - mean_cos;
    }

    let total = chamfer
        + ctx.weights.laplacian * laplacian
        + ctx.weights.edge * edge_term
        + ctx.weights.normal * normal_term;
    Ok((total, grad))
}

/// Fitting energy at given parameters (forward + vertex-energy).
pub fn fit_energy(
    model: &LbsModel,
    params: &FitParams,
    target_samples: &[[f64; 3]],
    ctx: &EnergyContext,
) -> Result<f64> {
    let deformed = model.forward(params)?;
    Ok(fit_energy_on_vertices(model, &deformed.vertices, target_samples, ctx)?.0)
}

/// Gradient of the fitting energy with respect to every parameter group.
pub struct ParamGrads {
    pub betas: Vec<f64>,
    pub thetas: Vec<[f64; 3]>,
    pub translation: [f64; 3],
    pub offsets: Vec<[f64; 3]>,
}

/// Energy and its full analytic gradient.
pub fn fit_energy_grad(
    model: &LbsModel,
    params: &FitParams,
    target_samples: &[[f64; 3]],
    ctx: &EnergyContext,
) -> Result<(f64, ParamGrads)> {
    model.check_params(params)?;
    let shaped = model.shaped_vertices(&params.betas);
    let joints = model.regress_joints(&shaped);
    let n_j = model.n_joints();

    // Forward kinematics, keeping locals for the backward pass.
    let mut local_rot = Vec::with_capacity(n_j);
    let mut global_rot = vec![mat3_identity(); n_j];
    let mut global_t = vec![[0.0; 3]; n_j];
    for j in 0..n_j {
        let rot = rodrigues(params.thetas[j]);
        if model.parents[j] < 0 {
            global_rot[j] = rot;
            global_t[j] = joints[j];
        } else {
            let p = model.parents[j] as usize;
            global_rot[j] = mat3_mul(&global_rot[p], &rot);
            global_t[j] = vec3::add(
                global_t[p],
                mat3_mul_vec(&global_rot[p], vec3::sub(joints[j], joints[p])),
            );
        }
        local_rot.push(rot);
    }
    let skin: Vec<(Mat3, [f64; 3])> = (0..n_j)
        .map(|j| {
            let t = vec3::sub(global_t[j], mat3_mul_vec(&global_rot[j], joints[j]));
            (global_rot[j], t)
        })
        .collect();

    let mut deformed = vec![[0.0; 3]; shaped.len()];
    for (i, out) in deformed.iter_mut().enumerate() {
        let mut acc = [0.0; 3];
        for &(j, w) in &model.weights[i] {
            let (rot, t) = &skin[j];
            acc = vec3::add_scaled(acc, vec3::add(mat3_mul_vec(rot, shaped[i]), *t), w);
        }
        acc = vec3::add(acc, params.translation);
        if let Some(offsets) = &params.offsets {
            acc = vec3::add(acc, offsets[i]);
        }
        *out = acc;
    }

    let (energy, d_vertices) = fit_energy_on_vertices(model, &deformed, target_samples, ctx)?;

    // Backward. Translation and offsets are direct.
    let mut d_translation = [0.0; 3];
    for dv in &d_vertices {
        d_translation = vec3::add(d_translation, *dv);
    }
    let d_offsets = d_vertices.clone();

    // Skinning backward.
    let mut d_skin_rot = vec![[[0.0; 3]; 3]; n_j];
    let mut d_skin_t = vec![[0.0; 3]; n_j];
    let mut d_shaped = vec![[0.0; 3]; shaped.len()];
    for (i, dv) in d_vertices.iter().enumerate() {
        for &(j, w) in &model.weights[i] {
            let wdv = vec3::scale(*dv, w);
            let o = outer(wdv, shaped[i]);
            for a in 0..3 {
                for b in 0..3 {
                    d_skin_rot[j][a][b] += o[a][b];
                }
            }
            d_skin_t[j] = vec3::add(d_skin_t[j], wdv);
            d_shaped[i] = vec3::add(d_shaped[i], mat3_tmul_vec(&skin[j].0, wdv));
        }
    }

    // skin = (G_rot, G_t - G_rot J_j).
    let mut d_global_rot = d_skin_rot;
    let mut d_global_t = d_skin_t.clone();
    let mut d_joints = vec![[0.0; 3]; n_j];
    for j in 0..n_j {
        let o = outer(d_skin_t[j], joints[j]);
        for a in 0..3 {
            for b in 0..3 {
                d_global_rot[j][a][b] -= o[a][b];
            }
        }
        let back = mat3_tmul_vec(&global_rot[j], d_skin_t[j]);
        d_joints[j] = vec3::sub(d_joints[j], back);
    }

    // Kinematic chain backward, children before parents.
    let mut d_local_rot = vec![[[0.0; 3]; 3]; n_j];
    let mut d_thetas = vec![[0.0; 3]; n_j];
    for j in (0..n_j).rev() {
        if model.parents[j] < 0 {
            d_local_rot[j] = d_global_rot[j];
            d_joints[j] = vec3::add(d_joints[j], d_global_t[j]);
        } else {
            let p = model.parents[j] as usize;
            let local_t = vec3::sub(joints[j], joints[p]);
            // G_rot[j] = G_rot[p] local_rot[j]
            let add_rot = mat3_tmul(&global_rot[p], &d_global_rot[j]);
            for a in 0..3 {
                for b in 0..3 {
                    d_local_rot[j][a][b] += add_rot[a][b];
                }
            }
            let dp_from_rot = mat3_mul_t(&d_global_rot[j], &local_rot[j]);
            // G_t[j] = G_t[p] + G_rot[p] local_t
            let dp_from_t = outer(d_global_t[j], local_t);
            for a in 0..3 {
                for b in 0..3 {
                    d_global_rot[p][a][b] += dp_from_rot[a][b] + dp_from_t[a][b];
                }
            }
            let dt_local = mat3_tmul_vec(&global_rot[p], d_global_t[j]);
            d_joints[j] = vec3::add(d_joints[j], dt_local);
            d_joints[p] = vec3::sub(d_joints[p], dt_local);
            d_global_t[p] = vec3::add(d_global_t[p], d_global_t[j]);
        }
        // Rotation parameters via the Rodrigues Jacobian.
        let jac = rodrigues_jacobian(params.thetas[j]);
        for i in 0..3 {
            let mut acc = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    acc += d_local_rot[j][a][b] * jac[i][a][b];
                }
            }
            d_thetas[j][i] = acc;
        }
    }

    // Joints regress from shaped vertices.
    for (j, row) in model.joint_regressor.iter().enumerate() {
        for &(v, w) in row {
            d_shaped[v] = vec3::add_scaled(d_shaped[v], d_joints[j], w);
        }
    }

    // Blendshape coefficients.
    let mut d_betas = vec![0.0; model.blendshapes.len()];
    for (b, shape) in model.blendshapes.iter().enumerate() {
        let mut acc = 0.0;
        for (ds, offset) in d_shaped.iter().zip(shape) {
            acc += vec3::dot(*ds, *offset);
        }
        d_betas[b] = acc;
    }

    Ok((
        energy,
        ParamGrads {
            betas: d_betas,
            thetas: d_thetas,
            translation: d_translation,
            offsets: d_offsets,
        },
    ))
}

/// Configuration of the staged fit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitConfig {
    /// Iterations per stage.
    pub stage_iters: [usize; 3],
    /// Adam learning rate per stage.
    pub stage_lr: [f64; 3],
    /// Target surface sample count.
    pub target_samples: usize,
    /// Model surface sample count for the Chamfer term.
    pub model_samples: usize,
    pub seed: u64,
    /// Consecutive energy increases tolerated before aborting a stage.
    pub patience: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            stage_iters: [250, 250, 150],
            stage_lr: [1e-2, 1e-2, 1e-3],
            target_samples: 20000,
            model_samples: 2500,
            seed: 0,
            patience: 40,
        }
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: usize,
}

impl Adam {
    fn new(n: usize) -> Adam {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64, mask: &[bool]) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t as i32);
        let c2 = 1.0 - B2.powi(self.t as i32);
        for i in 0..params.len() {
            if !mask[i] {
                continue;
            }
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + EPS);
        }
    }
}

fn pack(params: &FitParams, n_v: usize) -> Vec<f64> {
    let mut flat = Vec::new();
    flat.extend_from_slice(&params.translation);
    for t in &params.thetas {
        flat.extend_from_slice(t);
    }
    flat.extend_from_slice(&params.betas);
    match &params.offsets {
        Some(d) => {
            for o in d {
                flat.extend_from_slice(o);
            }
        }
        None => flat.extend(std::iter::repeat(0.0).take(3 * n_v)),
    }
    flat
}

fn unpack(flat: &[f64], n_j: usize, n_b: usize, n_v: usize, with_offsets: bool) -> FitParams {
    let mut thetas = Vec::with_capacity(n_j);
    for j in 0..n_j {
        thetas.push([flat[3 + 3 * j], flat[4 + 3 * j], flat[5 + 3 * j]]);
    }
    let beta0 = 3 + 3 * n_j;
    let betas = flat[beta0..beta0 + n_b].to_vec();
    let off0 = beta0 + n_b;
    let offsets = with_offsets.then(|| {
        (0..n_v)
            .map(|v| [flat[off0 + 3 * v], flat[off0 + 3 * v + 1], flat[off0 + 3 * v + 2]])
            .collect()
    });
    FitParams {
        betas,
        thetas,
        translation: [flat[0], flat[1], flat[2]],
        offsets,
    }
}

/// Three-stage fit: (1) global translation and root rotation, (2) plus shape
/// and all joint rotations, (3) plus per-vertex offsets. Deterministic for a
/// fixed seed; a stage aborts back to its best parameters after `patience`
/// consecutive energy increases.
pub fn fit(model: &LbsModel, target: &Mesh, stages: usize, config: &FitConfig) -> Result<FitParams> {
    if !(1..=3).contains(&stages) {
        return Err(Error::InvalidInput(format!("stages must be 1..=3, got {stages}")));
    }
    model.validate()?;
    if config.target_samples < 1000 {
        return Err(Error::InvalidInput(
            "need at least 1000 target samples".into(),
        ));
    }
    let target_points: Vec<[f64; 3]> = sample::sample_surface(target, config.target_samples, config.seed)?
        .iter()
        .map(|s| s.position)
        .collect();
    let ctx = EnergyContext::new(model, config.model_samples, config.seed.wrapping_add(1))?;

    let (n_j, n_b, n_v) = (model.n_joints(), model.blendshapes.len(), model.n_vertices());
    let n_params = 3 + 3 * n_j + n_b + 3 * n_v;
    let mut flat = pack(&FitParams::rest(model), n_v);

    let root = model.parents.iter().position(|&p| p < 0).unwrap();
    for stage in 0..stages {
        let mut mask = vec![false; n_params];
        // Stage 1: translation + root rotation.
        mask[0] = true;
        mask[1] = true;
        mask[2] = true;
        for d in 0..3 {
            mask[3 + 3 * root + d] = true;
        }
        if stage >= 1 {
            for i in 3..3 + 3 * n_j + n_b {
                mask[i] = true;
            }
        }
        if stage >= 2 {
            for i in 3 + 3 * n_j + n_b..n_params {
                mask[i] = true;
            }
        }

        let mut adam = Adam::new(n_params);
        let mut best_flat = flat.clone();
        let mut best_energy = f64::INFINITY;
        let mut bad_streak = 0;
        for _ in 0..config.stage_iters[stage] {
            let params = unpack(&flat, n_j, n_b, n_v, stage >= 2);
            let (energy, grads) = fit_energy_grad(model, &params, &target_points, &ctx)?;
            if !energy.is_finite() {
                return Err(Error::Diverged {
                    iteration: adam.t,
                    reason: "non-finite energy".into(),
                });
            }
            if energy < best_energy {
                best_energy = energy;
                best_flat.copy_from_slice(&flat);
                bad_streak = 0;
            } else {
                bad_streak += 1;
                if bad_streak > config.patience {
                    break; // divergence guard: fall back to the best seen
                }
            }
            // Pack gradient in the same layout.
            let mut g = Vec::with_capacity(n_params);
            g.extend_from_slice(&grads.translation);
            for t in &grads.thetas {
                g.extend_from_slice(t);
            }
            g.extend_from_slice(&grads.betas);
            for o in &grads.offsets {
                g.extend_from_slice(o);
            }
            adam.step(&mut flat, &g, config.stage_lr[stage], &mask);
        }
        flat.copy_from_slice(&best_flat);
    }
    Ok(unpack(&flat, n_j, n_b, n_v, stages >= 3))
}

/// Serialize the model: mesh as PLY (with labels), rig as a JSON sidecar.
pub fn save_model(model: &LbsModel, ply_path: impl AsRef<Path>, rig_path: impl AsRef<Path>) -> Result<()> {
    fur_core::io::write_ply(&model.template, ply_path)?;
    #[derive(Serialize)]
    struct Rig<'a> {
        parents: &'a [i64],
        weights: Vec<[serde_json::Value; 3]>,
        joint_regressor: Vec<[serde_json::Value; 3]>,
        blendshapes: Vec<Vec<f32>>,
    }
    let weights = model
        .weights
        .iter()
        .enumerate()
        .flat_map(|(v, row)| {
            row.iter().map(move |&(j, w)| {
                [
                    serde_json::json!(v),
                    serde_json::json!(j),
                    serde_json::json!(w),
                ]
            })
        })
        .collect();
    let joint_regressor = model
        .joint_regressor
        .iter()
        .enumerate()
        .flat_map(|(j, row)| {
            row.iter().map(move |&(v, w)| {
                [
                    serde_json::json!(j),
                    serde_json::json!(v),
                    serde_json::json!(w),
                ]
            })
        })
        .collect();
    let blendshapes = model
        .blendshapes
        .iter()
        .map(|shape| {
            shape
                .iter()
                .flat_map(|o| o.iter().map(|&v| v as f32))
                .collect()
        })
        .collect();
    let rig = Rig {
        parents: &model.parents,
        weights,
        joint_regressor,
        blendshapes,
    };
    std::fs::write(rig_path, serde_json::to_string(&rig)?)?;
    Ok(())
}

pub fn load_model(ply_path: impl AsRef<Path>, rig_path: impl AsRef<Path>) -> Result<LbsModel> {
    let template: Mesh = fur_core::io::read_ply(ply_path)?;
    #[derive(Deserialize)]
    struct Rig {
        parents: Vec<i64>,
        weights: Vec<(usize, usize, f64)>,
        joint_regressor: Vec<(usize, usize, f64)>,
        blendshapes: Vec<Vec<f32>>,
    }
    let rig: Rig = serde_json::from_str(&std::fs::read_to_string(rig_path)?)?;
    let mut weights = vec![Vec::new(); template.vertices.len()];
    for (v, j, w) in rig.weights {
        weights[v].push((j, w));
    }
    let mut joint_regressor = vec![Vec::new(); rig.parents.len()];
    for (j, v, w) in rig.joint_regressor {
        joint_regressor[j].push((v, w));
    }
    let blendshapes = rig
        .blendshapes
        .iter()
        .map(|flat| {
            flat.chunks(3)
                .map(|c| [c[0] as f64, c[1] as f64, c[2] as f64])
                .collect()
        })
        .collect();
    let model = LbsModel {
        template,
        blendshapes,
        weights,
        joint_regressor,
        parents: rig.parents,
    };
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lbs::quadruped::synthetic_quadruped;

    #[test]
    fn rodrigues_basics() {
        let r = rodrigues([0.0, 0.0, std::f64::consts::FRAC_PI_2]);
        let v = mat3_mul_vec(&r, [1.0, 0.0, 0.0]);
        assert!(vec3::dist(v, [0.0, 1.0, 0.0]) < 1e-12);
        let r0 = rodrigues([0.0; 3]);
        assert_eq!(r0, mat3_identity());
    }

    #[test]
    fn rodrigues_jacobian_matches_fd() {
        let mut rng = Pcg32::seeded(3);
        for _ in 0..20 {
            let theta = [
                rng.next_f64() * 2.0 - 1.0,
                rng.next_f64() * 2.0 - 1.0,
                rng.next_f64() * 2.0 - 1.0,
            ];
            let jac = rodrigues_jacobian(theta);
            let h = 1e-7;
            for i in 0..3 {
                let mut tp = theta;
                let mut tm = theta;
                tp[i] += h;
                tm[i] -= h;
                let rp = rodrigues(tp);
                let rm = rodrigues(tm);
                for a in 0..3 {
                    for b in 0..3 {
                        let fd = (rp[a][b] - rm[a][b]) / (2.0 * h);
                        assert!(
                            (jac[i][a][b] - fd).abs() < 1e-6,
                            "theta {theta:?} i {i} ({a},{b}): {} vs {fd}",
                            jac[i][a][b]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn forward_identity_and_translation() {
        let model = synthetic_quadruped();
        model.validate().unwrap();
        let rest = FitParams::rest(&model);
        let out = model.forward(&rest).unwrap();
        for (a, b) in out.vertices.iter().zip(&model.template.vertices) {
            assert!(vec3::dist(*a, *b) < 1e-9, "identity pose moved a vertex");
        }
        let mut moved = rest.clone();
        moved.translation = [1.0, 2.0, 3.0];
        let out = model.forward(&moved).unwrap();
        for (a, b) in out.vertices.iter().zip(&model.template.vertices) {
            assert!(vec3::dist(*a, vec3::add(*b, [1.0, 2.0, 3.0])) < 1e-9);
        }
    }

    #[test]
    fn single_joint_rotation_oracle() {
        // One joint at the origin, one fully weighted vertex at (1,0,0),
        // rotated 90 degrees about z.
        let template = Mesh::new(
            vec![[1.0, 0.0, 0.0], [1.1, 0.0, 0.0], [1.0, 0.1, 0.0]],
            vec![[0, 1, 2]],
        );
        let model = LbsModel {
            template,
            blendshapes: vec![],
            weights: vec![vec![(0, 1.0)]; 3],
            joint_regressor: vec![vec![]], // empty row: joint at the origin
            parents: vec![-1],
        };
        let mut params = FitParams::rest(&model);
        params.thetas[0] = [0.0, 0.0, std::f64::consts::FRAC_PI_2];
        let out = model.forward(&params).unwrap();
        assert!(vec3::dist(out.vertices[0], [0.0, 1.0, 0.0]) < 1e-6);
    }

    #[test]
    fn zero_pose_is_affine_shape_map() {
        let model = synthetic_quadruped();
        let mut params = FitParams::rest(&model);
        params.betas[0] = 0.7;
        params.translation = [0.5, -0.2, 0.9];
        let out = model.forward(&params).unwrap();
        for (i, v) in out.vertices.iter().enumerate() {
            let expect = vec3::add(
                vec3::add_scaled(model.template.vertices[i], model.blendshapes[0][i], 0.7),
                params.translation,
            );
            assert!(vec3::dist(*v, expect) < 1e-9, "vertex {i}");
        }
    }

    #[test]
    fn self_fit_energy_is_tiny() {
        // Target samples drawn from the model surface itself: the Chamfer
        // term collapses to the sampling floor, and with coincident samples
        // it is exactly zero.
        let model = synthetic_quadruped();
        let params = FitParams::rest(&model);
        let mesh = model.forward(&params).unwrap();
        let ctx = EnergyContext::new(&model, 2000, 1).unwrap();
        let targets: Vec<[f64; 3]> = ctx
            .model_samples
            .iter()
            .map(|&(f, bc)| {
                let [a, b, c] = model.template.faces[f];
                vec3::add(
                    vec3::add(
                        vec3::scale(mesh.vertices[a], bc[0]),
                        vec3::scale(mesh.vertices[b], bc[1]),
                    ),
                    vec3::scale(mesh.vertices[c], bc[2]),
                )
            })
            .collect();
        let (chamfer_only, _) = {
            let mut c = EnergyContext::new(&model, 2000, 1).unwrap();
            c.weights = EnergyWeights {
                laplacian: 0.0,
                edge: 0.0,
                normal: 0.0,
            };
            fit_energy_on_vertices(&model, &mesh.vertices, &targets, &c).unwrap()
        };
        let diag = mesh.bbox_diagonal();
        assert!(chamfer_only < 1e-4 * diag, "chamfer {chamfer_only}");
        // At rest the edge term vanishes; the Laplacian and normal terms
        // measure the template's own coarseness and stay well below the
        // Chamfer scale of any real misalignment.
        let (e, _) = fit_energy_on_vertices(&model, &mesh.vertices, &targets, &ctx).unwrap();
        assert!(e < 1.0, "energy {e}");
    }

    #[test]
    fn energy_gradient_matches_fd() {
        let model = synthetic_quadruped();
        let mut rng = Pcg32::seeded(8);
        let target_mesh = model
            .forward(&FitParams {
                betas: vec![0.3, -0.2, 0.1, 0.05],
                thetas: {
                    let mut t = vec![[0.0; 3]; model.n_joints()];
                    t[0] = [0.05, -0.1, 0.2];
                    t[3] = [0.1, 0.0, -0.1];
                    t
                },
                translation: [1.0, -0.5, 0.3],
                offsets: None,
            })
            .unwrap();
        let targets: Vec<[f64; 3]> = sample::sample_surface(&target_mesh, 1500, 2)
            .unwrap()
            .iter()
            .map(|s| s.position)
            .collect();
        let ctx = EnergyContext::new(&model, 800, 3).unwrap();

        // Random evaluation point (all parameter groups nonzero).
        let n_v = model.n_vertices();
        let params = FitParams {
            betas: vec![0.1, 0.05, -0.1, 0.2],
            thetas: (0..model.n_joints())
                .map(|_| {
                    [
                        rng.next_f64() * 0.2 - 0.1,
                        rng.next_f64() * 0.2 - 0.1,
                        rng.next_f64() * 0.2 - 0.1,
                    ]
                })
                .collect(),
            translation: [0.3, 0.1, -0.2],
            offsets: Some(
                (0..n_v)
                    .map(|_| {
                        [
                            rng.next_f64() * 0.1 - 0.05,
                            rng.next_f64() * 0.1 - 0.05,
                            rng.next_f64() * 0.1 - 0.05,
                        ]
                    })
                    .collect(),
            ),
        };
        let (_, grads) = fit_energy_grad(&model, &params, &targets, &ctx).unwrap();
        let eval = |p: &FitParams| fit_energy(&model, p, &targets, &ctx).unwrap();

        // 50 random directional derivatives in the full parameter space.
        // Directions mix every coordinate, which keeps the check well above
        // the Chamfer assignment-switching noise of single-coordinate steps.
        let h = 1e-5;
        for trial in 0..50 {
            let mut dir_t = [0.0; 3];
            let mut dir_theta = vec![[0.0; 3]; model.n_joints()];
            let mut dir_beta = vec![0.0; 4];
            let mut dir_off = vec![[0.0; 3]; n_v];
            let mut norm2 = 0.0;
            for v in dir_t.iter_mut() {
                *v = rng.next_f64() - 0.5;
                norm2 += *v * *v;
            }
            for t in dir_theta.iter_mut() {
                for v in t.iter_mut() {
                    *v = rng.next_f64() - 0.5;
                    norm2 += *v * *v;
                }
            }
            for v in dir_beta.iter_mut() {
                *v = rng.next_f64() - 0.5;
                norm2 += *v * *v;
            }
            for o in dir_off.iter_mut() {
                for v in o.iter_mut() {
                    *v = rng.next_f64() - 0.5;
                    norm2 += *v * *v;
                }
            }
            let inv = 1.0 / norm2.sqrt();

            let shifted = |sign: f64| -> FitParams {
                let mut p = params.clone();
                let s = sign * h * inv;
                for d in 0..3 {
                    p.translation[d] += s * dir_t[d];
                }
                for (t, dt) in p.thetas.iter_mut().zip(&dir_theta) {
                    for d in 0..3 {
                        t[d] += s * dt[d];
                    }
                }
                for (b, db) in p.betas.iter_mut().zip(&dir_beta) {
                    *b += s * db;
                }
                for (o, dof) in p.offsets.as_mut().unwrap().iter_mut().zip(&dir_off) {
                    for d in 0..3 {
                        o[d] += s * dof[d];
                    }
                }
                p
            };
            let fd = (eval(&shifted(1.0)) - eval(&shifted(-1.0))) / (2.0 * h);

            let mut analytic = 0.0;
            for d in 0..3 {
                analytic += grads.translation[d] * dir_t[d] * inv;
            }
            for (g, dt) in grads.thetas.iter().zip(&dir_theta) {
                for d in 0..3 {
                    analytic += g[d] * dt[d] * inv;
                }
            }
            for (g, db) in grads.betas.iter().zip(&dir_beta) {
                analytic += g * db * inv;
            }
            for (g, dof) in grads.offsets.iter().zip(&dir_off) {
                for d in 0..3 {
                    analytic += g[d] * dof[d] * inv;
                }
            }
            let denom = fd.abs().max(analytic.abs()).max(1e-8);
            assert!(
                (analytic - fd).abs() / denom < 1e-4,
                "trial {trial}: {analytic} vs {fd}"
            );
        }
    }

    #[test]
    fn divergence_guard_returns_last_good_params() {
        // An absurd learning rate makes the energy climb immediately; the
        // guard must abort the stage and keep the best parameters finite.
        let model = synthetic_quadruped();
        let mut truth = FitParams::rest(&model);
        truth.translation = [2.0, 0.0, 0.0];
        let target = model.forward(&truth).unwrap();
        let config = FitConfig {
            stage_iters: [80, 0, 0],
            stage_lr: [50.0, 1e-2, 1e-3],
            target_samples: 1500,
            model_samples: 600,
            seed: 2,
            patience: 5,
            ..FitConfig::default()
        };
        let params = fit(&model, &target, 1, &config).unwrap();
        assert!(params.translation.iter().all(|v| v.is_finite()));
        assert!(params.thetas.iter().flatten().all(|v| v.is_finite()));
        // The guard kept something no worse than the rest pose.
        let ctx = EnergyContext::new(&model, 600, 3).unwrap();
        let targets: Vec<[f64; 3]> = sample::sample_surface(&target, 1500, 2)
            .unwrap()
            .iter()
            .map(|s| s.position)
            .collect();
        let rest_energy = fit_energy(&model, &FitParams::rest(&model), &targets, &ctx).unwrap();
        let kept_energy = fit_energy(&model, &params, &targets, &ctx).unwrap();
        assert!(kept_energy <= rest_energy + 1e-9);
    }

    #[test]
    fn model_save_load_round_trip() {
        let dir = std::env::temp_dir().join("fur_lbs_test");
        std::fs::create_dir_all(&dir).unwrap();
        let model = synthetic_quadruped();
        let ply = dir.join("tpl.ply");
        let rig = dir.join("tpl.rig.json");
        save_model(&model, &ply, &rig).unwrap();
        let back = load_model(&ply, &rig).unwrap();
        assert_eq!(back.parents, model.parents);
        assert_eq!(back.n_vertices(), model.n_vertices());
        assert_eq!(back.blendshapes.len(), model.blendshapes.len());
        // Skinning weights survive (spot check).
        assert_eq!(back.weights[10].len(), model.weights[10].len());
    }
}
