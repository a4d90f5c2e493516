//! The strand-field training loop: root sampling, forward decode, loss
//! evaluation, moment-based gradient steps, convergence reporting, and final
//! strand generation.

use std::io::Write;

use fur_core::{sample, tangent, vec3, Frame, Grid, Mesh, Pcg32};
use serde::{Deserialize, Serialize};

use crate::annotation::VertexAnnotation;
use crate::losses::{self, GeometricInputs, LossBreakdown, LossWeights};
use crate::render::{self, Camera, RenderOptions};
use crate::strand::{
    gaussian_segments, RootSpec, StrandField, StrandSet, K_SCALE_DEFAULT, STRAND_WIDTH,
};
use crate::{Error, Result};

/// Image supervision for one view.
#[derive(Clone, Debug)]
pub struct ViewSupervision {
    pub camera: Camera,
    pub target_silhouette: Vec<f64>,
    pub target_beta: Vec<f64>,
    pub mask: Vec<bool>,
}

/// Everything the optimizer consumes.
pub struct Scene {
    /// Sample pool on the full (furred) surface for the Chamfer term.
    pub furred_samples: Vec<[f64; 3]>,
    pub bald_mesh: Mesh,
    pub defurred_sdf: Grid,
    /// Localized annotations on the bald mesh vertices.
    pub vertex_ann: Vec<VertexAnnotation>,
    /// Per-face frames of the bald mesh (resolved tangent field).
    pub frames: Vec<Frame>,
    /// Faces whose three vertices all carry positive fur length.
    pub non_bald_faces: Vec<bool>,
    pub views: Vec<ViewSupervision>,
}

impl Scene {
    /// Assemble a scene from the pipeline stage outputs.
    pub fn assemble(
        furred_mesh: &Mesh,
        bald_mesh: Mesh,
        vertex_ann: Vec<VertexAnnotation>,
        defurred_sdf: Grid,
        tangent_smoothing_iters: usize,
        furred_sample_pool: usize,
        seed: u64,
    ) -> Result<Scene> {
        if vertex_ann.len() != bald_mesh.vertices.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} annotations for {} bald vertices",
                vertex_ann.len(),
                bald_mesh.vertices.len()
            )));
        }
        let field = tangent::face_direction_field(&bald_mesh, tangent_smoothing_iters)?;
        let signed = tangent::resolve_signs(&bald_mesh, &field)?;
        let frames: Vec<Frame> = (0..bald_mesh.faces.len())
            .map(|f| tangent::tbn_at(&bald_mesh, &signed, f))
            .collect::<std::result::Result<_, _>>()?;
        let non_bald_faces = bald_mesh
            .faces
            .iter()
            .map(|tri| tri.iter().all(|&v| vertex_ann[v].length_cm > 0.0))
            .collect();
        let furred_samples = sample::sample_surface(furred_mesh, furred_sample_pool, seed)?
            .iter()
            .map(|s| s.position)
            .collect();
        Ok(Scene {
            furred_samples,
            bald_mesh,
            defurred_sdf,
            vertex_ann,
            frames,
            non_bald_faces,
            views: Vec::new(),
        })
    }

    /// Area-weighted roots on non-bald faces; annotation data comes from the
    /// nearest vertex of the sampled face.
    pub fn sample_roots(&self, n: usize, seed: u64, stream: u64) -> Result<Vec<RootSpec>> {
        let table =
            sample::AreaTable::with_face_filter(&self.bald_mesh, |f| self.non_bald_faces[f])
                .map_err(|_| Error::InvalidInput("no non-bald area to root strands on".into()))?;
        let mut rng = Pcg32::new(seed, stream);
        let mut roots = Vec::with_capacity(n);
        for _ in 0..n {
            let face = table.draw_face(&mut rng);
            let bary = sample::uniform_barycentric::<f64>(&mut rng);
            let s = sample::sample_at(&self.bald_mesh, face, bary);
            let tri = self.bald_mesh.faces[face];
            // Nearest of the face's vertices.
            let mut nearest = tri[0];
            let mut best = f64::INFINITY;
            for &v in &tri {
                let d = vec3::dist2(s.position, self.bald_mesh.vertices[v]);
                if d < best {
                    best = d;
                    nearest = v;
                }
            }
            let ann = &self.vertex_ann[nearest];
            roots.push(RootSpec {
                position: s.position,
                frame: self.frames[face],
                face,
                label: ann.label.id(),
                length_cm: ann.length_cm,
                growth_dir: ann.direction,
            });
        }
        Ok(roots)
    }
}

/// Optimizer configuration (JSON-loadable).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizeConfig {
    pub iterations: usize,
    pub strands_per_iter: usize,
    /// Base learning rate, cosine-decayed to zero over the run.
    pub learning_rate: f64,
    /// Chamfer surface samples drawn from the pool each iteration.
    pub chamfer_samples: usize,
    pub weights: LossWeightsConfig,
    pub seed: u64,
    pub straight_up_init: bool,
    /// Views used per iteration when image supervision is present.
    pub views_per_iter: usize,
    pub strand_width: f64,
    pub k_scale: f64,
    pub opacity: f64,
    /// Iterations of rising loss tolerated before aborting to the best state.
    pub patience: usize,
}

/// Serializable mirror of [`LossWeights`] with per-term toggles.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeightsConfig {
    pub sil: f64,
    pub dir: f64,
    pub dir_ann: f64,
    pub chm: f64,
    pub penetr: f64,
    pub shape: f64,
}

impl Default for LossWeightsConfig {
    fn default() -> Self {
        let w = LossWeights::default();
        LossWeightsConfig {
            sil: w.sil,
            dir: w.dir,
            dir_ann: w.dir_ann,
            chm: w.chm,
            penetr: w.penetr,
            shape: w.shape,
        }
    }
}

impl From<LossWeightsConfig> for LossWeights {
    fn from(c: LossWeightsConfig) -> LossWeights {
        LossWeights {
            sil: c.sil,
            dir: c.dir,
            dir_ann: c.dir_ann,
            chm: c.chm,
            penetr: c.penetr,
            shape: c.shape,
        }
    }
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            iterations: 2000,
            strands_per_iter: 15000,
            learning_rate: 5e-4,
            chamfer_samples: 2500,
            weights: LossWeightsConfig::default(),
            seed: 0,
            straight_up_init: true,
            views_per_iter: 1,
            strand_width: STRAND_WIDTH,
            k_scale: K_SCALE_DEFAULT,
            opacity: 0.8,
            patience: 0, // 0 disables the guard (stochastic objective)
        }
    }
}

impl OptimizeConfig {
    /// Desk-scale preset used by tests and the demo.
    pub fn desk_scale() -> Self {
        OptimizeConfig {
            iterations: 300,
            strands_per_iter: 500,
            chamfer_samples: 1000,
            ..OptimizeConfig::default()
        }
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Per-iteration loss record.
#[derive(Clone, Copy, Debug)]
pub struct IterationLog {
    pub iteration: usize,
    pub breakdown: LossBreakdown,
}

/// Write the loss curve as CSV (iteration, each term, total).
pub fn write_loss_csv(path: impl AsRef<std::path::Path>, log: &[IterationLog]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "iteration,chm,penetr,dir_ann,shape,sil,dir,total")?;
    for entry in log {
        let b = &entry.breakdown;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            entry.iteration, b.chm, b.penetr, b.dir_ann, b.shape, b.sil, b.dir, b.total
        )?;
    }
    w.flush()?;
    Ok(())
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

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t as i32);
        let c2 = 1.0 - B2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + EPS);
        }
    }
}

/// Train the strand field against the combined objective. Deterministic for
/// a fixed seed (bitwise, including the loss log).
pub fn optimize(
    field: &mut StrandField,
    scene: &Scene,
    config: &OptimizeConfig,
) -> Result<Vec<IterationLog>> {
    let weights: LossWeights = config.weights.into();
    let use_views = !scene.views.is_empty() && (weights.sil != 0.0 || weights.dir != 0.0);
    let mut adam = Adam::new(field.mlp.params.len());
    let mut log = Vec::with_capacity(config.iterations);
    let mut view_rng = Pcg32::new(config.seed, 0x71e0);
    let mut best = (f64::INFINITY, field.mlp.params.clone());
    let mut bad_streak = 0usize;
    let render_opts = RenderOptions::default();

    for iteration in 0..config.iterations {
        let roots = scene.sample_roots(
            config.strands_per_iter,
            config.seed.wrapping_add(0x9e3779b97f4a7c15_u64.wrapping_mul(iteration as u64 + 1)),
            0x0b5e,
        )?;
        let batch = field.grow_batch(&roots)?;
        if batch.strands.is_empty() {
            return Err(Error::InvalidInput(
                "all sampled roots were bald; nothing to optimize".into(),
            ));
        }

        // Per-iteration Chamfer subset from the pool.
        let mut chamfer_rng = Pcg32::new(
            config.seed.wrapping_add(0xc2b2_ae3d_27d4_eb4f_u64.wrapping_mul(iteration as u64 + 1)),
            0xc1a0,
        );
        let subset: Vec<[f64; 3]> = (0..config.chamfer_samples.min(scene.furred_samples.len()))
            .map(|_| scene.furred_samples[chamfer_rng.next_below(scene.furred_samples.len())])
            .collect();

        let growth_dirs: Vec<[f64; 3]> = batch.roots.iter().map(|r| r.growth_dir).collect();
        let inputs = GeometricInputs {
            surface_samples: &subset,
            defurred_sdf: &scene.defurred_sdf,
            growth_dirs: &growth_dirs,
        };

        // Optional image supervision on sampled views.
        let extra = if use_views {
            let mut sil_total = 0.0;
            let mut dir_total = 0.0;
            let mut sil_grads = losses::zero_grads(&batch.strands);
            let mut dir_grads = losses::zero_grads(&batch.strands);
            for _ in 0..config.views_per_iter.max(1) {
                let view = &scene.views[view_rng.next_below(scene.views.len())];
                let gaussians: Vec<_> = batch
                    .strands
                    .strands
                    .iter()
                    .map(|s| gaussian_segments(s, config.strand_width, config.k_scale, config.opacity))
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .flatten()
                    .collect();
                let (maps, splat_scene) =
                    render::splat_render(&gaussians, &view.camera, &render_opts)?;
                let (sil_value, d_sil) =
                    render::silhouette_loss(&maps, &view.target_silhouette, &view.mask)?;
                let (dir_value, d_beta, d_tau) = render::orientation_loss(
                    &maps,
                    &view.target_beta,
                    &view.mask,
                    render_opts.tau_floor,
                )?;
                sil_total += sil_value;
                dir_total += dir_value;

                // Silhouette adjoint alone.
                let zeros = vec![0.0; d_sil.len()];
                let adj = splat_scene.backward(&d_sil, &zeros, &zeros);
                let g = render::backprop_to_strands(
                    &batch.strands,
                    &adj,
                    config.strand_width,
                    config.k_scale,
                );
                for (gs, ts) in sil_grads.iter_mut().zip(&g) {
                    for (a, b) in gs.iter_mut().zip(ts) {
                        *a = vec3::add(*a, *b);
                    }
                }
                // Orientation adjoint through the moment maps.
                let (sil_extra, d_c2, d_s2) =
                    render::splat::orientation_adjoints_to_moments(&maps, &d_beta, &d_tau);
                let adj = splat_scene.backward(&sil_extra, &d_c2, &d_s2);
                let g = render::backprop_to_strands(
                    &batch.strands,
                    &adj,
                    config.strand_width,
                    config.k_scale,
                );
                for (gs, ts) in dir_grads.iter_mut().zip(&g) {
                    for (a, b) in gs.iter_mut().zip(ts) {
                        *a = vec3::add(*a, *b);
                    }
                }
            }
            Some((sil_total, dir_total, sil_grads, dir_grads))
        } else {
            None
        };

        let (total, grads, breakdown) = losses::total_geometric_loss(
            &batch.strands,
            &inputs,
            &weights,
            extra
                .as_ref()
                .map(|(s, d, sg, dg)| (*s, *d, sg, dg)),
        )?;

        if !total.is_finite() {
            return Err(Error::Diverged {
                iteration,
                reason: format!("non-finite loss; breakdown {breakdown:?}"),
            });
        }
        log.push(IterationLog {
            iteration,
            breakdown,
        });

        if total < best.0 {
            best.0 = total;
            best.1.copy_from_slice(&field.mlp.params);
            bad_streak = 0;
        } else {
            bad_streak += 1;
            if config.patience > 0 && bad_streak > config.patience {
                field.mlp.params.copy_from_slice(&best.1);
                break;
            }
        }

        let mut grad = vec![0.0; field.mlp.params.len()];
        field.backward_batch(&batch, &grads, &mut grad);
        let progress = iteration as f64 / config.iterations.max(1) as f64;
        let lr = config.learning_rate * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
        adam.step(&mut field.mlp.params, &grad, lr);
    }
    Ok(log)
}

/// Reconstruct a groom: `n_strands` area-weighted roots on non-bald faces,
/// decoded through the trained field, carrying part labels.
pub fn generate(
    field: &StrandField,
    scene: &Scene,
    n_strands: usize,
    seed: u64,
) -> Result<StrandSet> {
    let roots = scene.sample_roots(n_strands, seed, 0x6e4a)?;
    let batch = field.grow_batch(&roots)?;
    Ok(batch.strands)
}
