//! End-to-end desk-scale pipeline on the synthetic quadruped: build a furred
//! body, fit the template, localize annotations, de-fur, grow a tangent
//! field, optimize the strand field and emit the groom plus a metrics report.

use std::io::Write;
use std::path::Path;

use fur_core::{io as mesh_io, sdf, vec3, Mesh};
use serde::{Deserialize, Serialize};

use crate::annotation::{self, AnnotationSet};
use crate::lbs::{self, quadruped};
use crate::metrics;
use crate::optimize::{self, LossWeightsConfig, OptimizeConfig, Scene};
use crate::sfur;
use crate::strand::{FieldInit, FieldSpec, StrandField, StrandSet};
use crate::{Error, Result};

/// Bundled Panda annotation column (lengths from the reference table).
pub const PANDA_ANNOTATION_JSON: &str = include_str!("../fixtures/panda.json");

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct DemoConfig {
    /// Marching-cubes resolution for the furred body and the de-fur grid.
    pub sdf_resolution: usize,
    /// Bald-mesh face budget after decimation.
    pub bald_faces: usize,
    /// Thickness smoothing rounds.
    pub smoothing_rounds: usize,
    /// Tangent-field smoothing sweeps.
    pub tangent_iters: usize,
    /// LBS fit iterations (per stage, stages 1-2).
    pub fit_iters: usize,
    pub optimize: OptimizeConfig,
    pub generate_strands: usize,
    pub seed: u64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            sdf_resolution: 96,
            bald_faces: 12000,
            smoothing_rounds: 10,
            tangent_iters: 150,
            fit_iters: 60,
            optimize: OptimizeConfig {
                iterations: 300,
                strands_per_iter: 500,
                chamfer_samples: 1500,
                // Desk scale runs two orders of magnitude fewer strands per
                // iteration than the full setting; sparse coverage lets the
                // Chamfer term drag strands across concave creases, so the
                // penetration weight is raised to keep the hinge decisive.
                weights: LossWeightsConfig {
                    penetr: 200.0,
                    chm: 2.0,
                    ..LossWeightsConfig::default()
                },
                ..OptimizeConfig::default()
            },
            generate_strands: 2000,
            seed: 0,
        }
    }
}

/// Artifacts of a demo run.
pub struct DemoOutput {
    pub furred_mesh: Mesh,
    pub bald_mesh: Mesh,
    pub strands: StrandSet,
    pub scene: Scene,
    pub loss_log: Vec<optimize::IterationLog>,
}

/// Run the full pipeline and write `bald.ply`, `strands.sfur`, `furred.ply`,
/// `annotations.json`, `loss.csv` and `metrics.csv` into `out_dir`.
pub fn run_demo(out_dir: &Path, config: &DemoConfig) -> Result<DemoOutput> {
    std::fs::create_dir_all(out_dir)?;
    let ann = AnnotationSet::from_json(PANDA_ANNOTATION_JSON)?;

    // Stage 0: the synthetic scan. The furred body plays the role of the
    // reconstructed full mesh.
    let model = quadruped::synthetic_quadruped();
    let furred = quadruped::furred_body_mesh(
        &model.template,
        |part| ann.part(part).map(|p| p.thickness_cm).unwrap_or(0.0),
        config.sdf_resolution,
    );

    // Stage 1: localize labels by fitting the template to the furred mesh
    // and transferring per-vertex labels.
    let fit_config = lbs::FitConfig {
        stage_iters: [config.fit_iters, config.fit_iters, 0],
        target_samples: 4000,
        model_samples: 1500,
        seed: config.seed,
        ..lbs::FitConfig::default()
    };
    let params = lbs::fit(&model, &furred, 2, &fit_config)?;
    let fitted = model.forward(&params)?;
    let furred_labeled = annotation::transfer_labels(&fitted, &furred)?;

    // Stage 2: de-fur. Thickness is smoothed on the furred mesh, turned into
    // a shrinkage field and applied to the furred SDF.
    let vertex_ann_furred =
        annotation::smooth_vertex_thickness(&furred_labeled, &ann, config.smoothing_rounds)?;
    let furred_sdf = sdf::build_sdf(&furred_labeled, config.sdf_resolution)?;
    let shrink = crate::defur::shrinkage_field(&furred_sdf, &furred_labeled, &vertex_ann_furred)?;
    let defurred_sdf = crate::defur::defur_sdf(&furred_sdf, &shrink)?;
    let bald = crate::defur::extract_bald_mesh(&defurred_sdf, config.bald_faces)?;

    // Stage 3: localize annotations on the bald mesh and assemble the scene.
    // Labels come straight from the fitted template: the furred surface is
    // offset by part-dependent thickness, so routing the transfer through it
    // smears labels across part boundaries (thick-furred parts capture their
    // neighbors' bald vertices).
    let bald_labeled = annotation::transfer_labels(&fitted, &bald)?;
    let vertex_ann_bald =
        annotation::smooth_vertex_thickness(&bald_labeled, &ann, config.smoothing_rounds)?;
    let mut scene = Scene::assemble(
        &furred_labeled,
        bald_labeled,
        vertex_ann_bald,
        defurred_sdf,
        config.tangent_iters,
        8000,
        config.seed,
    )?;

    // Stage 4: optimize the strand field (geometric losses; the demo has no
    // calibrated photographs).
    let (center, half_extent) = {
        let (lo, hi) = scene.bald_mesh.bounding_box();
        let c = vec3::scale(vec3::add(lo, hi), 0.5);
        let mut h: f64 = 0.0;
        for d in 0..3 {
            h = h.max((hi[d] - lo[d]) * 0.5);
        }
        (c, h.max(1.0))
    };
    let spec = FieldSpec {
        center,
        half_extent,
        ..FieldSpec::default()
    };
    let init = if config.optimize.straight_up_init {
        FieldInit::StraightUp
    } else {
        FieldInit::Random
    };
    let mut field = StrandField::new(spec, config.seed, init);
    let mut opt_config = config.optimize.clone();
    opt_config.seed = config.seed;
    let loss_log = optimize::optimize(&mut field, &scene, &opt_config)?;

    // Stage 5: generate, export, measure.
    let strands = optimize::generate(&field, &scene, config.generate_strands, config.seed)?;
    scene.views.clear();

    mesh_io::write_ply(&scene.bald_mesh, out_dir.join("bald.ply"))?;
    mesh_io::write_ply(&furred_labeled, out_dir.join("furred.ply"))?;
    std::fs::write(out_dir.join("annotations.json"), ann.to_json())?;
    sfur::write_sfur(&strands, out_dir.join("strands.sfur"))?;
    optimize::write_loss_csv(out_dir.join("loss.csv"), &loss_log)?;
    write_metrics_csv(
        out_dir.join("metrics.csv"),
        &strands,
        &furred_labeled,
        config.seed,
    )?;

    Ok(DemoOutput {
        furred_mesh: furred_labeled,
        bald_mesh: scene.bald_mesh.clone(),
        strands,
        scene,
        loss_log,
    })
}

/// Unsupervised metric suite as a flat CSV (column order of the summary
/// table).
pub fn write_metrics_csv(
    path: impl AsRef<Path>,
    strands: &StrandSet,
    outer_mesh: &Mesh,
    seed: u64,
) -> Result<()> {
    let k = 10.min(strands.len().saturating_sub(1)).max(1);
    let report = metrics::unsupervised_report(strands, k, Some(outer_mesh), seed)?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        w,
        "mu_L,sigma_L,sigma_loc_L,var_glob_kappa,var_loc_kappa,kappa_max,var_loc_dir,var_loc_first_dir,tip_cd"
    )?;
    writeln!(
        w,
        "{},{},{},{},{},{},{},{},{}",
        report.length.mean,
        report.length.std_dev,
        report.length.local_sigma,
        report.curvature.var_global,
        report.curvature.var_local,
        report.curvature.kappa_max,
        report.direction.var_local_mean,
        report.direction.var_local_first,
        report.tip_cd.unwrap_or(f64::NAN)
    )?;
    w.flush()?;
    Ok(())
}

/// Strand length sanity used by tests and the acceptance suite: every strand
/// must match its part's annotated length.
pub fn check_length_fidelity(
    strands: &StrandSet,
    ann: &AnnotationSet,
) -> Result<(f64, usize)> {
    let mut worst_rel = 0.0_f64;
    let mut zero_part_strands = 0usize;
    for s in &strands.strands {
        let part = crate::annotation::PartLabel::from_id(s.label)
            .ok_or_else(|| Error::InvalidInput(format!("strand carries unknown label {}", s.label)))?;
        let expect = ann
            .part(part)
            .ok_or_else(|| Error::InvalidInput(format!("no annotation for part {part}")))?
            .length_cm;
        if expect == 0.0 {
            zero_part_strands += 1;
            continue;
        }
        let rel = ((s.arc_length() - expect) / expect).abs();
        worst_rel = worst_rel.max(rel);
    }
    Ok((worst_rel, zero_part_strands))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_demo_produces_consistent_outputs() {
        // A small-but-real run of every stage.
        let out = std::env::temp_dir().join("fur_demo_quick");
        let config = DemoConfig {
            sdf_resolution: 56,
            smoothing_rounds: 6,
            bald_faces: 4000,
            tangent_iters: 60,
            fit_iters: 25,
            optimize: OptimizeConfig {
                iterations: 40,
                strands_per_iter: 200,
                chamfer_samples: 600,
                ..OptimizeConfig::default()
            },
            generate_strands: 400,
            seed: 1,
        };
        let result = run_demo(&out, &config).unwrap();
        assert!(out.join("bald.ply").exists());
        assert!(out.join("strands.sfur").exists());
        assert!(out.join("metrics.csv").exists());
        assert_eq!(result.strands.len(), 400);

        // Length fidelity against the Panda annotation column.
        let ann = AnnotationSet::from_json(PANDA_ANNOTATION_JSON).unwrap();
        let (worst_rel, zero_strands) = check_length_fidelity(&result.strands, &ann).unwrap();
        assert!(worst_rel < 1e-6, "worst relative length error {worst_rel}");
        assert_eq!(zero_strands, 0, "strands grew on zero-length parts");

        // Bald mesh sits strictly inside the furred mesh.
        let bvh = fur_core::bvh::TriBvh::build(&result.furred_mesh);
        for v in result.bald_mesh.vertices.iter().step_by(11) {
            assert!(bvh.winding_number(*v) > 0.5, "bald vertex escaped: {v:?}");
        }
    }
}
