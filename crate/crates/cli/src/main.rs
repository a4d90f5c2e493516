//! `fur`: end-to-end command-line orchestration of the fur-groom pipeline.
//!
//! Exit codes: 0 success, 1 validation error (inputs, schemas), 2 runtime
//! failure (I/O, divergence). Logs are line-delimited `key=value` records.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fur_core::{io as mesh_io, sdf, tangent, vec3};
use fur_pipeline::annotation::{self, AnnotationSet};
use fur_pipeline::render::gabor::GaborParams;
use fur_pipeline::strand::{self, FieldInit, FieldSpec, StrandField};
use fur_pipeline::{defur, demo, lbs, metrics, optimize, render, sfur, Error};

#[derive(Parser)]
#[command(name = "fur", version, about = "Strand-based fur groom reconstruction toolkit")]
struct Cli {
    /// Master random seed; every stage derives its own stream from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: hardware count).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Shrink a furred mesh into its bald body via the annotated thickness.
    Defur(DefurArgs),
    /// Fit the skinned template to a target mesh and transfer part labels.
    FitLbs(FitArgs),
    /// Compute and dump the smooth tangent field of a mesh.
    Tangent(TangentArgs),
    /// Train the strand field against the reconstruction losses.
    Optimize(OptimizeArgs),
    /// Grow strands from a trained field.
    Generate(GenerateArgs),
    /// Strand metrics: P/R/F against a ground truth plus the consistency suite.
    Metrics(MetricsArgs),
    /// Convert between SFUR1 and OBJ polylines.
    Export(ExportArgs),
    /// Build the synthetic quadruped and run the whole pipeline at desk scale.
    Demo(DemoArgs),
}

#[derive(Args)]
struct DefurArgs {
    /// Furred surface mesh (PLY, labeled per vertex).
    #[arg(long)]
    mesh: PathBuf,
    /// Annotation JSON.
    #[arg(long)]
    ann: PathBuf,
    /// SDF grid resolution per axis.
    #[arg(long, default_value_t = 256)]
    resolution: usize,
    /// Face budget of the extracted bald mesh.
    #[arg(long, default_value_t = 160000)]
    target_faces: usize,
    /// Thickness smoothing rounds.
    #[arg(long, default_value_t = 10)]
    smooth_rounds: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Template mesh (PLY); the rig sidecar is `<stem>.rig.json`.
    #[arg(long)]
    model: PathBuf,
    /// Target mesh to fit (PLY or OBJ).
    #[arg(long)]
    mesh: PathBuf,
    /// Fitting stages to run (1 = rigid, 2 = +shape/pose, 3 = +offsets).
    #[arg(long, default_value_t = 3)]
    stages: usize,
    /// Iterations per stage.
    #[arg(long, default_value_t = 250)]
    iters: usize,
    /// Target surface samples.
    #[arg(long, default_value_t = 20000)]
    samples: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TangentArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// Smoothing sweeps.
    #[arg(long, default_value_t = 200)]
    iters: usize,
    /// Output PLY point cloud with direction attributes.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OptimizeArgs {
    /// Full (furred) surface mesh.
    #[arg(long)]
    mesh: PathBuf,
    /// Bald body mesh (labeled; produced by `defur`).
    #[arg(long)]
    bald: PathBuf,
    #[arg(long)]
    ann: PathBuf,
    /// Optimizer JSON config (defaults otherwise).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Camera list (JSON) for image supervision.
    #[arg(long)]
    cameras: Option<PathBuf>,
    /// Image directory: `view###.png` photos and `mask###.png` silhouettes.
    #[arg(long)]
    images: Option<PathBuf>,
    /// De-fur SDF resolution (rebuilt from the bald mesh).
    #[arg(long, default_value_t = 128)]
    resolution: usize,
    #[arg(long, default_value_t = 10)]
    smooth_rounds: usize,
    #[arg(long, default_value_t = 200)]
    tangent_iters: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    /// Trained field (SFLD, from `optimize`).
    #[arg(long)]
    field: PathBuf,
    #[arg(long)]
    bald: PathBuf,
    #[arg(long)]
    ann: PathBuf,
    #[arg(long, default_value_t = 500000)]
    count: usize,
    #[arg(long, default_value_t = 10)]
    smooth_rounds: usize,
    #[arg(long, default_value_t = 200)]
    tangent_iters: usize,
    /// Output strand file (SFUR1).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth strands for supervised matching.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Threshold pairs `cm:deg`, comma separated.
    #[arg(long, default_value = "2:20,3:30,4:40")]
    thresholds: String,
    /// Outer surface mesh for the tip Chamfer column.
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Point budget for supervised matching.
    #[arg(long, default_value_t = 100000)]
    points: usize,
    /// kNN size for the local statistics.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    /// Input strand file (.sfur or .obj).
    #[arg(long)]
    input: PathBuf,
    /// Output strand file (.sfur or .obj).
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long)]
    out: PathBuf,
    /// Optimizer iterations.
    #[arg(long, default_value_t = 250)]
    iterations: usize,
    /// Strands in the final groom.
    #[arg(long, default_value_t = 2000)]
    strands: usize,
}

fn log_line(stage: &str, fields: &[(&str, String)]) {
    let mut line = format!("stage={stage}");
    for (k, v) in fields {
        line.push_str(&format!(" {k}={v}"));
    }
    println!("{line}");
}

fn read_mesh(path: &Path) -> Result<fur_core::Mesh, Error> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("obj") => Ok(mesh_io::read_obj(path)?),
        _ => Ok(mesh_io::read_ply(path)?),
    }
}

/// Rebuild the scene a trained field expects from the labeled bald mesh.
fn scene_from_bald(
    furred_mesh: &fur_core::Mesh,
    bald: fur_core::Mesh,
    ann: &AnnotationSet,
    resolution: usize,
    smooth_rounds: usize,
    tangent_iters: usize,
    seed: u64,
) -> Result<optimize::Scene, Error> {
    let vertex_ann = annotation::smooth_vertex_thickness(&bald, ann, smooth_rounds)?;
    let furred_sdf = sdf::build_sdf(furred_mesh, resolution)?;
    let shrink_mesh = furred_mesh.clone();
    let furred_ann = annotation::smooth_vertex_thickness(&shrink_mesh, ann, smooth_rounds)?;
    let shrink = defur::shrinkage_field(&furred_sdf, &shrink_mesh, &furred_ann)?;
    let defurred = defur::defur_sdf(&furred_sdf, &shrink)?;
    optimize::Scene::assemble(
        furred_mesh,
        bald,
        vertex_ann,
        defurred,
        tangent_iters,
        20000,
        seed,
    )
}

fn cmd_defur(args: &DefurArgs, seed: u64) -> Result<(), Error> {
    log_line("defur", &[("event", "start".into())]);
    let mesh = read_mesh(&args.mesh)?;
    if mesh.labels.is_none() {
        return Err(Error::InvalidInput(format!(
            "mesh `{}` carries no per-vertex labels (field `label`); run fit-lbs first",
            args.mesh.display()
        )));
    }
    let ann = AnnotationSet::load(&args.ann)?;
    let vertex_ann = annotation::smooth_vertex_thickness(&mesh, &ann, args.smooth_rounds)?;
    let grid = sdf::build_sdf(&mesh, args.resolution)?;
    log_line(
        "defur",
        &[
            ("event", "sdf_built".into()),
            ("resolution", args.resolution.to_string()),
            ("spacing", format!("{:.6}", grid.spacing)),
        ],
    );
    let shrink = defur::shrinkage_field(&grid, &mesh, &vertex_ann)?;
    let defurred = defur::defur_sdf(&grid, &shrink)?;
    let bald = defur::extract_bald_mesh(&defurred, args.target_faces)?;
    let bald = annotation::transfer_labels(&mesh, &bald)?;
    std::fs::create_dir_all(&args.out)?;
    mesh_io::write_ply(&bald, args.out.join("bald.ply"))?;
    log_line(
        "defur",
        &[
            ("event", "done".into()),
            ("faces", bald.faces.len().to_string()),
            ("out", args.out.join("bald.ply").display().to_string()),
            ("seed", seed.to_string()),
        ],
    );
    Ok(())
}

fn rig_sidecar(model: &Path) -> PathBuf {
    model.with_extension("rig.json")
}

fn cmd_fit(args: &FitArgs, seed: u64) -> Result<(), Error> {
    log_line("fit-lbs", &[("event", "start".into())]);
    let model = lbs::load_model(&args.model, rig_sidecar(&args.model))?;
    let target = read_mesh(&args.mesh)?;
    let config = lbs::FitConfig {
        stage_iters: [args.iters, args.iters, args.iters],
        target_samples: args.samples,
        seed,
        ..lbs::FitConfig::default()
    };
    let params = lbs::fit(&model, &target, args.stages, &config)?;
    let fitted = model.forward(&params)?;
    let labeled = annotation::transfer_labels(&fitted, &target)?;
    std::fs::create_dir_all(&args.out)?;
    std::fs::write(
        args.out.join("params.json"),
        serde_json_string(&params)?,
    )?;
    mesh_io::write_ply(&fitted, args.out.join("fitted.ply"))?;
    mesh_io::write_ply(&labeled, args.out.join("labeled.ply"))?;
    log_line(
        "fit-lbs",
        &[
            ("event", "done".into()),
            ("stages", args.stages.to_string()),
            ("out", args.out.display().to_string()),
        ],
    );
    Ok(())
}

fn serde_json_string<T: serde::Serialize>(value: &T) -> Result<String, Error> {
    Ok(serde_json::to_string_pretty(value).map_err(Error::Json)?)
}

fn cmd_tangent(args: &TangentArgs) -> Result<(), Error> {
    log_line("tangent", &[("event", "start".into())]);
    let mesh = read_mesh(&args.mesh)?;
    let field = tangent::face_direction_field(&mesh, args.iters)?;
    let signed = tangent::resolve_signs(&mesh, &field)?;
    let centroids: Vec<[f64; 3]> = (0..mesh.faces.len()).map(|f| mesh.face_centroid(f)).collect();
    mesh_io::write_ply_point_directions(&centroids, &signed.directions, &signed.singular, &args.out)?;
    let flagged = signed.singular.iter().filter(|&&s| s).count();
    log_line(
        "tangent",
        &[
            ("event", "done".into()),
            ("faces", mesh.faces.len().to_string()),
            ("singular", flagged.to_string()),
            ("out", args.out.display().to_string()),
        ],
    );
    Ok(())
}

fn load_views(
    cameras: &Path,
    images: &Path,
    bald: &fur_core::Mesh,
    non_bald_faces: &[bool],
) -> Result<Vec<optimize::ViewSupervision>, Error> {
    let cams = render::load_cameras(cameras)?;
    let mut views = Vec::with_capacity(cams.len());
    for (i, camera) in cams.into_iter().enumerate() {
        let photo = render::imgio::load_png_gray(images.join(format!("view{i:03}.png")))?;
        let sil = render::imgio::load_png_gray(images.join(format!("mask{i:03}.png")))?;
        if photo.width != camera.width || photo.height != camera.height {
            return Err(Error::InvalidInput(format!(
                "view{i:03}.png is {}x{} but camera {i} expects {}x{}",
                photo.width, photo.height, camera.width, camera.height
            )));
        }
        let orientation = render::gabor_orientation_map(&photo, 16, &GaborParams::default())?;
        let mask = render::splat::rasterize_face_mask(bald, |f| non_bald_faces[f], &camera);
        views.push(optimize::ViewSupervision {
            camera,
            target_silhouette: sil.pixels.clone(),
            target_beta: orientation.beta,
            mask,
        });
    }
    Ok(views)
}

fn cmd_optimize(args: &OptimizeArgs, seed: u64) -> Result<(), Error> {
    log_line("optimize", &[("event", "start".into())]);
    let furred = read_mesh(&args.mesh)?;
    let bald = read_mesh(&args.bald)?;
    let ann = AnnotationSet::load(&args.ann)?;
    let mut config = match &args.config {
        Some(path) => optimize::OptimizeConfig::load(path)?,
        None => optimize::OptimizeConfig::default(),
    };
    config.seed = seed;
    let mut scene = scene_from_bald(
        &furred,
        bald,
        &ann,
        args.resolution,
        args.smooth_rounds,
        args.tangent_iters,
        seed,
    )?;
    match (&args.cameras, &args.images) {
        (Some(c), Some(i)) => {
            let non_bald = scene.non_bald_faces.clone();
            scene.views = load_views(c, i, &scene.bald_mesh, &non_bald)?;
            // Debug maps: per-view orientation targets as float PFM.
            std::fs::create_dir_all(&args.out)?;
            for (vi, view) in scene.views.iter().enumerate() {
                render::imgio::write_pfm(
                    args.out.join(format!("orientation{vi:03}.pfm")),
                    view.camera.width,
                    view.camera.height,
                    &view.target_beta,
                )?;
            }
            log_line(
                "optimize",
                &[("event", "views_loaded".into()), ("count", scene.views.len().to_string())],
            );
        }
        (None, None) => {}
        _ => {
            return Err(Error::InvalidInput(
                "flags --cameras and --images must be given together".into(),
            ))
        }
    }

    let (center, half_extent) = {
        let (lo, hi) = scene.bald_mesh.bounding_box();
        let c = vec3::scale(vec3::add(lo, hi), 0.5);
        let mut h: f64 = 1.0;
        for d in 0..3 {
            h = h.max((hi[d] - lo[d]) * 0.5);
        }
        (c, h)
    };
    let spec = FieldSpec {
        center,
        half_extent,
        ..FieldSpec::default()
    };
    let init = if config.straight_up_init {
        FieldInit::StraightUp
    } else {
        FieldInit::Random
    };
    let mut field = StrandField::new(spec, seed, init);
    let log = optimize::optimize(&mut field, &scene, &config)?;
    for entry in &log {
        let b = &entry.breakdown;
        log_line(
            "optimize",
            &[
                ("iteration", entry.iteration.to_string()),
                ("chm", format!("{:.6}", b.chm)),
                ("penetr", format!("{:.6}", b.penetr)),
                ("dir_ann", format!("{:.6}", b.dir_ann)),
                ("shape", format!("{:.6}", b.shape)),
                ("sil", format!("{:.6}", b.sil)),
                ("dir", format!("{:.6}", b.dir)),
                ("total", format!("{:.6}", b.total)),
            ],
        );
    }
    std::fs::create_dir_all(&args.out)?;
    strand::save_field(&field, args.out.join("field.sfld"))?;
    optimize::write_loss_csv(args.out.join("loss.csv"), &log)?;
    log_line(
        "optimize",
        &[
            ("event", "done".into()),
            ("iterations", log.len().to_string()),
            ("out", args.out.display().to_string()),
        ],
    );
    Ok(())
}

fn cmd_generate(args: &GenerateArgs, seed: u64) -> Result<(), Error> {
    log_line("generate", &[("event", "start".into())]);
    let field = strand::load_field(&args.field)?;
    let bald = read_mesh(&args.bald)?;
    let ann = AnnotationSet::load(&args.ann)?;
    // Generation only needs roots, frames and lengths; the de-furred grid in
    // the scene is never consumed, so it is rebuilt at a token resolution.
    let scene = scene_from_bald(
        &bald.clone(),
        bald,
        &ann,
        16,
        args.smooth_rounds,
        args.tangent_iters,
        seed,
    )?;
    let strands = optimize::generate(&field, &scene, args.count, seed)?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    sfur::write_sfur(&strands, &args.out)?;
    log_line(
        "generate",
        &[
            ("event", "done".into()),
            ("strands", strands.len().to_string()),
            ("out", args.out.display().to_string()),
        ],
    );
    Ok(())
}

fn parse_thresholds(spec: &str) -> Result<Vec<(f64, f64)>, Error> {
    spec.split(',')
        .map(|pair| {
            let mut it = pair.split(':');
            let d = it
                .next()
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| Error::InvalidInput(format!("bad threshold pair `{pair}`")))?;
            let a = it
                .next()
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| Error::InvalidInput(format!("bad threshold pair `{pair}`")))?;
            if it.next().is_some() {
                return Err(Error::InvalidInput(format!("bad threshold pair `{pair}`")));
            }
            Ok((d, a))
        })
        .collect()
}

fn cmd_metrics(args: &MetricsArgs, seed: u64) -> Result<(), Error> {
    let pred = sfur::read_sfur(&args.pred)?;
    let mut csv = String::new();
    let mut table = String::new();

    if let Some(gt_path) = &args.gt {
        let gt = sfur::read_sfur(gt_path)?;
        let thresholds = parse_thresholds(&args.thresholds)?;
        let pred_points = metrics::resample_directed_points(&pred, args.points, seed)?;
        let gt_points = metrics::resample_directed_points(&gt, args.points, seed.wrapping_add(1))?;
        csv.push_str("dist_cm,angle_deg,precision,recall,f_score\n");
        table.push_str("thresholds (cm/deg) | precision | recall | f-score\n");
        for (d, a) in thresholds {
            let (p, r, f) = metrics::precision_recall_f(&pred_points, &gt_points, d, a)?;
            csv.push_str(&format!("{d},{a},{p},{r},{f}\n"));
            table.push_str(&format!("{d:>5} / {a:<10} | {p:9.2} | {r:6.2} | {f:7.2}\n"));
            log_line(
                "metrics",
                &[
                    ("dist_cm", d.to_string()),
                    ("angle_deg", a.to_string()),
                    ("precision", format!("{p:.2}")),
                    ("recall", format!("{r:.2}")),
                    ("f_score", format!("{f:.2}")),
                ],
            );
        }
        csv.push('\n');
    }

    let outer = match &args.mesh {
        Some(path) => Some(read_mesh(path)?),
        None => None,
    };
    let k = args.k.min(pred.len().saturating_sub(1)).max(1);
    let report = metrics::unsupervised_report(&pred, k, outer.as_ref(), seed)?;
    csv.push_str(
        "mu_L,sigma_L,sigma_loc_L,var_glob_kappa,var_loc_kappa,kappa_max,var_loc_dir,var_loc_first_dir,tip_cd\n",
    );
    csv.push_str(&format!(
        "{},{},{},{},{},{},{},{},{}\n",
        report.length.mean,
        report.length.std_dev,
        report.length.local_sigma,
        report.curvature.var_global,
        report.curvature.var_local,
        report.curvature.kappa_max,
        report.direction.var_local_mean,
        report.direction.var_local_first,
        report.tip_cd.unwrap_or(f64::NAN),
    ));
    table.push_str(&format!(
        "\nlength mean +- std (cm) | {:.3} +- {:.2}\nsigma_loc(L)            | {:.3}\nVar_glob(kappa)         | {:.4}\nVar_loc(kappa)          | {:.6}\nkappa_max               | {:.2}\nVar_loc(dir)            | {:.3}\nVar_loc_first(dir)      | {:.3}\ntip CD                  | {}\n",
        report.length.mean,
        report.length.std_dev,
        report.length.local_sigma,
        report.curvature.var_global,
        report.curvature.var_local,
        report.curvature.kappa_max,
        report.direction.var_local_mean,
        report.direction.var_local_first,
        report
            .tip_cd
            .map(|v| format!("{v:.6}"))
            .unwrap_or_else(|| "n/a".into()),
    ));

    print!("{table}");
    if let Some(out) = &args.out {
        std::fs::write(out, csv)?;
        log_line("metrics", &[("event", "csv_written".into()), ("out", out.display().to_string())]);
    }
    Ok(())
}

fn cmd_export(args: &ExportArgs) -> Result<(), Error> {
    let ext = |p: &Path| {
        p.extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
    };
    let set = match ext(&args.input).as_deref() {
        Some("sfur") => sfur::read_sfur(&args.input)?,
        Some("obj") => sfur::read_obj_polylines(&args.input)?,
        other => {
            return Err(Error::InvalidInput(format!(
                "unsupported input extension {other:?} (use .sfur or .obj)"
            )))
        }
    };
    match ext(&args.output).as_deref() {
        Some("sfur") => sfur::write_sfur(&set, &args.output)?,
        Some("obj") => sfur::write_obj_polylines(&set, &args.output)?,
        other => {
            return Err(Error::InvalidInput(format!(
                "unsupported output extension {other:?} (use .sfur or .obj)"
            )))
        }
    }
    log_line(
        "export",
        &[
            ("event", "done".into()),
            ("strands", set.len().to_string()),
            ("out", args.output.display().to_string()),
        ],
    );
    Ok(())
}

fn cmd_demo(args: &DemoArgs, seed: u64) -> Result<(), Error> {
    log_line("demo", &[("event", "start".into()), ("seed", seed.to_string())]);
    let config = demo::DemoConfig {
        optimize: optimize::OptimizeConfig {
            iterations: args.iterations,
            strands_per_iter: 500,
            chamfer_samples: 1500,
            ..optimize::OptimizeConfig::default()
        },
        generate_strands: args.strands,
        seed,
        ..demo::DemoConfig::default()
    };
    let output = demo::run_demo(&args.out, &config)?;
    for entry in output.loss_log.iter().step_by(10) {
        let b = &entry.breakdown;
        log_line(
            "demo",
            &[
                ("iteration", entry.iteration.to_string()),
                ("chm", format!("{:.6}", b.chm)),
                ("penetr", format!("{:.6}", b.penetr)),
                ("dir_ann", format!("{:.6}", b.dir_ann)),
                ("shape", format!("{:.6}", b.shape)),
                ("total", format!("{:.6}", b.total)),
            ],
        );
    }
    log_line(
        "demo",
        &[
            ("event", "done".into()),
            ("strands", output.strands.len().to_string()),
            ("out", args.out.display().to_string()),
        ],
    );
    Ok(())
}

fn exit_code_for(error: &Error) -> u8 {
    match error {
        Error::Io(_) | Error::Diverged { .. } => 2,
        Error::Core(core) => match core {
            fur_core::Error::Io(_) => 2,
            _ => 1,
        },
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot configure {threads} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Defur(args) => cmd_defur(args, cli.seed),
        Command::FitLbs(args) => cmd_fit(args, cli.seed.wrapping_add(1)),
        Command::Tangent(args) => cmd_tangent(args),
        Command::Optimize(args) => cmd_optimize(args, cli.seed.wrapping_add(2)),
        Command::Generate(args) => cmd_generate(args, cli.seed.wrapping_add(3)),
        Command::Metrics(args) => cmd_metrics(args, cli.seed.wrapping_add(4)),
        Command::Export(args) => cmd_export(args),
        Command::Demo(args) => cmd_demo(args, cli.seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
