//! Batch command surface behind the `aae` binary.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.
//! `--seed`, `--json` and `--threads` are accepted by every command; the
//! thread count defaults to the `AAE_THREADS` environment variable.

pub mod scene;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::augment::AugmentConfig;
use crate::codebook::{Codebook, CodebookEntry, Encoder};
use crate::error::{Error, Result};
use crate::geom::{subdivide_icosahedron, CameraIntrinsics, Pose, Rotation3};
use crate::icp::{backproject, estimate_normals, refine_pose, IcpConfig, PointCloud};
use crate::icp::{DEFAULT_MODEL_POINTS, DEFAULT_NORMAL_NEIGHBORS};
use crate::metrics::{add_correct, adi_error, evaluate, summarize, write_report, EvalRecord, VsdParams};
use crate::pipeline::{estimate_pose, labeled_view, BBox, DepthEncoder, Detection, DistanceContext, PoseOptions};
use crate::render::{codebook_views, load_mesh, DepthImage, TriangleMesh};
use crate::toy::analyze::write_traces_csv;
use crate::toy::train::write_loss_csv;
use crate::toy::{analyze_latent, save_checkpoint, train, Distribution, TrainConfig};

use scene::{CodebookMeta, EstimateFile, ObjectEstimate, SceneDescriptor, SceneEstimates, SCENE_SCHEMA_VERSION};

/// Version of every `--json` document printed on stdout.
pub const OUTPUT_SCHEMA_VERSION: u32 = 1;
pub const THREADS_ENV: &str = "AAE_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "aae", version, about = "Codebook-based 6D pose estimation toolkit")]
pub struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print one machine-readable JSON document instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Worker threads (default: $AAE_THREADS, else all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the rotating-squares autoencoder.
    ToyTrain(ToyTrainArgs),
    /// Render views of a mesh and build an orientation codebook.
    CodebookBuild(CodebookBuildArgs),
    /// Estimate poses for the detections of one scene.
    Estimate(EstimateArgs),
    /// Score estimates against ground truth.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct ToyTrainArgs {
    /// TOML config with `input`, `target`, optional `[train]` and `[augment]` tables.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory receiving model.aaet, loss.csv, latent.csv and report.json.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub input: Option<Distribution>,
    #[arg(long)]
    pub target: Option<Distribution>,
    /// Rotations per latent trace.
    #[arg(long, default_value_t = crate::toy::analyze::DEFAULT_ANGLES)]
    pub angles: usize,
}

#[derive(Debug, Args)]
pub struct CodebookBuildArgs {
    /// OBJ or PLY mesh in millimetres.
    #[arg(long)]
    pub mesh: PathBuf,
    /// Icosphere subdivision level.
    #[arg(long, default_value_t = 4)]
    pub level: u32,
    /// In-plane rotations per viewpoint.
    #[arg(long, default_value_t = 36)]
    pub inplane: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Side of the encoder crop; codes have `crop²` entries.
    #[arg(long, default_value_t = 16)]
    pub crop: usize,
    /// Side of the square synthetic render.
    #[arg(long, default_value_t = 128)]
    pub render_size: u32,
    /// Synthetic focal length; by default the mesh spans 60% of the render.
    #[arg(long)]
    pub focal: Option<f64>,
    #[arg(long, default_value_t = crate::pipeline::DEFAULT_T_SYN_Z)]
    pub t_syn_z: f64,
    #[arg(long, default_value_t = crate::pipeline::DEFAULT_PADDING)]
    pub padding: f64,
    /// Depth span mapped onto the code range; defaults to the mesh diameter.
    #[arg(long)]
    pub depth_range: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub codebook: PathBuf,
    /// Refine with ICP against the scene's sensor depth.
    #[arg(long)]
    pub icp: bool,
    /// Neighbours reported per detection.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long)]
    pub no_perspective_correction: bool,
    /// Estimate file for `evaluate`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory of scene descriptors (`*.toml`, `*.json`).
    #[arg(long)]
    pub scenes: PathBuf,
    /// Estimate files written by `estimate`.
    #[arg(long = "est", required = true)]
    pub est: Vec<PathBuf>,
    /// JSON-lines report with one record per object and a summary.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 20.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 15.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.3)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0.1)]
    pub min_visibility: f64,
    /// ADD tolerance as a fraction of the object diameter.
    #[arg(long, default_value_t = 0.1)]
    pub k_m: f64,
}

/// `toy-train` config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyTrainConfig {
    pub input: Distribution,
    pub target: Distribution,
    pub train: TrainConfig,
    pub augment: Option<AugmentConfig>,
}

impl Default for ToyTrainConfig {
    fn default() -> Self {
        ToyTrainConfig {
            input: Distribution::D,
            target: Distribution::A,
            train: TrainConfig::default(),
            augment: None,
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_DATA
    }
}

fn configure_threads(flag: Option<usize>) -> Result<()> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a thread count, got {v:?}")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        // The global pool can only be set once per process; later calls keep it.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    configure_threads(cli.threads)?;
    let seed = cli.seed.unwrap_or(0);
    let doc = match &cli.command {
        Command::ToyTrain(a) => toy_train(a, cli.seed, out, cli.json)?,
        Command::CodebookBuild(a) => codebook_build(a, out, cli.json)?,
        Command::Estimate(a) => estimate(a, seed, out, cli.json)?,
        Command::Evaluate(a) => evaluate_cmd(a, out, cli.json)?,
    };
    if cli.json {
        print_json(out, doc)?;
    }
    Ok(())
}

fn print_json(out: &mut dyn Write, mut doc: Value) -> Result<()> {
    doc["schema_version"] = json!(OUTPUT_SCHEMA_VERSION);
    writeln!(
        out,
        "{}",
        serde_json::to_string_pretty(&doc).map_err(|e| Error::Config(e.to_string()))?
    )?;
    Ok(())
}

fn to_value(v: &impl Serialize) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Config(e.to_string()))
}

fn write_json_file(path: &Path, v: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn toy_train(a: &ToyTrainArgs, seed: Option<u64>, out: &mut dyn Write, json: bool) -> Result<Value> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            toml::from_str::<ToyTrainConfig>(&text).map_err(|e| Error::Parse {
                path: path.clone(),
                line: e.span().map_or(0, |s| text[..s.start].lines().count().max(1)),
                msg: e.message().to_string(),
            })?
        }
        None => ToyTrainConfig::default(),
    };
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    if let Some(n) = a.iterations {
        cfg.train.iterations = n;
    }
    cfg.input = a.input.unwrap_or(cfg.input);
    cfg.target = a.target.unwrap_or(cfg.target);

    let result = train(&cfg.train, cfg.input, cfg.target, cfg.augment.as_ref())?;
    fs::create_dir_all(&a.out)?;
    let checkpoint = a.out.join("model.aaet");
    save_checkpoint(&result.model, &checkpoint)?;
    write_loss_csv(fs::File::create(a.out.join("loss.csv"))?, &result.losses)?;

    let dists = [Distribution::A, Distribution::B, Distribution::C];
    let report = analyze_latent(&result.model, a.angles, &dists, cfg.train.seed)?;
    write_traces_csv(fs::File::create(a.out.join("latent.csv"))?, &report.traces)?;
    let fits = to_value(&report.fits)?;
    let analysis = json!({
        "fits": fits,
        "phase_difference": to_value(&report.phase_difference)?,
        "coincidence_gap": to_value(&report.coincidence_gap)?,
    });
    write_json_file(&a.out.join("report.json"), &analysis)?;

    let final_loss = result.losses.last().map(|l| l.1);
    if !json {
        writeln!(
            out,
            "trained {} iterations, {} -> {}",
            cfg.train.iterations, cfg.input, cfg.target
        )?;
        if let Some(l) = final_loss {
            writeln!(out, "final loss {l:.4}")?;
        }
        for f in &report.fits {
            match f.fit {
                Some(s) => writeln!(
                    out,
                    "{} z{}: omega {:.3} r2 {:.3}",
                    f.distribution,
                    f.dim + 1,
                    s.omega,
                    s.r2
                )?,
                None => writeln!(out, "{} z{}: constant", f.distribution, f.dim + 1)?,
            }
        }
        writeln!(out, "wrote {}", a.out.display())?;
    }
    Ok(json!({
        "command": "toy-train",
        "config": to_value(&cfg)?,
        "checkpoint": checkpoint,
        "final_loss": final_loss,
        "analysis": analysis,
    }))
}

fn codebook_build(a: &CodebookBuildArgs, out: &mut dyn Write, json: bool) -> Result<Value> {
    let mesh = load_mesh(&a.mesh)?;
    let side = a.render_size;
    let focal = a.focal.unwrap_or(0.6 * side as f64 * a.t_syn_z / mesh.diameter());
    let camera = CameraIntrinsics::centered(focal, side, side)?;
    let depth_range = a.depth_range.unwrap_or(mesh.diameter());
    let encoder = DepthEncoder::new(a.crop, depth_range);
    let sphere = subdivide_icosahedron(a.level)?;
    let views = codebook_views(&mesh, &sphere, a.inplane, &camera, a.t_syn_z)?;
    let entries = (0..views.total())
        .into_par_iter()
        .map(|i| {
            let view = labeled_view(&views.render(i)?, a.padding, a.crop)?;
            let code = encoder.encode(&view.image)?;
            Ok(CodebookEntry::new(
                code,
                &view.rotation,
                view.bbox_diag,
                view.bbox_center,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let cb = Codebook::from_entries(encoder.dim(), entries)?;
    cb.save(&a.out)?;
    let meta = CodebookMeta {
        schema_version: SCENE_SCHEMA_VERSION,
        level: a.level,
        inplane: a.inplane,
        entries: cb.len(),
        t_syn_z: a.t_syn_z,
        camera,
        padding: a.padding,
        crop: a.crop,
        depth_range,
    };
    write_json_file(&CodebookMeta::sidecar(&a.out), &meta)?;
    if !json {
        writeln!(
            out,
            "{} entries ({} viewpoints x {} in-plane), dim {}, wrote {}",
            cb.len(),
            sphere.len(),
            a.inplane,
            cb.dim(),
            a.out.display()
        )?;
    }
    Ok(json!({
        "command": "codebook-build",
        "entries": cb.len(),
        "viewpoints": sphere.len(),
        "dim": cb.dim(),
        "meta": to_value(&meta)?,
        "out": a.out,
    }))
}

/// Depth inside the padded detection box only.
fn depth_in_box(depth: &DepthImage, bbox: &BBox, padding: f64) -> DepthImage {
    let c = bbox.center();
    let half = 0.5 * bbox.w.max(bbox.h) * padding;
    let mut masked = depth.clone();
    for y in 0..depth.height {
        for x in 0..depth.width {
            let (u, v) = (x as f64 + 0.5, y as f64 + 0.5);
            if (u - c.x).abs() > half || (v - c.y).abs() > half {
                masked.data[y * depth.width + x] = 0.0;
            }
        }
    }
    masked
}

fn scene_name(path: &Path) -> String {
    path.file_name()
        .map_or_else(String::new, |n| n.to_string_lossy().into_owned())
}

fn estimate(a: &EstimateArgs, seed: u64, out: &mut dyn Write, json: bool) -> Result<Value> {
    let scene = SceneDescriptor::load(&a.scene)?;
    let mesh = scene.load_mesh()?;
    let meta = CodebookMeta::load(&a.codebook)?;
    let cb = Codebook::load(&a.codebook)?;
    if meta.entries != cb.len() {
        return Err(Error::Config(format!(
            "codebook has {} entries but its sidecar records {}",
            cb.len(),
            meta.entries
        )));
    }
    let encoder = DepthEncoder::new(meta.crop, meta.depth_range);
    let ctx = DistanceContext::new(meta.t_syn_z, meta.camera, scene.camera)?;
    let opts = PoseOptions {
        padding: meta.padding,
        crop_size: meta.crop,
        k: a.k,
        perspective_correction: !a.no_perspective_correction,
    };
    let image = scene.input_depth(&mesh)?.to_image();

    let mut records = Vec::new();
    let mut estimates = Vec::new();
    for (i, obj) in scene.objects.iter().enumerate() {
        let det = Detection::new(scene.bbox(&mesh, i)?, obj.id.clone(), 1.0)?;
        let est = estimate_pose(&image, &det, &encoder, &cb, &ctx, &opts)?;
        estimates.push(ObjectEstimate {
            index: i,
            object_id: obj.id.clone(),
            pose: est.pose,
            refined_pose: None,
        });
        records.push((det, est));
    }

    let mut icp_error = None;
    let mut icp_stats = Vec::new();
    if a.icp && !scene.objects.is_empty() {
        match scene.sensor_depth()? {
            None => icp_error = Some(Error::MissingDepth(a.scene.display().to_string())),
            Some(depth) => {
                let model = PointCloud::sample_mesh(&mesh, DEFAULT_MODEL_POINTS, seed);
                let cfg = IcpConfig::default();
                for (est, (det, _)) in estimates.iter_mut().zip(&records) {
                    let local = depth_in_box(&depth, &det.bbox, meta.padding);
                    let refined = estimate_normals(&backproject(&local, &scene.camera), DEFAULT_NORMAL_NEIGHBORS)
                        .and_then(|cloud| refine_pose(&model, &cloud, &est.pose, &cfg));
                    match refined {
                        Ok((pose, stats)) => {
                            est.refined_pose = Some(pose);
                            icp_stats.push(Ok(stats));
                        }
                        Err(e) => {
                            log::warn!("{} #{}: refinement failed: {e}", est.object_id, est.index);
                            icp_stats.push(Err(e.to_string()));
                            icp_error.get_or_insert(e);
                        }
                    }
                }
            }
        }
    }

    let file = EstimateFile {
        schema_version: SCENE_SCHEMA_VERSION,
        scenes: vec![SceneEstimates {
            scene: scene_name(&a.scene),
            estimates: estimates.clone(),
        }],
    };
    if let Some(path) = &a.out {
        write_json_file(path, &file)?;
    }

    if json {
        let detections: Vec<Value> = records
            .iter()
            .zip(&estimates)
            .enumerate()
            .map(|(i, ((det, est), e))| {
                json!({
                    "index": i,
                    "object_id": e.object_id,
                    "bbox": det.bbox,
                    "pose": est.pose,
                    "uncorrected_rotation": est.uncorrected_rotation,
                    "similarity": est.similarity,
                    "knn": est.knn,
                    "distance": est.distance,
                    "refined_pose": e.refined_pose,
                    "icp": icp_stats.get(i).map(|s| match s {
                        Ok(s) => json!({
                            "iterations": s.iterations,
                            "converged": s.converged,
                            "final_residual": s.final_residual,
                            "correspondences": s.correspondences,
                        }),
                        Err(e) => json!({ "error": e }),
                    }),
                })
            })
            .collect();
        let doc = json!({
            "command": "estimate",
            "scene": scene_name(&a.scene),
            "detections": detections,
            "error": icp_error.as_ref().map(|e| e.to_string()),
        });
        if let Some(e) = icp_error {
            print_json(out, doc)?;
            return Err(e);
        }
        return Ok(doc);
    }
    for (i, ((_, est), e)) in records.iter().zip(&estimates).enumerate() {
        let t = est.pose.translation;
        writeln!(
            out,
            "{} #{}: t = [{:.1}, {:.1}, {:.1}] mm, similarity {:.4}, R = {}",
            e.object_id,
            e.index,
            t.x,
            t.y,
            t.z,
            est.similarity,
            fmt_rotation(&est.pose.rotation)
        )?;
        if let Some(r) = &e.refined_pose {
            let t = r.translation;
            writeln!(
                out,
                "  refined: t = [{:.1}, {:.1}, {:.1}] mm, R = {}",
                t.x,
                t.y,
                t.z,
                fmt_rotation(&r.rotation)
            )?;
        }
        if let Some(Err(msg)) = icp_stats.get(i) {
            writeln!(out, "  refinement failed: {msg}")?;
        }
    }
    if estimates.is_empty() {
        writeln!(out, "no detections")?;
    }
    match icp_error {
        Some(e) => Err(e),
        None => Ok(Value::Null),
    }
}

fn fmt_rotation(r: &Rotation3) -> String {
    let v = r.to_rows();
    format!(
        "[[{:.4}, {:.4}, {:.4}], [{:.4}, {:.4}, {:.4}], [{:.4}, {:.4}, {:.4}]]",
        v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]
    )
}

/// Descriptor files of a directory in name order.
fn scene_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| {
        p.is_file()
            && p.extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("toml") || e.eq_ignore_ascii_case("json"))
    });
    files.sort();
    Ok(files)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
struct ObjectTable {
    object_id: String,
    count: usize,
    mean_add: f64,
    mean_adi: f64,
    add_recall: f64,
    adi_recall: f64,
}

fn evaluate_cmd(a: &EvaluateArgs, out: &mut dyn Write, json: bool) -> Result<Value> {
    let params = VsdParams {
        tau: a.tau,
        delta: a.delta,
        threshold: a.threshold,
        min_visibility: a.min_visibility,
    };
    params.validate()?;
    let mut by_scene: BTreeMap<String, Vec<ObjectEstimate>> = BTreeMap::new();
    for path in &a.est {
        for s in EstimateFile::load(path)?.scenes {
            by_scene.entry(s.scene).or_default().extend(s.estimates);
        }
    }

    let mut records: Vec<EvalRecord> = Vec::new();
    let mut adi: Vec<f64> = Vec::new();
    let mut diameters: Vec<f64> = Vec::new();
    let mut meshes: BTreeMap<PathBuf, TriangleMesh> = BTreeMap::new();
    for path in scene_files(&a.scenes)? {
        let scene = SceneDescriptor::load(&path)?;
        let name = scene_name(&path);
        let ests = by_scene
            .get(&name)
            .ok_or_else(|| Error::Config(format!("no estimates for scene {name}")))?;
        if !meshes.contains_key(&scene.mesh) {
            meshes.insert(scene.mesh.clone(), scene.load_mesh()?);
        }
        let mesh = &meshes[&scene.mesh];
        let depth = match scene.sensor_depth()? {
            Some(d) => d,
            None => scene.render_gt(mesh),
        };
        for (i, obj) in scene.objects.iter().enumerate() {
            let est = ests
                .iter()
                .find(|e| e.index == i)
                .ok_or_else(|| Error::Config(format!("no estimate for object {i} of scene {name}")))?;
            let pose: Pose = *est.best();
            records.push(evaluate(
                &obj.id,
                mesh,
                &pose,
                &obj.gt_pose,
                &depth,
                &scene.camera,
                &params,
            )?);
            adi.push(adi_error(mesh, &pose, &obj.gt_pose)?);
            diameters.push(mesh.diameter());
        }
    }
    let summary = summarize(&records, &params);
    if let Some(path) = &a.out {
        let mut w = std::io::BufWriter::new(fs::File::create(path)?);
        write_report(&mut w, &records, &summary)?;
        w.flush()?;
    }

    let mut tables: BTreeMap<&str, ObjectTable> = BTreeMap::new();
    for ((r, &adi_err), &diam) in records.iter().zip(&adi).zip(&diameters) {
        let t = tables.entry(&r.object_id).or_insert_with(|| ObjectTable {
            object_id: r.object_id.clone(),
            ..ObjectTable::default()
        });
        let add_err = r.err_add.unwrap_or(f64::INFINITY);
        t.count += 1;
        t.mean_add += add_err;
        t.mean_adi += adi_err;
        t.add_recall += add_correct(add_err, diam, a.k_m)? as u8 as f64;
        t.adi_recall += add_correct(adi_err, diam, a.k_m)? as u8 as f64;
    }
    let tables: Vec<ObjectTable> = tables
        .into_values()
        .map(|mut t| {
            let n = t.count as f64;
            t.mean_add /= n;
            t.mean_adi /= n;
            t.add_recall /= n;
            t.adi_recall /= n;
            t
        })
        .collect();
    let excluded = summary.records - summary.evaluated;

    if !json {
        let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
        writeln!(
            out,
            "records {}, evaluated {}, excluded by visibility {}",
            summary.records, summary.evaluated, excluded
        )?;
        writeln!(out, "recall@{} {}", params.threshold, fmt(summary.recall_vsd))?;
        writeln!(out, "auc_vsd {}", fmt(summary.auc_vsd))?;
        writeln!(
            out,
            "{:<16} {:>5} {:>10} {:>10} {:>8} {:>8}",
            "object", "n", "mean_add", "mean_adi", "add_rec", "adi_rec"
        )?;
        for t in &tables {
            writeln!(
                out,
                "{:<16} {:>5} {:>10.3} {:>10.3} {:>8.3} {:>8.3}",
                t.object_id, t.count, t.mean_add, t.mean_adi, t.add_recall, t.adi_recall
            )?;
        }
    }
    Ok(json!({
        "command": "evaluate",
        "summary": to_value(&summary)?,
        "excluded_by_visibility": excluded,
        "params": to_value(&params)?,
        "k_m": a.k_m,
        "objects": to_value(&tables)?,
    }))
}
