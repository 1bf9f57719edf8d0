//! The five pipeline commands.
//!
//! Directory layout, all roots taken from [`Paths`](crate::config::Paths):
//!
//! ```text
//! models/<id>.obj, models/<id>.csv          class models and 3D anchors
//! graph/graph.json (+ meshes/ anchors/ warps/)
//! instances/<inst>/anchors.csv              2D anchors with visibility
//! instances/<inst>/silhouette.pgm
//! instances/<inst>/truth_pose.json          synth only, read by eval
//! instances/<inst>/truth_mesh.obj           synth only, read by eval
//! instances/<inst>/truth_anchors.csv        synth only
//! out/<inst>/selection.json, diagnostics.json
//! out/<inst>/mesh.obj, pose.json, anchors.csv, report.json
//! out/eval.json, out/eval.txt
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ffd_recon::graph::{self, load_graph, save_graph};
use ffd_recon::mesh::{
    load_anchors_2d, load_anchors_3d, load_mesh, load_silhouette, save_anchors_2d, save_anchors_3d,
    save_mesh, save_silhouette, synth_shape,
};
use ffd_recon::metrics::{eval_errors, Estimate, EvalErrors, GroundTruth};
use ffd_recon::pose::{render_silhouette, select_model, NodeDiagnostic};
use ffd_recon::refine::{refine, RefineReport};
use ffd_recon::{
    AnchorSet2D, AnchorSet3D, CameraPose, ModelGraph, ModelNode, SelectionResult, TriMesh, Vec2,
};
use nalgebra::{Matrix2x3, Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::json;

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult, Outcome};
use crate::logging::{event, StageTimer};

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Ground truth written next to each synthetic instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthTruth {
    pub family: ffd_recon::mesh::ShapeFamily,
    pub params: Vec<f64>,
}

fn random_pose(rng: &mut ChaCha8Rng, size: usize) -> CameraPose {
    let axis = Unit::new_normalize(Vector3::new(
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    ));
    let rot = Rotation3::from_axis_angle(&axis, rng.gen_range(0.0..std::f64::consts::PI));
    let rows: Matrix2x3<f64> = rot.matrix().fixed_rows::<2>(0).into_owned();
    let c = size as f64 / 2.0;
    let jitter = 0.05 * size as f64;
    let t = Vec2::new(
        c + rng.gen_range(-jitter..jitter),
        c + rng.gen_range(-jitter..jitter),
    );
    CameraPose::new(rows, 0.6 * size as f64, t).expect("rotation rows are orthonormal")
}

/// Writes `synth.models` class members and `synth.instances` held-out
/// members seen from random cameras.
pub fn synth(cfg: &PipelineConfig) -> CliResult<Outcome> {
    let timer = StageTimer::start("synth");
    let sc = &cfg.synth;
    let base = sc.base_params();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        base.iter()
            .map(|b| b * (1.0 + sc.spread * rng.gen_range(-1.0..=1.0)))
            .collect()
    };
    let family = serde_json::to_value(sc.family)?;
    let family = family.as_str().unwrap_or("shape").to_string();

    create_dir(&cfg.paths.models)?;
    for i in 0..sc.models {
        let params = draw(&mut rng);
        let (mesh, anchors) = synth_shape(sc.family, &params, sc.resolution)?;
        let id = format!("{family}-{i:02}");
        save_mesh(&mesh, cfg.paths.models.join(format!("{id}.obj")))?;
        save_anchors_3d(&anchors, cfg.paths.models.join(format!("{id}.csv")))?;
        event("synth", "model", json!({ "id": id, "params": params }));
    }

    for j in 0..sc.instances {
        let params = draw(&mut rng);
        let (mesh, anchors) = synth_shape(sc.family, &params, sc.resolution)?;
        // same units as graph nodes
        let norm = mesh.normalization()?;
        let mesh = mesh.transformed(&norm);
        let anchors = anchors.transformed(&norm);
        let pose = random_pose(&mut rng, sc.image_size);
        let pts = anchors.points().iter().map(|p| pose.project(p)).collect();
        let w = AnchorSet2D::new(anchors.ids().to_vec(), pts, vec![true; anchors.len()])?;
        let sil = render_silhouette(&mesh, &pose, sc.image_size, sc.image_size)?;

        let id = format!("i{j:02}");
        let dir = cfg.paths.instances.join(&id);
        create_dir(&dir)?;
        save_anchors_2d(&w, dir.join("anchors.csv"))?;
        save_silhouette(&sil, dir.join("silhouette.pgm"))?;
        save_mesh(&mesh, dir.join("truth_mesh.obj"))?;
        save_anchors_3d(&anchors, dir.join("truth_anchors.csv"))?;
        write_json(&dir.join("truth_pose.json"), &pose)?;
        write_json(
            &dir.join("truth.json"),
            &SynthTruth {
                family: sc.family,
                params: params.clone(),
            },
        )?;
        event(
            "synth",
            "instance",
            json!({ "id": id, "params": params, "pixels": sil.count() }),
        );
    }
    timer.done(json!({ "models": sc.models, "instances": sc.instances }));
    Ok(Outcome::Complete)
}

/// Class models found in `dir`, sorted by id.
pub fn load_models(dir: &Path, cfg: &PipelineConfig) -> CliResult<Vec<ModelNode>> {
    let mut objs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "obj"))
        .collect();
    objs.sort();
    let mut nodes = Vec::with_capacity(objs.len());
    for obj in objs {
        let id = obj
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| CliError::Input(format!("{}: file name is not UTF-8", obj.display())))?
            .to_string();
        let mesh = load_mesh(&obj)?;
        let anchors = load_anchors_3d(obj.with_extension("csv"))?;
        nodes.push(ModelNode::new(
            &id,
            &mesh,
            &anchors,
            cfg.lattice.degrees,
            cfg.lattice.margin,
        )?);
    }
    Ok(nodes)
}

pub fn build_graph(cfg: &PipelineConfig) -> CliResult<Outcome> {
    let timer = StageTimer::start("build-graph");
    let nodes = load_models(&cfg.paths.models, cfg)?;
    event("build-graph", "models", json!({ "count": nodes.len() }));
    let (graph, reports) = graph::build_graph(nodes, &cfg.graph)?;
    for r in &reports {
        event(
            "build-graph",
            "pair",
            json!({
                "source": r.source, "target": r.target, "s_dist": r.s_dist,
                "s_iou": r.s_iou, "accepted": r.accepted, "error": r.error,
            }),
        );
    }
    if graph.edges().is_empty() {
        log::warn!("graph has no edges; thresholds may be too strict for this class");
    }
    save_graph(&graph, &cfg.paths.graph)?;
    let dir = cfg.paths.graph.parent().unwrap_or(Path::new("."));
    write_json(&dir.join("pairs.json"), &reports)?;
    let failed = reports.iter().filter(|r| r.error.is_some()).count();
    timer.done(json!({ "nodes": graph.nodes().len(), "edges": graph.edges().len(), "failed_pairs": failed }));
    Ok(if failed > 0 {
        Outcome::Partial
    } else {
        Outcome::Complete
    })
}

/// Instance ids to process: `only`, or every subdirectory of the instances
/// root in sorted order.
pub fn instance_ids(cfg: &PipelineConfig, only: Option<&str>) -> CliResult<Vec<String>> {
    if let Some(id) = only {
        return Ok(vec![id.to_string()]);
    }
    let root = &cfg.paths.instances;
    let mut ids: Vec<String> = fs::read_dir(root)
        .map_err(|e| io_err(root, e))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .filter_map(|e| e.file_name().to_str().map(str::to_string))
        .collect();
    ids.sort();
    if ids.is_empty() {
        return Err(CliError::Input(format!(
            "no instances under {}",
            root.display()
        )));
    }
    Ok(ids)
}

/// Runs `f` per instance. One failure makes the run partial; failing them
/// all returns the first error.
fn for_each_instance(
    stage: &'static str,
    ids: &[String],
    mut f: impl FnMut(&str) -> CliResult<Outcome>,
) -> CliResult<Outcome> {
    let timer = StageTimer::start(stage);
    let mut first_err = None;
    let mut partial = false;
    let mut ok = 0;
    for id in ids {
        match f(id) {
            Ok(o) => {
                ok += 1;
                partial |= o == Outcome::Partial;
            }
            Err(e) => {
                event(
                    stage,
                    "instance_failed",
                    json!({ "id": id, "error": e.to_string(), "code": e.exit_code() }),
                );
                first_err.get_or_insert(e);
            }
        }
    }
    timer.done(json!({ "instances": ids.len(), "succeeded": ok }));
    match first_err {
        Some(e) if ok == 0 => Err(e),
        Some(_) => Ok(Outcome::Partial),
        None if partial => Ok(Outcome::Partial),
        None => Ok(Outcome::Complete),
    }
}

fn image_inputs(cfg: &PipelineConfig, id: &str) -> CliResult<(AnchorSet2D, ffd_recon::Silhouette)> {
    let dir = cfg.paths.instances.join(id);
    Ok((
        load_anchors_2d(dir.join("anchors.csv"))?,
        load_silhouette(dir.join("silhouette.pgm"))?,
    ))
}

pub fn select(cfg: &PipelineConfig, only: Option<&str>) -> CliResult<Outcome> {
    let graph = load_graph(&cfg.paths.graph)?;
    let ids = instance_ids(cfg, only)?;
    for_each_instance("select", &ids, |id| {
        let (w, sil) = image_inputs(cfg, id)?;
        let (sel, diags): (SelectionResult, Vec<NodeDiagnostic>) =
            select_model(&graph, &w, &sil, &cfg.admm)?;
        let out = cfg.paths.out.join(id);
        create_dir(&out)?;
        write_json(&out.join("selection.json"), &sel)?;
        write_json(&out.join("diagnostics.json"), &diags)?;
        let failed = diags.iter().filter(|d| d.error.is_some()).count();
        event(
            "select",
            "selected",
            json!({ "id": id, "node": sel.node_id, "iou": sel.iou, "residual": sel.residual, "failed_nodes": failed }),
        );
        Ok(if failed > 0 {
            Outcome::Partial
        } else {
            Outcome::Complete
        })
    })
}

/// Written to `out/<inst>/report.json` by `reconstruct`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconstructReport {
    pub center: String,
    pub weights: BTreeMap<String, f64>,
    pub refine: RefineReport,
}

/// Rescales a refined mesh to a unit bounding-box diagonal and moves the
/// size into the camera, so the pose is comparable with one for a normalized
/// ground-truth mesh. Projections are unchanged.
pub fn normalized_output(
    mesh: &TriMesh,
    anchors: &AnchorSet3D,
    pose: &CameraPose,
) -> CliResult<(TriMesh, AnchorSet3D, CameraPose)> {
    let n = mesh.normalization()?;
    let scale = pose.scale() / n.scale;
    let t = pose.translation() + pose.scaled_rotation() * n.center;
    let pose = CameraPose::new(pose.rotation(), scale, t)?;
    Ok((mesh.transformed(&n), anchors.transformed(&n), pose))
}

pub fn reconstruct(cfg: &PipelineConfig, only: Option<&str>) -> CliResult<Outcome> {
    let graph: ModelGraph = load_graph(&cfg.paths.graph)?;
    let ids = instance_ids(cfg, only)?;
    for_each_instance("reconstruct", &ids, |id| {
        let (w, sil) = image_inputs(cfg, id)?;
        let out = cfg.paths.out.join(id);
        let sel: SelectionResult = read_json(&out.join("selection.json"))?;
        let res = refine(&sel, &graph, &w, &sil, &cfg.refine)?;
        let (mesh, anchors, pose) = normalized_output(&res.mesh, &res.anchors, &res.pose)?;
        save_mesh(&mesh, out.join("mesh.obj"))?;
        save_anchors_3d(&anchors, out.join("anchors.csv"))?;
        write_json(&out.join("pose.json"), &pose)?;
        let report = ReconstructReport {
            center: sel.node_id.clone(),
            weights: res.weights.clone(),
            refine: res.report.clone(),
        };
        write_json(&out.join("report.json"), &report)?;
        event(
            "reconstruct",
            "refined",
            json!({
                "id": id, "center": sel.node_id, "initial": res.report.initial.total,
                "final": res.report.last.total, "iterations": res.report.iterations,
                "converged": res.report.converged,
            }),
        );
        Ok(Outcome::Complete)
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRow {
    pub id: String,
    #[serde(flatten)]
    pub errors: EvalErrors,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub instances: Vec<EvalRow>,
    pub mean: Option<EvalErrors>,
    pub missing: Vec<String>,
}

impl EvalReport {
    /// Plain-text table with one row per instance and the mean last.
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<12} {:>12} {:>12} {:>12}\n",
            "instance", "e_RP", "e_pose", "e_3D"
        );
        let mut row = |name: &str, e: &EvalErrors| {
            s.push_str(&format!(
                "{name:<12} {:>12.4} {:>12.4} {:>12.4}\n",
                e.e_rp, e.e_pose, e.e_3d
            ));
        };
        for r in &self.instances {
            row(&r.id, &r.errors);
        }
        if let Some(m) = &self.mean {
            row("mean", m);
        }
        s
    }
}

pub fn eval(cfg: &PipelineConfig, only: Option<&str>) -> CliResult<Outcome> {
    let timer = StageTimer::start("eval");
    let ids = instance_ids(cfg, only)?;
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    for id in &ids {
        let truth = cfg.paths.instances.join(id);
        let est = cfg.paths.out.join(id);
        let pair = (|| -> CliResult<(Estimate, GroundTruth)> {
            let gt = GroundTruth {
                pose: read_json(&truth.join("truth_pose.json"))?,
                mesh: load_mesh(truth.join("truth_mesh.obj"))?,
                anchors: load_anchors_2d(truth.join("anchors.csv"))?,
            };
            let est = Estimate {
                pose: read_json(&est.join("pose.json"))?,
                mesh: load_mesh(est.join("mesh.obj"))?,
                anchors: load_anchors_3d(est.join("anchors.csv"))?,
            };
            Ok((est, gt))
        })();
        match pair {
            Ok((e, g)) => {
                let errors = eval_errors(&e, &g, cfg.graph.theta, cfg.graph.samples_per_area)?;
                event("eval", "instance", json!({ "id": id, "errors": errors }));
                rows.push(EvalRow {
                    id: id.clone(),
                    errors,
                });
            }
            Err(e) => {
                event(
                    "eval",
                    "missing",
                    json!({ "id": id, "error": e.to_string() }),
                );
                missing.push(id.clone());
            }
        }
    }
    if rows.is_empty() {
        return Err(CliError::Input(
            "no estimate/ground-truth pairs to evaluate".into(),
        ));
    }
    let n = rows.len() as f64;
    let mean = EvalErrors {
        e_rp: rows.iter().map(|r| r.errors.e_rp).sum::<f64>() / n,
        e_pose: rows.iter().map(|r| r.errors.e_pose).sum::<f64>() / n,
        e_3d: rows.iter().map(|r| r.errors.e_3d).sum::<f64>() / n,
    };
    let report = EvalReport {
        instances: rows,
        mean: Some(mean),
        missing,
    };
    create_dir(&cfg.paths.out)?;
    write_json(&cfg.paths.out.join("eval.json"), &report)?;
    let table = report.table();
    fs::write(cfg.paths.out.join("eval.txt"), &table).map_err(|e| io_err(&cfg.paths.out, e))?;
    print!("{table}");
    timer.done(json!({ "evaluated": report.instances.len(), "missing": report.missing.len() }));
    Ok(if report.missing.is_empty() {
        Outcome::Complete
    } else {
        Outcome::Partial
    })
}
