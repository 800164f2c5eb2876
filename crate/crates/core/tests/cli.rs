mod common;

use std::fs;

use aae_pose::cli::scene::{EstimateFile, ObjectEstimate, SceneEstimates};
use aae_pose::cli::{EXIT_DATA, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE};
use aae_pose::codebook::Codebook;
use aae_pose::geom::{geodesic_distance, inplane_rotations, subdivide_icosahedron, view_rotation_obj2cam, Pose, Vec3};
use aae_pose::render::{render_depth, TriangleMesh};
use aae_pose::toy::{load_checkpoint, train::init_model, TrainConfig};
use common::{bracket_pose, camera, run, s, write_mesh, write_scene};
use serde_json::Value;

const SMALL_TRAIN: &str = "input = \"d\"\ntarget = \"a\"\n[train]\nbatch_size = 4\n";

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    assert_eq!(run(&["bogus"]).0, EXIT_USAGE);
    assert_eq!(run(&["codebook-build"]).0, EXIT_USAGE);
    assert_eq!(run(&["--help"]).0, EXIT_OK);
}

#[test]
fn toy_train_zero_iterations_writes_initial_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let (code, stdout) = run(&[
        "--seed",
        "1",
        "--json",
        "toy-train",
        "--iterations",
        "0",
        "--out",
        s(&out),
    ]);
    assert_eq!(code, EXIT_OK);
    let doc: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["command"], "toy-train");
    let cfg = TrainConfig {
        seed: 1,
        ..TrainConfig::default()
    };
    assert_eq!(
        load_checkpoint(out.join("model.aaet")).unwrap(),
        init_model(&cfg).unwrap()
    );
    for f in ["loss.csv", "latent.csv", "report.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn toy_train_is_reproducible_and_finite() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("toy.toml");
    fs::write(&config, SMALL_TRAIN).unwrap();
    let mut checkpoints = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let (code, stdout) = run(&[
            "--seed",
            "1",
            "--json",
            "toy-train",
            "--config",
            s(&config),
            "--iterations",
            "5",
            "--out",
            s(&out),
        ]);
        assert_eq!(code, EXIT_OK);
        let doc: Value = serde_json::from_str(&stdout).unwrap();
        assert!(doc["final_loss"].as_f64().unwrap().is_finite());
        checkpoints.push(fs::read(out.join("model.aaet")).unwrap());
    }
    assert_eq!(checkpoints[0], checkpoints[1]);
}

#[test]
fn toy_train_divergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("toy.toml");
    fs::write(&config, format!("{SMALL_TRAIN}learning_rate = 1e30\n")).unwrap();
    let (code, _) = run(&[
        "toy-train",
        "--config",
        s(&config),
        "--iterations",
        "20",
        "--out",
        s(&dir.path().join("x")),
    ]);
    assert_eq!(code, EXIT_NUMERICAL);
}

#[test]
fn toy_train_bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("toy.toml");
    fs::write(&config, "input = \"q\"\n").unwrap();
    let (code, _) = run(&["toy-train", "--config", s(&config), "--out", s(&dir.path().join("x"))]);
    assert_eq!(code, EXIT_DATA);
}

#[test]
fn codebook_build_counts_and_bit_identical_rebuild() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = write_mesh(dir.path());
    let a = dir.path().join("a.bin");
    let b = dir.path().join("b.bin");
    for out in [&a, &b] {
        let (code, _) = run(&[
            "codebook-build",
            "--mesh",
            s(&mesh),
            "--level",
            "0",
            "--inplane",
            "1",
            "--out",
            s(out),
        ]);
        assert_eq!(code, EXIT_OK);
    }
    assert_eq!(Codebook::load(&a).unwrap().len(), 12);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert!(dir.path().join("a.bin.json").is_file());
    let (code, _) = run(&[
        "codebook-build",
        "--mesh",
        s(&dir.path().join("none.obj")),
        "--out",
        s(&a),
    ]);
    assert_eq!(code, EXIT_DATA);
}

/// Largest angle from any viewpoint to its nearest neighbour.
fn viewpoint_spacing(level: u32) -> f64 {
    let sphere = subdivide_icosahedron(level).unwrap();
    sphere
        .viewpoints
        .iter()
        .enumerate()
        .map(|(i, a)| {
            sphere
                .viewpoints
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, b)| a.dot(b).clamp(-1.0, 1.0).acos())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

#[test]
fn estimate_closed_loop_icp_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let mesh_path = write_mesh(dir.path());
    let cb = dir.path().join("cb.bin");
    let (code, _) = run(&[
        "codebook-build",
        "--mesh",
        s(&mesh_path),
        "--level",
        "2",
        "--inplane",
        "36",
        "--out",
        s(&cb),
    ]);
    assert_eq!(code, EXIT_OK);

    // A codebook pose placed on the optical axis.
    let sphere = subdivide_icosahedron(2).unwrap();
    let inplane = inplane_rotations(36).unwrap();
    let gt = Pose::new(
        view_rotation_obj2cam(&sphere.viewpoints[37], &inplane[7]),
        Vec3::new(0.0, 0.0, 800.0),
    );
    let mesh = TriangleMesh::bracket();
    render_depth(&mesh, &gt, &camera())
        .save_raw(dir.path().join("depth.raw"))
        .unwrap();
    let scene = write_scene(dir.path(), "scene", &[("bracket", gt)], Some("depth.raw"));

    let est_path = dir.path().join("est.json");
    let (code, stdout) = run(&[
        "--json",
        "estimate",
        "--scene",
        s(&scene),
        "--codebook",
        s(&cb),
        "--icp",
        "--k",
        "3",
        "--out",
        s(&est_path),
    ]);
    assert_eq!(code, EXIT_OK, "{stdout}");
    let doc: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(doc["detections"][0]["knn"].as_array().unwrap().len(), 3);

    let est = &EstimateFile::load(&est_path).unwrap().scenes[0].estimates[0];
    let bin = 10f64.to_radians() + viewpoint_spacing(2);
    assert!(geodesic_distance(&est.pose.rotation, &gt.rotation) <= bin);
    let refined = est.refined_pose.unwrap();
    assert!(geodesic_distance(&refined.rotation, &gt.rotation) < 1f64.to_radians());
    assert!((refined.translation - gt.translation).norm() < 2.0);

    let scenes = dir.path().join("scenes");
    fs::create_dir(&scenes).unwrap();
    fs::copy(&scene, scenes.join("scene.toml")).unwrap();
    fs::copy(&mesh_path, scenes.join("bracket.obj")).unwrap();
    fs::copy(dir.path().join("depth.raw"), scenes.join("depth.raw")).unwrap();
    let (code, stdout) = run(&["--json", "evaluate", "--scenes", s(&scenes), "--est", s(&est_path)]);
    assert_eq!(code, EXIT_OK);
    let doc: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(doc["summary"]["records"], 1);
    assert!(doc["summary"]["recall_vsd"].as_f64().unwrap() == 1.0);
}

#[test]
fn estimate_without_depth_reports_rgb_pose_then_fails() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = write_mesh(dir.path());
    let cb = dir.path().join("cb.bin");
    run(&[
        "codebook-build",
        "--mesh",
        s(&mesh),
        "--level",
        "1",
        "--inplane",
        "12",
        "--out",
        s(&cb),
    ]);
    let scene = write_scene(dir.path(), "scene", &[("bracket", bracket_pose())], None);
    let (code, stdout) = run(&["estimate", "--scene", s(&scene), "--codebook", s(&cb), "--icp"]);
    assert_eq!(code, EXIT_DATA);
    assert!(stdout.starts_with("bracket #0: t = ["), "{stdout}");

    let (code, stdout) = run(&[
        "--json",
        "estimate",
        "--scene",
        s(&scene),
        "--codebook",
        s(&cb),
        "--icp",
    ]);
    assert_eq!(code, EXIT_DATA);
    let doc: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(doc["detections"].as_array().unwrap().len(), 1);
    assert!(doc["error"].as_str().unwrap().contains("missing depth"));

    let empty = write_scene(dir.path(), "empty", &[], None);
    let (code, stdout) = run(&["estimate", "--scene", s(&empty), "--codebook", s(&cb), "--icp"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(stdout.trim(), "no detections");
}

fn estimate_file(scene: &str, poses: &[Pose]) -> EstimateFile {
    EstimateFile {
        schema_version: 1,
        scenes: vec![SceneEstimates {
            scene: scene.into(),
            estimates: poses
                .iter()
                .enumerate()
                .map(|(index, pose)| ObjectEstimate {
                    index,
                    object_id: format!("obj{index}"),
                    pose: *pose,
                    refined_pose: None,
                })
                .collect(),
        }],
    }
}

#[test]
fn evaluate_exact_estimates_and_visibility_filter() {
    let dir = tempfile::tempdir().unwrap();
    write_mesh(dir.path());
    let front = bracket_pose();
    let hidden = Pose::new(front.rotation, front.translation * 2.0);
    write_scene(dir.path(), "two", &[("front", front), ("hidden", hidden)], None);
    let work = tempfile::tempdir().unwrap();
    let est = work.path().join("est.json");
    fs::write(
        &est,
        serde_json::to_string(&estimate_file("two.toml", &[front, hidden])).unwrap(),
    )
    .unwrap();
    let report = work.path().join("report.jsonl");
    let (code, stdout) = run(&[
        "--json",
        "evaluate",
        "--scenes",
        s(dir.path()),
        "--est",
        s(&est),
        "--out",
        s(&report),
    ]);
    assert_eq!(code, EXIT_OK, "{stdout}");
    let doc: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(doc["summary"]["records"], 2);
    assert_eq!(doc["summary"]["evaluated"], 1);
    assert_eq!(doc["excluded_by_visibility"], 1);
    assert_eq!(doc["summary"]["recall_vsd"], 1.0);
    assert_eq!(doc["summary"]["auc_vsd"], 1.0);
    assert_eq!(fs::read_to_string(&report).unwrap().lines().count(), 3);

    // ADD of a pure 5 mm shift is exactly 5.
    let shifted = Pose::new(front.rotation, front.translation + Vec3::new(3.0, 4.0, 0.0));
    fs::write(
        &est,
        serde_json::to_string(&estimate_file("two.toml", &[shifted, hidden])).unwrap(),
    )
    .unwrap();
    let (_, stdout) = run(&["--json", "evaluate", "--scenes", s(dir.path()), "--est", s(&est)]);
    let doc: Value = serde_json::from_str(&stdout).unwrap();
    let add = doc["objects"][0]["mean_add"].as_f64().unwrap();
    assert!((add - 5.0).abs() < 1e-9, "{add}");

    fs::write(
        &est,
        serde_json::to_string(&estimate_file("other.toml", &[front])).unwrap(),
    )
    .unwrap();
    assert_eq!(
        run(&["evaluate", "--scenes", s(dir.path()), "--est", s(&est)]).0,
        EXIT_DATA
    );
}
