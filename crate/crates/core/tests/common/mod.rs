#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use aae_pose::cli::scene::{SceneDescriptor, SceneObject};
use aae_pose::geom::{CameraIntrinsics, Pose, Rotation3, Vec3};
use aae_pose::render::{save_obj, TriangleMesh};

pub fn camera() -> CameraIntrinsics {
    CameraIntrinsics::new(572.4, 573.6, 160.0, 120.0, 320, 240).unwrap()
}

pub fn bracket_pose() -> Pose {
    Pose::new(
        Rotation3::from_axis_angle(&Vec3::new(1.0, 1.0, 0.3), 0.7),
        Vec3::new(10.0, -5.0, 700.0),
    )
}

pub fn write_mesh(dir: &Path) -> PathBuf {
    let path = dir.join("bracket.obj");
    save_obj(&TriangleMesh::bracket(), &path).unwrap();
    path
}

/// Writes `<name>.toml` next to the mesh written by [`write_mesh`].
pub fn write_scene(dir: &Path, name: &str, objects: &[(&str, Pose)], depth: Option<&str>) -> PathBuf {
    let scene = SceneDescriptor {
        mesh: "bracket.obj".into(),
        image: None,
        depth: depth.map(PathBuf::from),
        camera: camera(),
        objects: objects
            .iter()
            .map(|(id, pose)| SceneObject {
                id: id.to_string(),
                gt_pose: *pose,
                bbox: None,
            })
            .collect(),
    };
    let path = dir.join(format!("{name}.toml"));
    fs::write(&path, toml::to_string(&scene).unwrap()).unwrap();
    path
}

/// Runs the CLI in-process; returns the exit code and stdout.
pub fn run(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let code = aae_pose::cli::run(std::iter::once("aae").chain(args.iter().copied()), &mut out);
    (code, String::from_utf8(out).unwrap())
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
