//! Render a depth map of the bracket mesh and report its silhouette box.
//!
//! Usage: `cargo run --example render_depth -- [out.png]` (defaults to the temp dir)

use aae_pose::geom::{CameraIntrinsics, Pose, Rotation3, Vec3};
use aae_pose::render::{render_depth, silhouette_bbox, TriangleMesh};

fn main() -> aae_pose::Result<()> {
    let out: std::path::PathBuf = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("bracket_depth.png"), Into::into);
    let mesh = TriangleMesh::bracket();
    let k = CameraIntrinsics::new(572.4, 573.6, 325.3, 242.0, 640, 480)?;
    let pose = Pose::new(
        Rotation3::from_axis_angle(&Vec3::new(1.0, 1.0, 0.3), 0.7),
        Vec3::new(20.0, -10.0, 700.0),
    );
    let depth = render_depth(&mesh, &pose, &k);
    let bbox = silhouette_bbox(&depth).expect("object in view");
    let (near, far) = depth
        .data
        .iter()
        .filter(|&&d| d > 0.0)
        .fold((f32::INFINITY, 0.0f32), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    println!("mesh diameter {:.1} mm", mesh.diameter());
    println!("{} pixels covered, depth {near:.1}..{far:.1} mm", depth.valid_count());
    println!(
        "bbox x {} y {} w {} h {}, diagonal {:.1} px",
        bbox.x,
        bbox.y,
        bbox.w,
        bbox.h,
        bbox.diagonal()
    );
    depth.save_png16(&out)?;
    println!("wrote {}", out.display());
    Ok(())
}
