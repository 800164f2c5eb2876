//! Full codebook pipeline on a rendered scene: crop, encode, kNN, projective
//! distance, translation and perspective correction.

use aae_pose::codebook::build_codebook;
use aae_pose::geom::{geodesic_distance, subdivide_icosahedron, CameraIntrinsics, Pose, Rotation3, Vec3};
use aae_pose::pipeline::{estimate_pose, labeled_view, BBox, DepthEncoder, Detection, DistanceContext, PoseOptions};
use aae_pose::render::{codebook_views, render_depth, silhouette_bbox, TriangleMesh};

fn main() -> aae_pose::Result<()> {
    let mesh = TriangleMesh::bracket();
    let t_syn_z = 700.0;
    let crop = 32;
    let k_syn = CameraIntrinsics::centered(0.6 * 128.0 * t_syn_z / mesh.diameter(), 128, 128)?;
    let sphere = subdivide_icosahedron(2)?;
    let views = codebook_views(&mesh, &sphere, 36, &k_syn, t_syn_z)?;
    let encoder = DepthEncoder::new(crop, mesh.diameter());
    let cb = build_codebook(&encoder, views.map(|v| v.and_then(|v| labeled_view(&v, 1.2, crop))))?;
    println!("codebook: {} entries of dim {}", cb.len(), cb.dim());

    let k_real = CameraIntrinsics::new(572.4, 573.6, 325.3, 242.0, 640, 480)?;
    let gt = Pose::new(
        Rotation3::from_axis_angle(&Vec3::new(0.2, 1.0, 0.4), 1.1),
        Vec3::new(60.0, -40.0, 850.0),
    );
    let depth = render_depth(&mesh, &gt, &k_real);
    let bbox = BBox::from(silhouette_bbox(&depth).expect("object in view"));
    let det = Detection::new(bbox, "bracket", 1.0)?;
    let ctx = DistanceContext::new(t_syn_z, k_syn, k_real)?;
    let opts = PoseOptions {
        crop_size: crop,
        k: 3,
        ..PoseOptions::default()
    };
    let est = estimate_pose(&depth.to_image(), &det, &encoder, &cb, &ctx, &opts)?;

    println!("top matches {:?}", est.knn);
    println!(
        "rotation error {:.2} deg (uncorrected {:.2} deg)",
        geodesic_distance(&est.pose.rotation, &gt.rotation).to_degrees(),
        geodesic_distance(&est.uncorrected_rotation, &gt.rotation).to_degrees()
    );
    println!(
        "translation error {:.1} mm",
        (est.pose.translation - gt.translation).norm()
    );
    Ok(())
}
