//! Point-to-plane ICP recovering a perturbed pose against rendered depth.

use aae_pose::geom::{geodesic_distance, CameraIntrinsics, Pose, Rotation3, Vec3};
use aae_pose::icp::{backproject, estimate_normals, icp_refine_z, refine_pose, IcpConfig, PointCloud};
use aae_pose::render::{render_depth, TriangleMesh};

fn main() -> aae_pose::Result<()> {
    let mesh = TriangleMesh::bracket();
    let k = CameraIntrinsics::new(572.4, 573.6, 160.0, 120.0, 320, 240)?;
    let gt = Pose::new(
        Rotation3::from_axis_angle(&Vec3::new(1.0, 1.0, 0.3), 0.7),
        Vec3::new(10.0, -5.0, 700.0),
    );
    let scene = estimate_normals(&backproject(&render_depth(&mesh, &gt, &k), &k), 12)?;
    let model = PointCloud::sample_mesh(&mesh, 3000, 5);

    let along_ray = Pose::new(gt.rotation, gt.translation * (1.0 + 40.0 / gt.translation.norm()));
    let z = icp_refine_z(&model, &scene, &along_ray)?;
    println!(
        "z-stage: 40 mm ray offset -> {:.2} mm",
        (z.translation - gt.translation).norm()
    );

    let init = Pose::new(
        Rotation3::from_axis_angle(&Vec3::new(0.3, -1.0, 0.5), 8f64.to_radians()) * gt.rotation,
        gt.translation + Vec3::new(15.0, -10.0, 20.0),
    );
    let (pose, stats) = refine_pose(&model, &scene, &init, &IcpConfig::default())?;
    println!(
        "after {} iterations (converged {}): {:.3} deg, {:.3} mm",
        stats.iterations,
        stats.converged,
        geodesic_distance(&pose.rotation, &gt.rotation).to_degrees(),
        (pose.translation - gt.translation).norm()
    );
    for it in stats.history.iter().take(5) {
        println!(
            "  threshold {:6.2} mm, {:4} pairs, residual {:.3} -> {:.3}",
            it.threshold, it.correspondences, it.residual_before, it.residual_after
        );
    }
    Ok(())
}
