//! VSD, ADD/ADI, recall and AUC on a few estimates of one object.

use aae_pose::geom::{CameraIntrinsics, Pose, Rotation3, Vec3};
use aae_pose::metrics::{adi_error, evaluate, summarize, write_report, VsdParams};
use aae_pose::render::{render_depth, TriangleMesh};

fn main() -> aae_pose::Result<()> {
    let mesh = TriangleMesh::cuboid(80.0, 80.0, 40.0);
    let k = CameraIntrinsics::centered(572.0, 320, 240)?;
    let gt = Pose::new(Rotation3::about_x(0.5), Vec3::new(0.0, 0.0, 700.0));
    let scene = render_depth(&mesh, &gt, &k);
    let params = VsdParams::default();

    let estimates = [
        ("exact", gt),
        (
            "quarter turn",
            Pose::new(
                gt.rotation * Rotation3::about_z(std::f64::consts::FRAC_PI_2),
                gt.translation,
            ),
        ),
        (
            "5 mm off",
            Pose::new(gt.rotation, gt.translation + Vec3::new(5.0, 0.0, 0.0)),
        ),
        (
            "30 mm deeper",
            Pose::new(gt.rotation, gt.translation + Vec3::new(0.0, 0.0, 30.0)),
        ),
    ];
    let mut records = Vec::new();
    for (name, est) in &estimates {
        let r = evaluate(name, &mesh, est, &gt, &scene, &k, &params)?;
        println!(
            "{name:>13}: vsd {:.3}  add {:7.3}  adi {:6.3}  visibility {:.2}",
            r.err_vsd.unwrap_or(f64::NAN),
            r.err_add.unwrap_or(f64::NAN),
            adi_error(&mesh, est, &gt)?,
            r.visibility
        );
        records.push(r);
    }
    let summary = summarize(&records, &params);
    println!("recall@0.3 {:?}, auc {:?}", summary.recall_vsd, summary.auc_vsd);
    write_report(std::io::stdout().lock(), &records[..1], &summary)?;
    Ok(())
}
