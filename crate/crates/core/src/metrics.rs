//! Pose-error metrics: visible surface discrepancy, ADD/ADI, recall and AUC.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{CameraIntrinsics, Pose, Vec3};
use crate::kdtree::KdTree;
use crate::render::{render_depth, DepthImage, TriangleMesh};

/// Version tag carried by every evaluation report line.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VsdParams {
    /// Depth agreement tolerance in mm.
    pub tau: f64,
    /// Visibility tolerance in mm against the scene depth.
    pub delta: f64,
    /// Recall threshold on the error.
    pub threshold: f64,
    /// Records at or below this visible fraction are excluded from aggregates.
    pub min_visibility: f64,
}

impl Default for VsdParams {
    fn default() -> Self {
        VsdParams {
            tau: 20.0,
            delta: 15.0,
            threshold: 0.3,
            min_visibility: 0.1,
        }
    }
}

impl VsdParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !(self.delta >= 0.0) {
            return Err(Error::Config("tau must be > 0 and delta >= 0".into()));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::Config(format!("threshold {} not in (0, 1]", self.threshold)));
        }
        if !(0.0..=1.0).contains(&self.min_visibility) {
            return Err(Error::Config(format!(
                "min_visibility {} not in [0, 1]",
                self.min_visibility
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub object_id: String,
    pub est_pose: Pose,
    pub gt_pose: Pose,
    pub err_vsd: Option<f64>,
    pub err_add: Option<f64>,
    pub visibility: f64,
}

fn visible_mask(rendered: &DepthImage, scene: &DepthImage, delta: f64) -> Vec<bool> {
    rendered
        .data
        .iter()
        .zip(&scene.data)
        .map(|(&r, &s)| r > 0.0 && (s <= 0.0 || r as f64 <= s as f64 + delta))
        .collect()
}

/// VSD from already rendered estimate and ground-truth depth maps.
/// An empty union of visibility masks scores 1.
pub fn vsd_from_depths(
    d_est: &DepthImage,
    d_gt: &DepthImage,
    scene: &DepthImage,
    params: &VsdParams,
) -> Result<(f64, f64)> {
    for d in [d_est, d_gt] {
        if d.width != scene.width || d.height != scene.height {
            return Err(Error::Dimension {
                expected: scene.data.len(),
                actual: d.data.len(),
            });
        }
    }
    let silhouette = d_gt.valid_count();
    if silhouette == 0 {
        return Err(Error::DegenerateView);
    }
    let v_est = visible_mask(d_est, scene, params.delta);
    let v_gt = visible_mask(d_gt, scene, params.delta);
    let mut union = 0usize;
    let mut matched = 0usize;
    let mut gt_visible = 0usize;
    for i in 0..v_est.len() {
        gt_visible += v_gt[i] as usize;
        if v_est[i] || v_gt[i] {
            union += 1;
            if v_est[i] && v_gt[i] && ((d_est.data[i] as f64) - (d_gt.data[i] as f64)).abs() < params.tau {
                matched += 1;
            }
        }
    }
    let err = if union == 0 {
        1.0
    } else {
        (union - matched) as f64 / union as f64
    };
    Ok((err, gt_visible as f64 / silhouette as f64))
}

/// Step-cost visible surface discrepancy and the ground-truth visible fraction.
pub fn vsd_error(
    mesh: &TriangleMesh,
    est: &Pose,
    gt: &Pose,
    scene_depth: &DepthImage,
    k: &CameraIntrinsics,
    params: &VsdParams,
) -> Result<(f64, f64)> {
    if scene_depth.width != k.width as usize || scene_depth.height != k.height as usize {
        return Err(Error::Dimension {
            expected: k.pixel_count(),
            actual: scene_depth.data.len(),
        });
    }
    let d_est = render_depth(mesh, est, k);
    let d_gt = render_depth(mesh, gt, k);
    vsd_from_depths(&d_est, &d_gt, scene_depth, params)
}

/// Mean distance between corresponding transformed points.
pub fn add_error_points(points: &[Vec3], est: &Pose, gt: &Pose) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyInput("model points"));
    }
    let sum: f64 = points
        .iter()
        .map(|x| (est.transform_point(x) - gt.transform_point(x)).norm())
        .sum();
    Ok(sum / points.len() as f64)
}

/// Mean distance from each gt-transformed point to the closest est-transformed point.
pub fn adi_error_points(points: &[Vec3], est: &Pose, gt: &Pose) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyInput("model points"));
    }
    let moved: Vec<Vec3> = points.iter().map(|x| est.transform_point(x)).collect();
    let tree = KdTree::new(&moved);
    let sum: f64 = points
        .iter()
        .map(|x| {
            let (_, d2) = tree.nearest(&gt.transform_point(x)).expect("tree is non-empty");
            d2.sqrt()
        })
        .sum();
    Ok(sum / points.len() as f64)
}

pub fn add_error(mesh: &TriangleMesh, est: &Pose, gt: &Pose) -> Result<f64> {
    add_error_points(&mesh.vertices, est, gt)
}

pub fn adi_error(mesh: &TriangleMesh, est: &Pose, gt: &Pose) -> Result<f64> {
    adi_error_points(&mesh.vertices, est, gt)
}

/// `err_add < k_m * diameter`.
pub fn add_correct(err_add: f64, diameter: f64, k_m: f64) -> Result<bool> {
    if !(diameter > 0.0) {
        return Err(Error::bounds("diameter", format!("{diameter} must be > 0")));
    }
    Ok(err_add < k_m * diameter)
}

/// VSD errors of records that carry one and pass the visibility filter.
pub fn filtered_vsd(records: &[EvalRecord], min_visibility: f64) -> Vec<f64> {
    records
        .iter()
        .filter(|r| min_visibility == 0.0 || r.visibility > min_visibility)
        .filter_map(|r| r.err_vsd)
        .collect()
}

/// Fraction of filtered records with `err_vsd < threshold`.
pub fn recall_at(records: &[EvalRecord], threshold: f64, min_visibility: f64) -> Result<f64> {
    recall_of(&filtered_vsd(records, min_visibility), threshold)
}

pub fn recall_of(errors: &[f64], threshold: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::EmptyInput("no records pass the visibility filter"));
    }
    Ok(errors.iter().filter(|&&e| e < threshold).count() as f64 / errors.len() as f64)
}

/// Area under the recall-vs-threshold curve over `[0, 1]`.
pub fn auc_vsd(records: &[EvalRecord], min_visibility: f64) -> Result<f64> {
    auc_of(&filtered_vsd(records, min_visibility))
}

/// Exact step integral of `recall(e)` over `[0, 1]`: between consecutive
/// sorted errors the recall is constant.
pub fn auc_of(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::EmptyInput("no records pass the visibility filter"));
    }
    let mut sorted: Vec<f64> = errors.iter().map(|e| e.clamp(0.0, 1.0)).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut area = 0.0;
    for (i, &e) in sorted.iter().enumerate() {
        let next = sorted.get(i + 1).copied().unwrap_or(1.0);
        area += (i + 1) as f64 / n * (next - e);
    }
    Ok(area)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub records: usize,
    pub evaluated: usize,
    pub recall_vsd: Option<f64>,
    pub auc_vsd: Option<f64>,
    pub mean_vsd: Option<f64>,
    pub mean_add: Option<f64>,
}

pub fn summarize(records: &[EvalRecord], params: &VsdParams) -> EvalSummary {
    let errs = filtered_vsd(records, params.min_visibility);
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let adds: Vec<f64> = records.iter().filter_map(|r| r.err_add).collect();
    EvalSummary {
        records: records.len(),
        evaluated: errs.len(),
        recall_vsd: recall_of(&errs, params.threshold).ok(),
        auc_vsd: auc_of(&errs).ok(),
        mean_vsd: mean(&errs),
        mean_add: mean(&adds),
    }
}

/// Evaluates one estimate against ground truth on a scene depth map.
pub fn evaluate(
    object_id: &str,
    mesh: &TriangleMesh,
    est: &Pose,
    gt: &Pose,
    scene_depth: &DepthImage,
    k: &CameraIntrinsics,
    params: &VsdParams,
) -> Result<EvalRecord> {
    let (err, visibility) = vsd_error(mesh, est, gt, scene_depth, k, params)?;
    Ok(EvalRecord {
        object_id: object_id.to_string(),
        est_pose: *est,
        gt_pose: *gt,
        err_vsd: Some(err),
        err_add: Some(add_error(mesh, est, gt)?),
        visibility,
    })
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ReportLine<'a> {
    Record {
        schema_version: u32,
        #[serde(flatten)]
        record: &'a EvalRecord,
    },
    Summary {
        schema_version: u32,
        #[serde(flatten)]
        summary: &'a EvalSummary,
    },
}

/// One JSON object per record, then one summary object, newline separated.
pub fn write_report(mut w: impl Write, records: &[EvalRecord], summary: &EvalSummary) -> Result<()> {
    for record in records {
        let line = ReportLine::Record {
            schema_version: REPORT_SCHEMA_VERSION,
            record,
        };
        writeln!(
            w,
            "{}",
            serde_json::to_string(&line).map_err(|e| Error::Config(e.to_string()))?
        )?;
    }
    let line = ReportLine::Summary {
        schema_version: REPORT_SCHEMA_VERSION,
        summary,
    };
    writeln!(
        w,
        "{}",
        serde_json::to_string(&line).map_err(|e| Error::Config(e.to_string()))?
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Rotation3;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::centered(60.0, 32, 32).unwrap()
    }

    fn at(z: f64) -> Pose {
        Pose::new(Rotation3::about_y(0.4), Vec3::new(0.0, 0.0, z))
    }

    fn record(err: f64, visibility: f64) -> EvalRecord {
        EvalRecord {
            object_id: "obj".into(),
            est_pose: Pose::identity(),
            gt_pose: Pose::identity(),
            err_vsd: Some(err),
            err_add: None,
            visibility,
        }
    }

    #[test]
    fn vsd_identity_and_disjoint() {
        let mesh = TriangleMesh::cube(40.0);
        let empty = DepthImage::new(32, 32);
        let p = VsdParams::default();
        assert_eq!(
            vsd_error(&mesh, &at(300.0), &at(300.0), &empty, &k(), &p).unwrap(),
            (0.0, 1.0)
        );
        let away = Pose::new(Rotation3::identity(), Vec3::new(200.0, 0.0, 300.0));
        assert_eq!(vsd_error(&mesh, &away, &at(300.0), &empty, &k(), &p).unwrap().0, 1.0);
    }

    #[test]
    fn vsd_grows_with_depth_offset() {
        let mesh = TriangleMesh::cube(40.0);
        let empty = DepthImage::new(32, 32);
        let p = VsdParams::default();
        let errs: Vec<f64> = [0.0, 5.0, 25.0, 50.0]
            .iter()
            .map(|dz| {
                vsd_error(&mesh, &at(300.0 + dz), &at(300.0), &empty, &k(), &p)
                    .unwrap()
                    .0
            })
            .collect();
        assert!(errs.windows(2).all(|w| w[0] <= w[1]), "{errs:?}");
        assert!(errs[3] > errs[0]);
    }

    #[test]
    fn vsd_degenerate_and_mismatch() {
        let mesh = TriangleMesh::cube(40.0);
        let p = VsdParams::default();
        let behind = Pose::new(Rotation3::identity(), Vec3::new(0.0, 0.0, -300.0));
        let empty = DepthImage::new(32, 32);
        assert!(matches!(
            vsd_error(&mesh, &at(300.0), &behind, &empty, &k(), &p),
            Err(Error::DegenerateView)
        ));
        assert!(vsd_error(&mesh, &at(300.0), &at(300.0), &DepthImage::new(8, 8), &k(), &p).is_err());
    }

    #[test]
    fn occluded_gt_reduces_visibility() {
        let mesh = TriangleMesh::cube(40.0);
        let mut scene = render_depth(&mesh, &at(300.0), &k());
        for v in scene.data.iter_mut().take(16 * 32) {
            if *v > 0.0 {
                *v = 100.0;
            }
        }
        let (_, vis) = vsd_error(&mesh, &at(300.0), &at(300.0), &scene, &k(), &VsdParams::default()).unwrap();
        assert!(vis > 0.0 && vis < 1.0, "{vis}");
    }

    #[test]
    fn add_examples() {
        let mesh = TriangleMesh::cube(50.0);
        let gt = at(500.0);
        assert_eq!(add_error(&mesh, &gt, &gt).unwrap(), 0.0);
        assert_eq!(adi_error(&mesh, &gt, &gt).unwrap(), 0.0);
        let moved = Pose::new(gt.rotation, gt.translation + Vec3::new(3.0, 4.0, 0.0));
        assert!((add_error(&mesh, &moved, &gt).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn add_correct_is_strict() {
        assert!(add_correct(9.0, 100.0, 0.1).unwrap());
        assert!(!add_correct(10.0, 100.0, 0.1).unwrap());
        assert!(add_correct(1.0, 0.0, 0.1).is_err());
        for i in 0..200 {
            let e = i as f64 * 0.1;
            assert_eq!(add_correct(e, 100.0, 0.1).unwrap(), e < 10.0);
        }
    }

    #[test]
    fn recall_and_auc_examples() {
        let zeros: Vec<EvalRecord> = (0..4).map(|_| record(0.0, 1.0)).collect();
        assert_eq!(recall_at(&zeros, 0.3, 0.1).unwrap(), 1.0);
        assert_eq!(auc_vsd(&zeros, 0.1).unwrap(), 1.0);
        let three = vec![record(0.1, 1.0), record(0.5, 1.0), record(0.9, 1.0)];
        assert!((recall_at(&three, 0.3, 0.1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((auc_vsd(&three, 0.1).unwrap() - 0.5).abs() < 1e-15);
        assert!((auc_vsd(&[record(0.37, 1.0)], 0.1).unwrap() - 0.63).abs() < 1e-15);
    }

    #[test]
    fn visibility_filter_and_empty() {
        let recs = vec![record(0.0, 0.05), record(0.9, 0.5)];
        assert_eq!(recall_at(&recs, 0.3, 0.1).unwrap(), 0.0);
        assert!(matches!(recall_at(&recs[..1], 0.3, 0.1), Err(Error::EmptyInput(_))));
        assert!(auc_vsd(&[], 0.1).is_err());
    }

    #[test]
    fn report_is_json_lines() {
        let recs = vec![record(0.1, 1.0), record(0.5, 0.9)];
        let summary = summarize(&recs, &VsdParams::default());
        let mut out = Vec::new();
        write_report(&mut out, &recs, &summary).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0]["kind"], "record");
        assert_eq!(lines[2]["kind"], "summary");
        assert_eq!(lines[2]["schema_version"], REPORT_SCHEMA_VERSION);
        assert_eq!(lines[2]["recall_vsd"], 0.5);
    }
}
