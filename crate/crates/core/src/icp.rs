//! Depth-based pose refinement: a ray-aligned z search followed by
//! point-to-plane ICP with a decaying correspondence threshold.

use nalgebra::{Matrix3, Matrix6, SymmetricEigen, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{backproject_pixel, skew, CameraIntrinsics, Pose, Rotation3, Vec2, Vec3};
use crate::kdtree::KdTree;
use crate::render::{DepthImage, TriangleMesh};
use crate::rng::Rng;

pub const DEFAULT_NORMAL_NEIGHBORS: usize = 12;
pub const DEFAULT_MODEL_POINTS: usize = 3000;

/// Minimum cosine between a posed model normal and its scene normal.
const NORMAL_COMPATIBILITY: f64 = 0.5;
/// Relative eigenvalue below which a twist direction is treated as unconstrained.
const RANK_TOL: f64 = 1e-9;
const MAX_STEP_HALVINGS: usize = 6;
const SPACING_SAMPLE: usize = 2000;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub normals: Option<Vec<Vec3>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        PointCloud { points, normals: None }
    }

    pub fn with_normals(points: Vec<Vec3>, normals: Vec<Vec3>) -> Result<Self> {
        if normals.len() != points.len() {
            return Err(Error::Dimension {
                expected: points.len(),
                actual: normals.len(),
            });
        }
        if let Some(n) = normals.iter().find(|n| (n.norm() - 1.0).abs() > 1e-6) {
            return Err(Error::bounds("normal", format!("not unit length: {n:?}")));
        }
        Ok(PointCloud {
            points,
            normals: Some(normals),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn transformed(&self, pose: &Pose) -> Self {
        PointCloud {
            points: self.points.iter().map(|p| pose.transform_point(p)).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| ns.iter().map(|n| pose.rotation.apply(n)).collect()),
        }
    }

    /// Area-uniform surface samples with outward face normals, in the model frame.
    pub fn sample_mesh(mesh: &TriangleMesh, n: usize, seed: u64) -> Self {
        let (points, normals) = mesh.sample_surface(n, &mut Rng::seed_from_u64(seed));
        PointCloud {
            points,
            normals: Some(normals),
        }
    }

    /// Largest axis-aligned extent.
    pub fn extent(&self) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for p in &self.points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (hi - lo).max()
    }
}

/// One camera-frame point per valid depth pixel, sampled at pixel centers.
pub fn backproject(d: &DepthImage, k: &CameraIntrinsics) -> PointCloud {
    let mut points = Vec::with_capacity(d.valid_count());
    for y in 0..d.height {
        for x in 0..d.width {
            let z = d.get(x, y);
            if z > 0.0 && z.is_finite() {
                let uv = Vec2::new(x as f64 + 0.5, y as f64 + 0.5);
                points.push(backproject_pixel(k, &uv, z as f64));
            }
        }
    }
    PointCloud::new(points)
}

/// Normals from the smallest eigenvector of each point's neighborhood
/// covariance, oriented toward the camera origin. Points with collinear or
/// coincident neighborhoods are dropped from the output.
pub fn estimate_normals(pc: &PointCloud, k_neighbors: usize) -> Result<PointCloud> {
    let k_neighbors = k_neighbors.max(3);
    if pc.len() < k_neighbors {
        return Err(Error::InsufficientData {
            needed: k_neighbors,
            have: pc.len(),
        });
    }
    let tree = KdTree::new(&pc.points);
    let mut points = Vec::with_capacity(pc.len());
    let mut normals = Vec::with_capacity(pc.len());
    for p in &pc.points {
        let nbrs = tree.knn(p, k_neighbors);
        let mean = nbrs.iter().map(|&(i, _)| pc.points[i]).sum::<Vec3>() / nbrs.len() as f64;
        let mut cov = Matrix3::zeros();
        for &(i, _) in &nbrs {
            let d = pc.points[i] - mean;
            cov += d * d.transpose();
        }
        let eig = SymmetricEigen::new(cov);
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let (mid, max) = (eig.eigenvalues[idx[1]], eig.eigenvalues[idx[2]]);
        if !(max > 0.0) || mid <= 1e-6 * max {
            continue;
        }
        let mut n: Vec3 = eig.eigenvectors.column(idx[0]).into_owned().normalize();
        if n.dot(p) > 0.0 {
            n = -n;
        }
        points.push(*p);
        normals.push(n);
    }
    Ok(PointCloud {
        points,
        normals: Some(normals),
    })
}

/// Median nearest-neighbor distance over a strided subsample.
pub fn median_spacing(pc: &PointCloud) -> f64 {
    if pc.len() < 2 {
        return 0.0;
    }
    let tree = KdTree::new(&pc.points);
    let stride = pc.len().div_ceil(SPACING_SAMPLE);
    let mut d: Vec<f64> = pc
        .points
        .iter()
        .step_by(stride)
        .map(|p| tree.knn(p, 2)[1].1.sqrt())
        .collect();
    median(&mut d)
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::INFINITY;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IcpConfig {
    pub max_iterations: usize,
    /// Starting correspondence distance in mm; `None` derives it from the data.
    pub initial_threshold: Option<f64>,
    pub threshold_decay: f64,
    pub min_correspondences: usize,
    pub convergence_eps: f64,
}

impl Default for IcpConfig {
    fn default() -> Self {
        IcpConfig {
            max_iterations: 50,
            initial_threshold: None,
            threshold_decay: 0.9,
            min_correspondences: 6,
            convergence_eps: 0.1,
        }
    }
}

impl IcpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || self.min_correspondences == 0 {
            return Err(Error::Config(
                "iteration and correspondence counts must be positive".into(),
            ));
        }
        if !(self.threshold_decay > 0.0 && self.threshold_decay <= 1.0) {
            return Err(Error::Config(format!(
                "threshold_decay {} not in (0, 1]",
                self.threshold_decay
            )));
        }
        if !(self.convergence_eps > 0.0) || self.initial_threshold.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::Config("thresholds must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IcpIteration {
    pub threshold: f64,
    pub correspondences: usize,
    /// Median absolute point-to-plane residual before and after the accepted step.
    pub residual_before: f64,
    pub residual_after: f64,
    pub step_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IcpStats {
    pub iterations: usize,
    pub final_residual: f64,
    pub correspondences: usize,
    pub converged: bool,
    pub history: Vec<IcpIteration>,
}

struct Scene<'a> {
    points: &'a [Vec3],
    normals: &'a [Vec3],
    tree: KdTree,
    spacing: f64,
}

impl<'a> Scene<'a> {
    fn new(scene: &'a PointCloud) -> Result<Self> {
        let normals = scene
            .normals
            .as_deref()
            .ok_or_else(|| Error::Config("scene cloud needs normals".into()))?;
        if scene.is_empty() {
            return Err(Error::NoOverlap);
        }
        Ok(Scene {
            points: &scene.points,
            normals,
            tree: KdTree::new(&scene.points),
            spacing: median_spacing(scene),
        })
    }

    /// Signed point-to-plane residuals with posed model point and scene normal.
    fn correspondences(&self, model: &PointCloud, pose: &Pose, threshold: f64) -> Vec<(Vec3, Vec3, f64)> {
        let t2 = threshold * threshold;
        let mut out = Vec::with_capacity(model.len());
        for (i, m) in model.points.iter().enumerate() {
            let p = pose.transform_point(m);
            let Some((j, d2)) = self.tree.nearest(&p) else { continue };
            if d2 >= t2 {
                continue;
            }
            let n = self.normals[j];
            if let Some(mn) = &model.normals {
                if pose.rotation.apply(&mn[i]).dot(&n) < NORMAL_COMPATIBILITY {
                    continue;
                }
            }
            out.push((p, n, n.dot(&(p - self.points[j]))));
        }
        out
    }

    fn median_residual(&self, model: &PointCloud, pose: &Pose, threshold: f64) -> (f64, usize) {
        let corr = self.correspondences(model, pose, threshold);
        let mut r: Vec<f64> = corr.iter().map(|c| c.2.abs()).collect();
        (median(&mut r), corr.len())
    }
}

/// `exp` of the twist `(ω, v)` as a left-multiplied rigid motion.
pub fn twist_exp(xi: &Vector6<f64>) -> Pose {
    let w = Vec3::new(xi[0], xi[1], xi[2]);
    let v = Vec3::new(xi[3], xi[4], xi[5]);
    let theta = w.norm();
    let wx = skew(&w);
    let (b, c) = if theta < 1e-8 {
        (0.5 - theta * theta / 24.0, 1.0 / 6.0 - theta * theta / 120.0)
    } else {
        let t2 = theta * theta;
        ((1.0 - theta.cos()) / t2, (theta - theta.sin()) / (t2 * theta))
    };
    let vmat = Matrix3::identity() + wx * b + wx * wx * c;
    Pose::new(Rotation3::from_rotation_vector(&w), vmat * v)
}

fn solve_twist(corr: &[(Vec3, Vec3, f64)]) -> Result<Vector6<f64>> {
    let mut a = Matrix6::zeros();
    let mut b = Vector6::zeros();
    for (p, n, r) in corr {
        let pn = p.cross(n);
        let j = Vector6::new(pn.x, pn.y, pn.z, n.x, n.y, n.z);
        a += j * j.transpose();
        b -= j * *r;
    }
    if !a.iter().all(|v| v.is_finite()) {
        return Err(Error::DegenerateGeometry);
    }
    let eig = SymmetricEigen::new(a);
    let max = eig.eigenvalues.amax();
    let cutoff = max * RANK_TOL;
    let rank = eig.eigenvalues.iter().filter(|&&l| l > cutoff).count();
    if !(max > 0.0) || rank < 3 {
        return Err(Error::DegenerateGeometry);
    }
    let proj = eig.eigenvectors.transpose() * b;
    let mut x = Vector6::zeros();
    for i in 0..6 {
        let l = eig.eigenvalues[i];
        if l > cutoff {
            x += eig.eigenvectors.column(i) * (proj[i] / l);
        }
    }
    Ok(x)
}

/// Default starting threshold: the larger of three scene spacings and half
/// the model extent, so the first iterations can bridge gross offsets.
fn initial_threshold(cfg: &IcpConfig, spacing: f64, model: &PointCloud) -> f64 {
    cfg.initial_threshold
        .unwrap_or_else(|| (3.0 * spacing).max(0.5 * model.extent()))
}

fn model_front(model: &PointCloud, pose: &Pose) -> PointCloud {
    let Some(normals) = &model.normals else {
        return model.clone();
    };
    let mut out = PointCloud {
        points: Vec::new(),
        normals: Some(Vec::new()),
    };
    for (m, n) in model.points.iter().zip(normals) {
        let p = pose.transform_point(m);
        if pose.rotation.apply(n).dot(&p) < 0.0 {
            out.points.push(*m);
            out.normals.as_mut().expect("normals present").push(*n);
        }
    }
    out
}

/// Truncated median residual of the z search; unmatched points count as `cap`.
fn z_objective(scene: &Scene, model: &PointCloud, pose: &Pose, cap: f64) -> (f64, usize) {
    let corr = scene.correspondences(model, pose, cap);
    let mut r: Vec<f64> = corr.iter().map(|c| c.2.abs().min(cap)).collect();
    let matched = r.len();
    r.resize(model.len(), cap);
    (median(&mut r), matched)
}

/// Moves the object along its camera ray to minimize the median
/// point-to-plane residual; rotation is left unchanged.
pub fn icp_refine_z(model: &PointCloud, scene: &PointCloud, init: &Pose) -> Result<Pose> {
    if !(init.translation.z > 0.0) {
        return Err(Error::BehindCamera { z: init.translation.z });
    }
    let scene = Scene::new(scene)?;
    let front = model_front(model, init);
    if front.is_empty() {
        return Err(Error::NoOverlap);
    }
    let ray = init.translation.normalize();
    let cap = (3.0 * scene.spacing).max(1.0);
    let range = model.extent().max(2.0 * cap);
    let at = |s: f64| Pose::new(init.rotation, init.translation + ray * s);
    let eval = |s: f64| z_objective(&scene, &front, &at(s), cap);

    let mut best = (0.0f64, eval(0.0));
    let mut step = cap / 2.0;
    let mut lo = -range;
    let mut hi = range;
    while step > 0.01 {
        let n = ((hi - lo) / step).round() as i64;
        for i in 0..=n {
            let s = lo + i as f64 * step;
            let v = eval(s);
            let better = v.0 < best.1 .0 || (v.0 == best.1 .0 && s.abs() < best.0.abs());
            if better {
                best = (s, v);
            }
        }
        lo = best.0 - step;
        hi = best.0 + step;
        step /= 4.0;
    }
    if best.1 .1 == 0 {
        return Err(Error::NoOverlap);
    }
    Ok(at(best.0))
}

/// Full 6D point-to-plane refinement. `scene` must carry normals; model
/// normals, when present, must point outward and enable back-face rejection.
pub fn icp_refine(model: &PointCloud, scene: &PointCloud, init: &Pose, cfg: &IcpConfig) -> Result<(Pose, IcpStats)> {
    cfg.validate()?;
    if model.is_empty() {
        return Err(Error::EmptyInput("model cloud"));
    }
    let scene = Scene::new(scene)?;
    let mut threshold = initial_threshold(cfg, scene.spacing, model);
    let floor = cfg.convergence_eps.max(3.0 * scene.spacing);
    let mut pose = *init;
    let mut stats = IcpStats {
        iterations: 0,
        final_residual: f64::INFINITY,
        correspondences: 0,
        converged: false,
        history: Vec::new(),
    };

    for iteration in 0..cfg.max_iterations {
        let corr = scene.correspondences(model, &pose, threshold);
        if corr.len() < cfg.min_correspondences {
            return Err(Error::InsufficientOverlap {
                iteration,
                count: corr.len(),
            });
        }
        let mut r: Vec<f64> = corr.iter().map(|c| c.2.abs()).collect();
        let before = median(&mut r);
        stats.iterations = iteration + 1;
        stats.final_residual = before;
        stats.correspondences = corr.len();

        let xi = solve_twist(&corr)?;
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_STEP_HALVINGS {
            let candidate = step(&pose, &(xi * scale));
            let (after, count) = scene.median_residual(model, &candidate, threshold);
            if count >= cfg.min_correspondences && after <= before {
                accepted = Some((candidate, after, count));
                break;
            }
            scale /= 2.0;
        }
        let Some((candidate, after, count)) = accepted else {
            stats.converged = true;
            break;
        };
        let moved = rms_displacement(model, &pose, &candidate);
        stats.history.push(IcpIteration {
            threshold,
            correspondences: corr.len(),
            residual_before: before,
            residual_after: after,
            step_scale: scale,
        });
        pose = candidate;
        stats.final_residual = after;
        stats.correspondences = count;
        if moved < cfg.convergence_eps {
            stats.converged = true;
            break;
        }
        threshold = (threshold * cfg.threshold_decay).max(floor);
    }
    Ok((pose, stats))
}

fn step(pose: &Pose, xi: &Vector6<f64>) -> Pose {
    let next = twist_exp(xi).compose(pose);
    Pose::new(Rotation3::orthonormalized(*next.rotation.matrix()), next.translation)
}

fn rms_displacement(model: &PointCloud, a: &Pose, b: &Pose) -> f64 {
    let sum: f64 = model
        .points
        .iter()
        .map(|m| (a.transform_point(m) - b.transform_point(m)).norm_squared())
        .sum();
    (sum / model.len() as f64).sqrt()
}

/// Z stage then full refinement, the usual entry point for a depth scene.
pub fn refine_pose(model: &PointCloud, scene: &PointCloud, init: &Pose, cfg: &IcpConfig) -> Result<(Pose, IcpStats)> {
    let z = icp_refine_z(model, scene, init)?;
    icp_refine(model, scene, &z, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{geodesic_distance, project};
    use crate::render::render_depth;

    fn camera() -> CameraIntrinsics {
        CameraIntrinsics::centered(572.0, 320, 240).unwrap()
    }

    fn cube_scene(pose: &Pose) -> PointCloud {
        let d = render_depth(&TriangleMesh::cube(80.0), pose, &camera());
        estimate_normals(&backproject(&d, &camera()), DEFAULT_NORMAL_NEIGHBORS).unwrap()
    }

    fn gt_pose() -> Pose {
        let r = Rotation3::from_axis_angle(&Vec3::new(1.0, 1.0, 0.3).normalize(), 0.7);
        Pose::new(r, Vec3::new(10.0, -5.0, 700.0))
    }

    #[test]
    fn backproject_principal_point() {
        let mut d = DepthImage::new(4, 4);
        d.data[2 * 4 + 1] = 1000.0;
        let k = CameraIntrinsics::new(500.0, 500.0, 1.5, 2.5, 4, 4).unwrap();
        let pc = backproject(&d, &k);
        assert_eq!(pc.points, vec![Vec3::new(0.0, 0.0, 1000.0)]);
    }

    #[test]
    fn backproject_inverts_projection() {
        let d = render_depth(&TriangleMesh::cube(80.0), &gt_pose(), &camera());
        let pc = backproject(&d, &camera());
        let mut i = 0;
        for y in 0..d.height {
            for x in 0..d.width {
                if d.get(x, y) > 0.0 {
                    let uv = project(&camera(), &pc.points[i]).unwrap();
                    assert!((uv.x - (x as f64 + 0.5)).abs() < 1e-6);
                    assert!((uv.y - (y as f64 + 0.5)).abs() < 1e-6);
                    i += 1;
                }
            }
        }
        assert_eq!(i, pc.len());
    }

    #[test]
    fn backprojected_cube_fits_posed_bounds() {
        let pose = Pose::new(Rotation3::identity(), Vec3::new(0.0, 0.0, 700.0));
        let pc = backproject(&render_depth(&TriangleMesh::cube(80.0), &pose, &camera()), &camera());
        let (mut lo, mut hi) = (Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY));
        for p in &pc.points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        // Only the front face is visible, so z is flat at 660.
        assert!((lo.z - 660.0).abs() < 2.0 && (hi.z - 660.0).abs() < 2.0);
        for a in 0..2 {
            assert!((lo[a] + 40.0).abs() < 2.0, "{lo:?}");
            assert!((hi[a] - 40.0).abs() < 2.0, "{hi:?}");
        }
    }

    #[test]
    fn plane_normals_face_camera() {
        let pts: Vec<Vec3> = (0..400)
            .map(|i| Vec3::new((i % 20) as f64, (i / 20) as f64, 1000.0))
            .collect();
        let pc = estimate_normals(&PointCloud::new(pts), 12).unwrap();
        assert_eq!(pc.len(), 400);
        for n in pc.normals.unwrap() {
            assert!((n - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-3);
        }
    }

    #[test]
    fn sphere_normals_are_radial() {
        let center = Vec3::new(0.0, 0.0, 500.0);
        let n = 20_000;
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let pts: Vec<Vec3> = (0..n)
            .map(|i| {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let r = (1.0 - z * z).sqrt();
                let a = golden * i as f64;
                center + Vec3::new(r * a.cos(), r * a.sin(), z) * 100.0
            })
            .filter(|p| (p - center).dot(p) < 0.0)
            .collect();
        let pc = estimate_normals(&PointCloud::new(pts), 12).unwrap();
        for (p, n) in pc.points.iter().zip(pc.normals.unwrap()) {
            let radial = (p - center).normalize();
            assert!(n.dot(&radial).acos() < 5f64.to_radians());
        }
    }

    #[test]
    fn collinear_points_are_dropped() {
        let mut pts: Vec<Vec3> = (0..20).map(|i| Vec3::new(i as f64, 0.0, 500.0)).collect();
        pts.extend((0..100).map(|i| Vec3::new((i % 10) as f64, 100.0 + (i / 10) as f64, 500.0)));
        let pc = estimate_normals(&PointCloud::new(pts), 8).unwrap();
        assert_eq!(pc.len(), 100);
        assert!(estimate_normals(&PointCloud::new(vec![Vec3::z(); 5]), 12).is_err());
    }

    #[test]
    fn z_stage_recovers_ray_offset() {
        let gt = gt_pose();
        let scene = cube_scene(&gt);
        let model = PointCloud::sample_mesh(&TriangleMesh::cube(80.0), DEFAULT_MODEL_POINTS, 5);
        let ray = gt.translation.normalize();
        for offset in [-40.0, 40.0] {
            let init = Pose::new(gt.rotation, gt.translation + ray * offset);
            let out = icp_refine_z(&model, &scene, &init).unwrap();
            assert!(
                (out.translation - gt.translation).norm() < 2.0,
                "{offset}: {:?}",
                out.translation
            );
            assert_eq!(out.rotation, gt.rotation);
        }
        let fixed = icp_refine_z(&model, &scene, &gt).unwrap();
        assert!((fixed.translation - gt.translation).norm() < 0.1);
    }

    #[test]
    fn empty_scene_has_no_overlap() {
        let model = PointCloud::sample_mesh(&TriangleMesh::cube(80.0), 500, 5);
        let scene = PointCloud::with_normals(vec![], vec![]).unwrap();
        assert!(matches!(
            icp_refine_z(&model, &scene, &gt_pose()),
            Err(Error::NoOverlap)
        ));
    }

    #[test]
    fn exact_init_is_a_fixed_point() {
        let gt = gt_pose();
        let scene = cube_scene(&gt);
        let model = PointCloud::sample_mesh(&TriangleMesh::cube(80.0), DEFAULT_MODEL_POINTS, 5);
        let (out, stats) = icp_refine(&model, &scene, &gt, &IcpConfig::default()).unwrap();
        assert!(geodesic_distance(&out.rotation, &gt.rotation) < 1e-3);
        assert!((out.translation - gt.translation).norm() < 0.1);
        assert!(stats.final_residual < 0.05, "{stats:?}");
    }

    #[test]
    fn too_few_correspondences_reports_iteration() {
        let gt = gt_pose();
        let scene = cube_scene(&gt);
        let model = PointCloud::sample_mesh(&TriangleMesh::cube(80.0), 200, 5);
        let far = Pose::new(gt.rotation, gt.translation + Vec3::new(500.0, 0.0, 0.0));
        let cfg = IcpConfig {
            initial_threshold: Some(5.0),
            ..IcpConfig::default()
        };
        assert!(matches!(
            icp_refine(&model, &scene, &far, &cfg),
            Err(Error::InsufficientOverlap { iteration: 0, .. })
        ));
    }

    #[test]
    fn twist_exp_small_angle_matches_first_order() {
        let xi = Vector6::new(1e-9, -2e-9, 0.0, 1.0, 2.0, 3.0);
        let p = twist_exp(&xi);
        assert!((p.translation - Vec3::new(1.0, 2.0, 3.0)).norm() < 1e-8);
    }
}
