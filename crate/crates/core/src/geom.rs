//! Rotations, poses, pinhole intrinsics and view-sphere sampling.
//!
//! Conventions: right-handed camera frame with +z into the scene, image
//! origin at the top-left corner and +y pointing down. Pixel `(i, j)` covers
//! `[i, i+1) x [j, j+1)`, so its center sits at `(i + 0.5, j + 0.5)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::ops::Mul;

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;

/// Tolerance used when validating rotation matrices.
pub const ROTATION_TOL: f64 = 1e-9;

/// Proper rotation, stored as a 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation3(Matrix3<f64>);

impl Rotation3 {
    pub fn identity() -> Self {
        Rotation3(Matrix3::identity())
    }

    /// Validates orthonormality and `det = +1` within [`ROTATION_TOL`].
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        let r = Rotation3(m);
        if r.orthonormality_error() > ROTATION_TOL || (m.determinant() - 1.0).abs() > ROTATION_TOL {
            return Err(Error::bounds(
                "rotation",
                format!("matrix is not a proper rotation: {m}"),
            ));
        }
        Ok(r)
    }

    /// Projects an arbitrary (near-rotation) matrix onto SO(3).
    pub fn orthonormalized(m: Matrix3<f64>) -> Self {
        let svd = m.svd(true, true);
        let u = svd.u.expect("svd u");
        let v_t = svd.v_t.expect("svd v_t");
        let mut r = u * v_t;
        if r.determinant() < 0.0 {
            let mut u = u;
            u.column_mut(2).neg_mut();
            r = u * v_t;
        }
        Rotation3(r)
    }

    /// Row-major construction. Rows must form a rotation.
    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self> {
        Self::from_matrix(Matrix3::from_fn(|i, j| rows[i][j]))
    }

    pub fn about_x(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Rotation3(Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
    }

    pub fn about_y(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Rotation3(Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
    }

    pub fn about_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Rotation3(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    /// Rodrigues' formula for the rotation `exp([w]x)`.
    pub fn from_rotation_vector(w: &Vec3) -> Self {
        let theta = w.norm();
        let k = skew(w);
        if theta < 1e-12 {
            return Rotation3::orthonormalized(Matrix3::identity() + k);
        }
        let a = theta.sin() / theta;
        let b = (1.0 - theta.cos()) / (theta * theta);
        Rotation3(Matrix3::identity() + k * a + k * k * b)
    }

    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        Self::from_rotation_vector(&(axis.normalize() * angle))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Row-major copy of the nine entries.
    pub fn to_rows(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    pub fn transpose(&self) -> Self {
        Rotation3(self.0.transpose())
    }

    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// Max abs entry of `RᵀR - I`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).abs().max()
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.orthonormality_error() <= tol && (self.0.determinant() - 1.0).abs() <= tol
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        let m = &self.0;
        let axis = Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
        // |axis| = 2 sin θ, trace - 1 = 2 cos θ; atan2 keeps precision at both ends
        let cos2 = m.trace() - 1.0;
        axis.norm().atan2(cos2).clamp(0.0, PI)
    }
}

impl Mul for Rotation3 {
    type Output = Rotation3;
    fn mul(self, rhs: Rotation3) -> Rotation3 {
        Rotation3(self.0 * rhs.0)
    }
}

impl Mul<Vec3> for Rotation3 {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl Serialize for Rotation3 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let m = &self.0;
        let rows = [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ];
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Rotation3 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = <[[f64; 3]; 3]>::deserialize(d)?;
        // Files carry limited precision, so re-project instead of rejecting.
        let m = Matrix3::from_fn(|i, j| rows[i][j]);
        let r = Rotation3::orthonormalized(m);
        if (r.0 - m).abs().max() > 1e-3 {
            return Err(serde::de::Error::custom("rotation rows are not orthonormal"));
        }
        Ok(r)
    }
}

pub fn skew(w: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Rigid object-to-camera transform; translation in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Rotation3,
    pub translation: Vec3,
}

impl Pose {
    pub fn new(rotation: Rotation3, translation: Vec3) -> Self {
        Pose { rotation, translation }
    }

    pub fn identity() -> Self {
        Pose::new(Rotation3::identity(), Vec3::zeros())
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.apply(p) + self.translation
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::new(
            self.rotation * other.rotation,
            self.rotation.apply(&other.translation) + self.translation,
        )
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose::new(rt, -(rt.apply(&self.translation)))
    }

    pub fn is_finite(&self) -> bool {
        self.translation.iter().all(|v| v.is_finite())
    }
}

/// Geodesic angle between two rotations, in radians within `[0, π]`.
pub fn geodesic_distance(a: &Rotation3, b: &Rotation3) -> f64 {
    (a.transpose() * *b).angle()
}

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let k = CameraIntrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    /// Principal point at the image center.
    pub fn centered(f: f64, width: u32, height: u32) -> Result<Self> {
        Self::new(f, f, width as f64 / 2.0, height as f64 / 2.0, width, height)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy].iter().all(|v| v.is_finite());
        if !finite || self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::InvalidIntrinsics(format!(
                "focal lengths must be positive: {self:?}"
            )));
        }
        if !(0.0..self.width as f64).contains(&self.cx) || !(0.0..self.height as f64).contains(&self.cy) {
            return Err(Error::InvalidIntrinsics(format!(
                "principal point outside image: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Scalar focal length: geometric mean of `fx` and `fy`.
    pub fn focal(&self) -> f64 {
        (self.fx * self.fy).sqrt()
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// Projects a camera-frame point (mm) to continuous pixel coordinates.
pub fn project(k: &CameraIntrinsics, p: &Vec3) -> Result<Vec2> {
    if !(p.z > 0.0) {
        return Err(Error::BehindCamera { z: p.z });
    }
    Ok(Vec2::new(k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy))
}

/// Inverse of [`project`] at a known depth.
pub fn backproject_pixel(k: &CameraIntrinsics, uv: &Vec2, z: f64) -> Vec3 {
    Vec3::new((uv.x - k.cx) * z / k.fx, (uv.y - k.cy) * z / k.fy, z)
}

/// Unit viewpoints from a subdivided icosahedron.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSphere {
    pub subdivision_level: u32,
    pub viewpoints: Vec<Vec3>,
}

impl ViewSphere {
    pub fn len(&self) -> usize {
        self.viewpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.viewpoints.is_empty()
    }

    /// `10 * 4^level + 2`.
    pub fn expected_count(level: u32) -> usize {
        10 * 4usize.pow(level) + 2
    }
}

pub const MAX_SUBDIVISION_LEVEL: u32 = 6;

const ICOSAHEDRON_FACES: [[usize; 3]; 20] = [
    [0, 11, 5],
    [0, 5, 1],
    [0, 1, 7],
    [0, 7, 10],
    [0, 10, 11],
    [1, 5, 9],
    [5, 11, 4],
    [11, 10, 2],
    [10, 7, 6],
    [7, 1, 8],
    [3, 9, 4],
    [3, 4, 2],
    [3, 2, 6],
    [3, 6, 8],
    [3, 8, 9],
    [4, 9, 5],
    [2, 4, 11],
    [6, 2, 10],
    [8, 6, 7],
    [9, 8, 1],
];

fn quantize(v: &Vec3) -> (i64, i64, i64) {
    let q = |x: f64| (x * 1e9).round() as i64;
    (q(v.x), q(v.y), q(v.z))
}

/// Geodesic sphere by repeated edge-midpoint subdivision of the golden-ratio
/// icosahedron. Vertices of level `n` keep their indices at level `n + 1`.
pub fn subdivide_icosahedron(level: u32) -> Result<ViewSphere> {
    if level > MAX_SUBDIVISION_LEVEL {
        return Err(Error::bounds(
            "subdivision level",
            format!("{level} > {MAX_SUBDIVISION_LEVEL}"),
        ));
    }
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();

    let mut lookup: HashMap<(i64, i64, i64), usize> =
        vertices.iter().enumerate().map(|(i, v)| (quantize(v), i)).collect();
    let mut faces: Vec<[usize; 3]> = ICOSAHEDRON_FACES.to_vec();

    for _ in 0..level {
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let mut mid = |i: usize, j: usize| {
                let m = ((vertices[i] + vertices[j]) / 2.0).normalize();
                *lookup.entry(quantize(&m)).or_insert_with(|| {
                    vertices.push(m);
                    vertices.len() - 1
                })
            };
            let ab = mid(a, b);
            let bc = mid(b, c);
            let ca = mid(c, a);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }

    Ok(ViewSphere {
        subdivision_level: level,
        viewpoints: vertices,
    })
}

/// Camera-to-object rotation of a camera sitting on the ray `v` and looking
/// at the origin. Columns are the camera axes in object coordinates: z is
/// `-v`, y follows the projection of `up_hint` onto the image plane.
///
/// When `v` is (anti)parallel to `up_hint`, the world axis least aligned with
/// `v` (ties resolved in x, y, z order) replaces the hint.
pub fn viewpoint_to_rotation(v: &Vec3, up_hint: &Vec3) -> Rotation3 {
    let z = -v.normalize();
    let mut up = up_hint.normalize();
    if (up - z * up.dot(&z)).norm() < 1e-6 {
        let axes = [Vec3::x(), Vec3::y(), Vec3::z()];
        up = axes
            .iter()
            .copied()
            .min_by(|a, b| a.dot(&z).abs().total_cmp(&b.dot(&z).abs()))
            .unwrap_or(Vec3::x());
    }
    let y = (up - z * up.dot(&z)).normalize();
    let x = y.cross(&z);
    Rotation3::orthonormalized(Matrix3::from_columns(&[x, y, z]))
}

/// `n` rotations about the camera z-axis at angles `2πk/n`.
pub fn inplane_rotations(n: usize) -> Result<Vec<Rotation3>> {
    if n == 0 {
        return Err(Error::bounds("in-plane rotation count", "n must be >= 1"));
    }
    Ok((0..n)
        .map(|k| Rotation3::about_z(2.0 * PI * k as f64 / n as f64))
        .collect())
}

/// Object-to-camera rotation for viewpoint `v` composed with an in-plane
/// rotation about the optical axis.
pub fn view_rotation_obj2cam(v: &Vec3, inplane: &Rotation3) -> Rotation3 {
    *inplane * viewpoint_to_rotation(v, &Vec3::y()).transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn icosahedron_counts() {
        assert_eq!(subdivide_icosahedron(0).unwrap().len(), 12);
        assert_eq!(subdivide_icosahedron(2).unwrap().len(), 162);
        assert_eq!(subdivide_icosahedron(4).unwrap().len(), 2562);
        for level in 0..=5 {
            assert_eq!(
                subdivide_icosahedron(level).unwrap().len(),
                ViewSphere::expected_count(level)
            );
        }
        assert!(matches!(subdivide_icosahedron(7), Err(Error::Bounds { .. })));
    }

    #[test]
    fn level_two_matches_independent_midpoint_count() {
        // Naive subdivision with linear-search dedup, independent of the hash path.
        let base = subdivide_icosahedron(0).unwrap().viewpoints;
        let mut pts = base.clone();
        let mut faces = ICOSAHEDRON_FACES.to_vec();
        for _ in 0..2 {
            let mut next = Vec::new();
            for &[a, b, c] in &faces {
                let mut mid = |i: usize, j: usize| {
                    let m: Vec3 = ((pts[i] + pts[j]) / 2.0).normalize();
                    match pts.iter().position(|p| (p - m).norm() < 1e-9) {
                        Some(k) => k,
                        None => {
                            pts.push(m);
                            pts.len() - 1
                        }
                    }
                };
                let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
                next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        assert_eq!(pts.len(), 162);
        assert_eq!(pts.len(), 10 * 4usize.pow(2) + 2);
    }

    #[test]
    fn sphere_levels_nest_and_stay_unit() {
        let a = subdivide_icosahedron(2).unwrap();
        let b = subdivide_icosahedron(3).unwrap();
        assert_eq!(&b.viewpoints[..a.len()], &a.viewpoints[..]);
        for v in &b.viewpoints {
            assert!((v.norm() - 1.0).abs() < 1e-9);
        }
        for i in 0..b.len() {
            for j in (i + 1)..b.len() {
                assert!((b.viewpoints[i] - b.viewpoints[j]).norm() > 1e-6);
            }
        }
    }

    #[test]
    fn frontal_viewpoint_rotation() {
        let r = viewpoint_to_rotation(&Vec3::z(), &Vec3::y());
        let rows = r.to_rows();
        assert_relative_eq!(rows[6], 0.0, epsilon = 1e-12);
        assert_relative_eq!(rows[7], 0.0, epsilon = 1e-12);
        assert_relative_eq!(rows[8], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn antipodal_and_parallel_viewpoints_fall_back() {
        for v in [-Vec3::z(), Vec3::y(), -Vec3::y()] {
            let r = viewpoint_to_rotation(&v, &Vec3::y());
            assert!(r.is_valid(1e-9));
            assert_relative_eq!(r.matrix().determinant(), 1.0, epsilon = 1e-9);
            assert_relative_eq!(r.matrix().column(2).into_owned(), -v, epsilon = 1e-12);
        }
    }

    #[test]
    fn side_viewpoint_looks_at_origin() {
        let v = Vec3::x();
        let r = viewpoint_to_rotation(&v, &Vec3::y());
        let mapped = r.transpose().apply(&v);
        assert_relative_eq!(mapped, Vec3::new(0.0, 0.0, -1.0), epsilon = 1e-12);
    }

    #[test]
    fn inplane_sets() {
        let rs = inplane_rotations(36).unwrap();
        assert_eq!(rs.len(), 36);
        for w in rs.windows(2) {
            assert_relative_eq!(geodesic_distance(&w[0], &w[1]), 10f64.to_radians(), epsilon = 1e-12);
        }
        let one = inplane_rotations(1).unwrap();
        assert_eq!(one, vec![Rotation3::identity()]);
        let quarter = inplane_rotations(4).unwrap()[1].apply(&Vec3::x());
        assert_relative_eq!(quarter, Vec3::y(), epsilon = 1e-12);
        assert!(inplane_rotations(0).is_err());
    }

    #[test]
    fn geodesic_basics() {
        let i = Rotation3::identity();
        assert_eq!(geodesic_distance(&i, &i), 0.0);
        assert_relative_eq!(
            geodesic_distance(&i, &Rotation3::about_z(PI / 2.0)),
            PI / 2.0,
            epsilon = 1e-15
        );
        assert_relative_eq!(geodesic_distance(&i, &Rotation3::about_x(PI)), PI, epsilon = 1e-12);
    }

    #[test]
    fn projection_examples() {
        let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap();
        assert_eq!(
            project(&k, &Vec3::new(0.0, 0.0, 1000.0)).unwrap(),
            Vec2::new(320.0, 240.0)
        );
        assert_eq!(
            project(&k, &Vec3::new(100.0, 0.0, 1000.0)).unwrap(),
            Vec2::new(370.0, 240.0)
        );
        assert!(matches!(
            project(&k, &Vec3::new(0.0, 0.0, 0.0)),
            Err(Error::BehindCamera { .. })
        ));
        assert!(project(&k, &Vec3::new(0.0, 0.0, -5.0)).is_err());
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 1.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 4.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, 4, 4).is_ok());
    }

    #[test]
    fn rotation_validation() {
        assert!(Rotation3::from_rows([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]]).is_err());
        assert!(Rotation3::from_rows([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]).is_ok());
    }
}
