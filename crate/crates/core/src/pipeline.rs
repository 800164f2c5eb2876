//! Detection → 6D pose: crop, codebook lookup, projective distance,
//! translation and perspective correction.

use serde::{Deserialize, Serialize};

use crate::codebook::{Codebook, Encoder, LabeledView, LatentCode};
use crate::error::{Error, Result};
use crate::geom::{CameraIntrinsics, Pose, Rotation3, Vec2, Vec3};
use crate::image::Image;
use crate::render::SyntheticView;

/// Default rendering distance of codebook views (mm).
pub const DEFAULT_T_SYN_Z: f64 = 700.0;
pub const DEFAULT_PADDING: f64 = 1.2;

/// Axis-aligned box in continuous pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        BBox { x, y, w, h }
    }

    pub fn diagonal(&self) -> f64 {
        self.w.hypot(self.h)
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.w > 0.0 && self.h > 0.0) || ![self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite())
    }
}

impl From<crate::render::SilhouetteBox> for BBox {
    fn from(b: crate::render::SilhouetteBox) -> Self {
        BBox::new(b.x as f64, b.y as f64, b.w as f64, b.h as f64)
    }
}

/// Output contract of an external 2D detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    pub object_id: String,
    pub score: f64,
}

impl Detection {
    pub fn new(bbox: BBox, object_id: impl Into<String>, score: f64) -> Result<Self> {
        let d = Detection {
            bbox,
            object_id: object_id.into(),
            score,
        };
        d.validate(None)?;
        Ok(d)
    }

    /// Checks `w, h > 0`, `score ∈ [0, 1]` and, given the image size, that
    /// the box stays within the image grown by 50% per side.
    pub fn validate(&self, image_size: Option<(usize, usize)>) -> Result<()> {
        if self.bbox.is_degenerate() {
            return Err(Error::DegenerateBbox(format!("{:?}", self.bbox)));
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::bounds("detection score", format!("{}", self.score)));
        }
        if let Some((w, h)) = image_size {
            let (w, h) = (w as f64, h as f64);
            let b = &self.bbox;
            if b.x < -0.5 * w || b.y < -0.5 * h || b.x + b.w > 1.5 * w || b.y + b.h > 1.5 * h {
                return Err(Error::bounds(
                    "detection bbox",
                    format!("{b:?} far outside {w}x{h} image"),
                ));
            }
        }
        Ok(())
    }
}

/// Camera pair and rendering distance used for projective distance estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceContext {
    pub t_syn_z: f64,
    pub k_syn: CameraIntrinsics,
    pub k_real: CameraIntrinsics,
}

impl DistanceContext {
    pub fn new(t_syn_z: f64, k_syn: CameraIntrinsics, k_real: CameraIntrinsics) -> Result<Self> {
        if !(t_syn_z > 0.0 && t_syn_z.is_finite()) {
            return Err(Error::bounds("t_syn_z", format!("{t_syn_z}")));
        }
        Ok(DistanceContext { t_syn_z, k_syn, k_real })
    }
}

/// Square crop of side `max(w, h) * padding` centered on the bbox, resized to
/// `out_size x out_size` by nearest neighbour. Pixels outside the source are black.
pub fn square_crop(image: &Image, bbox: &BBox, padding: f64, out_size: usize) -> Result<Image> {
    if bbox.is_degenerate() {
        return Err(Error::DegenerateBbox(format!("{bbox:?}")));
    }
    if !(padding >= 1.0) || out_size == 0 {
        return Err(Error::bounds(
            "crop parameters",
            format!("padding {padding}, out_size {out_size}"),
        ));
    }
    let side = bbox.w.max(bbox.h) * padding;
    let c = bbox.center();
    let (x0, y0) = (c.x - side / 2.0, c.y - side / 2.0);
    let step = side / out_size as f64;
    let mut out = Image::new(out_size, out_size, image.channels);
    let src_x: Vec<Option<usize>> = (0..out_size)
        .map(|i| sample_index(x0 + (i as f64 + 0.5) * step, image.width))
        .collect();
    for j in 0..out_size {
        let Some(sy) = sample_index(y0 + (j as f64 + 0.5) * step, image.height) else {
            continue;
        };
        for (i, sx) in src_x.iter().enumerate() {
            if let Some(sx) = *sx {
                for ch in 0..image.channels {
                    out.set(i, j, ch, image.get(sx, sy, ch));
                }
            }
        }
    }
    Ok(out)
}

fn sample_index(coord: f64, len: usize) -> Option<usize> {
    let f = coord.floor();
    (f >= 0.0 && f < len as f64).then_some(f as usize)
}

/// Projective distance: `t_syn_z * (bb_syn / bb_real) * (f_real / f_syn)`,
/// with each `f` the geometric mean of `fx` and `fy`.
pub fn estimate_distance(ctx: &DistanceContext, bb_real_diag: f64, bb_syn_diag: f64) -> Result<f64> {
    if !(bb_real_diag > 0.0) || !(bb_syn_diag > 0.0) {
        return Err(Error::DegenerateBbox(format!(
            "diagonals real {bb_real_diag}, synthetic {bb_syn_diag}"
        )));
    }
    Ok(ctx.t_syn_z * (bb_syn_diag / bb_real_diag) * (ctx.k_real.focal() / ctx.k_syn.focal()))
}

fn inverse_intrinsics(k: &CameraIntrinsics) -> Result<nalgebra::Matrix3<f64>> {
    k.matrix().try_inverse().ok_or(Error::SingularIntrinsics)
}

/// Full translation from the estimated depth and the two bbox centers.
pub fn estimate_translation(ctx: &DistanceContext, t_real_z: f64, bb_real_c: &Vec2, bb_syn_c: &Vec2) -> Result<Vec3> {
    if !(t_real_z > 0.0) {
        return Err(Error::BehindCamera { z: t_real_z });
    }
    let real = inverse_intrinsics(&ctx.k_real)? * Vec3::new(bb_real_c.x, bb_real_c.y, 1.0);
    let syn = inverse_intrinsics(&ctx.k_syn)? * Vec3::new(bb_syn_c.x, bb_syn_c.y, 1.0);
    let delta = real * t_real_z - syn * ctx.t_syn_z;
    let mut t = Vec3::new(0.0, 0.0, ctx.t_syn_z) + delta;
    // Both homogeneous rows end in 1, so z is t_real_z up to rounding.
    t.z = t_real_z;
    Ok(t)
}

/// Corrects a centered-view rotation estimate for an object at `t_real`:
/// `R_y(α_y) R_x(α_x) R'` with `α_x = -atan(t_y/t_z)` and
/// `α_y = atan(t_x / sqrt(t_z² + t_y²))`.
pub fn perspective_correction(r_prime: &Rotation3, t_real: &Vec3) -> Result<Rotation3> {
    if !(t_real.z > 0.0) {
        return Err(Error::BehindCamera { z: t_real.z });
    }
    let alpha_x = -(t_real.y / t_real.z).atan();
    let alpha_y = (t_real.x / t_real.z.hypot(t_real.y)).atan();
    if alpha_x == 0.0 && alpha_y == 0.0 {
        return Ok(*r_prime);
    }
    let corrected = Rotation3::about_y(alpha_y) * Rotation3::about_x(alpha_x) * *r_prime;
    Ok(Rotation3::orthonormalized(*corrected.matrix()))
}

/// Knobs of [`estimate_pose`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseOptions {
    pub padding: f64,
    /// Side of the square crop handed to the encoder.
    pub crop_size: usize,
    /// Neighbours reported in diagnostics; the pose always uses the top hit.
    pub k: usize,
    pub perspective_correction: bool,
}

impl Default for PoseOptions {
    fn default() -> Self {
        PoseOptions {
            padding: DEFAULT_PADDING,
            crop_size: 64,
            k: 1,
            perspective_correction: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseEstimate {
    pub pose: Pose,
    /// Pose before perspective correction.
    pub uncorrected_rotation: Rotation3,
    pub similarity: f64,
    pub knn: Vec<(usize, f64)>,
    pub distance: f64,
}

/// Crop → encode → kNN → distance → translation → perspective correction.
pub fn estimate_pose<E: Encoder + ?Sized>(
    image: &Image,
    det: &Detection,
    encoder: &E,
    cb: &Codebook,
    ctx: &DistanceContext,
    opts: &PoseOptions,
) -> Result<PoseEstimate> {
    det.validate(None)?;
    if cb.is_empty() {
        return Err(Error::bounds("codebook", "empty codebook"));
    }
    if encoder.dim() != cb.dim() {
        return Err(Error::Dimension {
            expected: cb.dim(),
            actual: encoder.dim(),
        });
    }
    let crop = square_crop(image, &det.bbox, opts.padding, opts.crop_size)?;
    let code = encoder.encode(&crop)?;
    let knn = cb.knn_query(&code, opts.k.clamp(1, cb.len()))?;
    let (best, similarity) = knn[0];
    let entry = cb.entry(best);
    let r_prime = entry.rotation().transpose();
    let distance = estimate_distance(ctx, det.bbox.diagonal(), entry.bbox_diag as f64)?;
    let t = estimate_translation(ctx, distance, &det.bbox.center(), &entry.bbox_center())?;
    let rotation = if opts.perspective_correction {
        perspective_correction(&r_prime, &t)?
    } else {
        r_prime
    };
    Ok(PoseEstimate {
        pose: Pose::new(rotation, t),
        uncorrected_rotation: r_prime,
        similarity,
        knn,
        distance,
    })
}

/// Identity encoder: the flattened crop itself is the code.
#[derive(Debug, Clone, Copy)]
pub struct FlattenEncoder {
    pub dim: usize,
}

impl Encoder for FlattenEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, image: &Image) -> Result<LatentCode> {
        if image.data.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: image.data.len(),
            });
        }
        LatentCode::new(image.data.clone())
    }
}

/// Identity-style encoder for depth crops: each valid pixel maps to
/// `1 - 0.5 * (d - d_min) / depth_range` (clamped to `[0.5, 1]`), invalid
/// pixels to 0, where `d_min` is the nearest depth in the crop. The code is
/// independent of the object's absolute distance.
#[derive(Debug, Clone, Copy)]
pub struct DepthEncoder {
    pub side: usize,
    pub depth_range: f64,
}

impl DepthEncoder {
    pub fn new(side: usize, depth_range: f64) -> Self {
        DepthEncoder { side, depth_range }
    }
}

impl Encoder for DepthEncoder {
    fn dim(&self) -> usize {
        self.side * self.side
    }

    fn encode(&self, image: &Image) -> Result<LatentCode> {
        if image.width != self.side || image.height != self.side || image.channels != 1 {
            return Err(Error::Dimension {
                expected: self.dim(),
                actual: image.data.len(),
            });
        }
        let d_min = image
            .data
            .iter()
            .copied()
            .filter(|&d| d > 0.0)
            .fold(f32::INFINITY, f32::min);
        if !d_min.is_finite() {
            return Err(Error::DegenerateCode);
        }
        let scale = 0.5 / self.depth_range as f32;
        LatentCode::new(
            image
                .data
                .iter()
                .map(|&d| {
                    if d > 0.0 {
                        (1.0 - (d - d_min) * scale).clamp(0.5, 1.0)
                    } else {
                        0.0
                    }
                })
                .collect(),
        )
    }
}

/// Crops a rendered codebook view exactly like a test detection would be cropped.
pub fn labeled_view(view: &SyntheticView, padding: f64, crop_size: usize) -> Result<LabeledView> {
    let bbox = BBox::from(view.bbox);
    Ok(LabeledView {
        image: square_crop(&view.depth.to_image(), &bbox, padding, crop_size)?,
        rotation: view.rotation,
        bbox_diag: bbox.diagonal(),
        bbox_center: bbox.center(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn k(fx: f64, fy: f64) -> CameraIntrinsics {
        CameraIntrinsics::new(fx, fy, 320.0, 240.0, 640, 480).unwrap()
    }

    fn ctx() -> DistanceContext {
        DistanceContext::new(700.0, k(500.0, 500.0), k(500.0, 500.0)).unwrap()
    }

    #[test]
    fn crop_identity_and_geometry() {
        let img = Image::gray(64, 64, (0..64 * 64).map(|i| i as f32).collect()).unwrap();
        let out = square_crop(&img, &BBox::new(0.0, 0.0, 64.0, 64.0), 1.0, 64).unwrap();
        assert_eq!(out, img);

        // Side 48 centered at (30, 20): output pixel i samples 6 + i.
        let out = square_crop(&img, &BBox::new(10.0, 10.0, 40.0, 20.0), 1.2, 48).unwrap();
        assert_eq!(out.get(0, 24, 0), img.get(6, 20, 0));
        assert_eq!(out.get(47, 24, 0), img.get(53, 20, 0));
        // rows above the image are black
        assert_eq!(out.get(10, 0, 0), 0.0);
        assert!(square_crop(&img, &BBox::new(0.0, 0.0, 0.0, 5.0), 1.2, 8).is_err());
        assert!(square_crop(&img, &BBox::new(0.0, 0.0, 4.0, 5.0), 0.9, 8).is_err());
    }

    #[test]
    fn distance_examples() {
        assert_eq!(estimate_distance(&ctx(), 50.0, 50.0).unwrap(), 700.0);
        assert_eq!(estimate_distance(&ctx(), 25.0, 50.0).unwrap(), 1400.0);
        assert!(matches!(
            estimate_distance(&ctx(), 0.0, 50.0),
            Err(Error::DegenerateBbox(_))
        ));
        let doubled = DistanceContext::new(700.0, k(500.0, 500.0), k(1000.0, 1000.0)).unwrap();
        assert_eq!(estimate_distance(&doubled, 50.0, 50.0).unwrap(), 1400.0);
    }

    #[test]
    fn translation_examples() {
        let c = ctx();
        let pp = Vec2::new(320.0, 240.0);
        assert_eq!(
            estimate_translation(&c, 700.0, &pp, &pp).unwrap(),
            Vec3::new(0.0, 0.0, 700.0)
        );
        let t = estimate_translation(&c, 1000.0, &Vec2::new(420.0, 240.0), &pp).unwrap();
        assert_relative_eq!(t, Vec3::new(200.0, 0.0, 1000.0), epsilon = 1e-9);
        assert!(estimate_translation(&c, 0.0, &pp, &pp).is_err());
    }

    #[test]
    fn correction_examples() {
        let r = Rotation3::from_axis_angle(&Vec3::new(1.0, 2.0, 3.0), 0.7);
        assert_eq!(perspective_correction(&r, &Vec3::new(0.0, 0.0, 900.0)).unwrap(), r);
        let out = perspective_correction(&Rotation3::identity(), &Vec3::new(0.0, 500.0, 500.0)).unwrap();
        assert_relative_eq!(
            *out.matrix(),
            *Rotation3::about_x(-std::f64::consts::FRAC_PI_4).matrix(),
            epsilon = 1e-12
        );
        assert!(matches!(
            perspective_correction(&r, &Vec3::new(0.0, 0.0, -1.0)),
            Err(Error::BehindCamera { .. })
        ));
    }

    #[test]
    fn detection_validation() {
        assert!(Detection::new(BBox::new(0.0, 0.0, 0.0, 3.0), "a", 0.5).is_err());
        assert!(Detection::new(BBox::new(0.0, 0.0, 2.0, 3.0), "a", 1.5).is_err());
        let d = Detection::new(BBox::new(-20.0, 0.0, 30.0, 30.0), "a", 0.9).unwrap();
        assert!(d.validate(Some((64, 64))).is_ok());
        let far = Detection::new(BBox::new(-40.0, 0.0, 5.0, 5.0), "a", 0.9).unwrap();
        assert!(far.validate(Some((64, 64))).is_err());
    }
}
