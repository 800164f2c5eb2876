//! Domain-randomization image augmentations with a replayable op log.
//!
//! Ops run in a fixed order: add, contrast, multiply, invert, blur,
//! geometric, occlusion. Each color op is applied to all channels jointly
//! with `op_probability`, and then independently to each single channel with
//! `per_channel_probability`. Every op clamps its output to `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::Rng;

const OCCLUSION_ATTEMPTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub op_probability: f64,
    pub per_channel_probability: f64,
    pub add_range: (f64, f64),
    pub contrast_range: (f64, f64),
    pub multiply_range: (f64, f64),
    pub invert_enabled: bool,
    pub blur_sigma_range: (f64, f64),
    pub geometric_probability: f64,
    pub scale_range: (f64, f64),
    pub translation_range: (f64, f64),
    pub occlusion_probability: f64,
    pub occlusion_fraction_max: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            op_probability: 0.5,
            per_channel_probability: 0.3,
            add_range: (-0.1, 0.1),
            contrast_range: (0.4, 2.3),
            multiply_range: (0.6, 1.4),
            invert_enabled: true,
            blur_sigma_range: (0.0, 1.2),
            geometric_probability: 1.0,
            scale_range: (0.8, 1.2),
            translation_range: (-0.15, 0.15),
            occlusion_probability: 1.0,
            occlusion_fraction_max: 0.25,
        }
    }
}

impl AugmentConfig {
    /// Every op disabled.
    pub fn none() -> Self {
        AugmentConfig {
            op_probability: 0.0,
            per_channel_probability: 0.0,
            geometric_probability: 0.0,
            occlusion_probability: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("op_probability", self.op_probability),
            ("per_channel_probability", self.per_channel_probability),
            ("geometric_probability", self.geometric_probability),
            ("occlusion_probability", self.occlusion_probability),
            ("occlusion_fraction_max", self.occlusion_fraction_max),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} not in [0, 1]")));
            }
        }
        let ranges = [
            ("add_range", self.add_range),
            ("contrast_range", self.contrast_range),
            ("multiply_range", self.multiply_range),
            ("blur_sigma_range", self.blur_sigma_range),
            ("scale_range", self.scale_range),
            ("translation_range", self.translation_range),
        ];
        for (name, (lo, hi)) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!("{name} = ({lo}, {hi}) is not an ordered range")));
            }
        }
        if self.blur_sigma_range.0 < 0.0 || self.scale_range.0 <= 0.0 {
            return Err(Error::Config("blur sigma must be >= 0 and scale > 0".into()));
        }
        Ok(())
    }
}

/// One applied op with its sampled parameters; `channel: None` means all channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum AppliedOp {
    Add { delta: f32, channel: Option<usize> },
    Contrast { factor: f32, channel: Option<usize> },
    Multiply { factor: f32, channel: Option<usize> },
    Invert { channel: Option<usize> },
    Blur { sigma: f32 },
    Geometric { scale: f32, tx: f32, ty: f32 },
    Occlude { x: usize, y: usize, w: usize, h: usize },
}

fn map_channels(img: &mut Image, channel: Option<usize>, f: impl Fn(f32) -> f32) {
    let c = img.channels;
    for (i, v) in img.data.iter_mut().enumerate() {
        if channel.is_none_or(|ch| i % c == ch) {
            *v = f(*v).clamp(0.0, 1.0);
        }
    }
}

/// Applies a single logged op.
pub fn apply_op(img: &Image, op: &AppliedOp) -> Image {
    let mut out = img.clone();
    match *op {
        AppliedOp::Add { delta, channel } => map_channels(&mut out, channel, |p| p + delta),
        AppliedOp::Contrast { factor, channel } => {
            if factor != 1.0 {
                map_channels(&mut out, channel, |p| (p - 0.5) * factor + 0.5)
            }
        }
        AppliedOp::Multiply { factor, channel } => map_channels(&mut out, channel, |p| p * factor),
        AppliedOp::Invert { channel } => map_channels(&mut out, channel, |p| 1.0 - p),
        AppliedOp::Blur { sigma } => out = gaussian_blur(img, sigma),
        AppliedOp::Geometric { scale, tx, ty } => out = scale_translate(img, scale, tx, ty),
        AppliedOp::Occlude { x, y, w, h } => fill_rect(&mut out, x, y, w, h),
    }
    out
}

/// Replays a log op by op.
pub fn replay(img: &Image, log: &[AppliedOp]) -> Image {
    log.iter().fold(img.clone(), |acc, op| apply_op(&acc, op))
}

/// Separable Gaussian blur, kernel truncated at `3σ`, edges clamped.
pub fn gaussian_blur(img: &Image, sigma: f32) -> Image {
    if !(sigma > 0.0) {
        return img.clone();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f32> = (-radius..=radius)
        .map(|i| (-((i * i) as f32) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f32 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= sum);

    let (w, h, c) = (img.width as isize, img.height as isize, img.channels);
    let pass = |src: &Image, dx: isize, dy: isize| {
        let mut dst = Image::new(src.width, src.height, c);
        for y in 0..h {
            for x in 0..w {
                for ch in 0..c {
                    let mut acc = 0.0f32;
                    for (j, k) in kernel.iter().enumerate() {
                        let o = j as isize - radius;
                        let sx = (x + o * dx).clamp(0, w - 1) as usize;
                        let sy = (y + o * dy).clamp(0, h - 1) as usize;
                        acc += k * src.get(sx, sy, ch);
                    }
                    dst.set(x as usize, y as usize, ch, acc.clamp(0.0, 1.0));
                }
            }
        }
        dst
    };
    let horizontal = pass(img, 1, 0);
    pass(&horizontal, 0, 1)
}

/// Scales about the image center, then shifts by `(tx, ty)` image fractions.
/// Nearest-neighbor sampling, black outside the source.
pub fn scale_translate(img: &Image, scale: f32, tx: f32, ty: f32) -> Image {
    let mut out = Image::new(img.width, img.height, img.channels);
    let (w, h) = (img.width as f32, img.height as f32);
    let (cx, cy) = (w / 2.0, h / 2.0);
    for y in 0..img.height {
        for x in 0..img.width {
            let u = (x as f32 + 0.5 - cx - tx * w) / scale + cx;
            let v = (y as f32 + 0.5 - cy - ty * h) / scale + cy;
            if u < 0.0 || v < 0.0 || u >= w || v >= h {
                continue;
            }
            for c in 0..img.channels {
                out.set(x, y, c, img.get(u as usize, v as usize, c));
            }
        }
    }
    out
}

fn fill_rect(img: &mut Image, x: usize, y: usize, w: usize, h: usize) {
    for yy in y..(y + h).min(img.height) {
        for xx in x..(x + w).min(img.width) {
            for c in 0..img.channels {
                img.set(xx, yy, c, 0.0);
            }
        }
    }
}

fn covered(mask: &[bool], width: usize, x: usize, y: usize, w: usize, h: usize) -> usize {
    (y..y + h)
        .map(|yy| (x..x + w).filter(|&xx| mask[yy * width + xx]).count())
        .sum()
}

/// Picks a black rectangle covering at most `fraction` of the mask area, or
/// `None` when no non-empty rectangle fits.
pub fn sample_occlusion(
    width: usize,
    height: usize,
    mask: &[bool],
    fraction: f64,
    rng: &mut Rng,
) -> Option<(usize, usize, usize, usize)> {
    let area = mask.iter().filter(|&&m| m).count();
    if area == 0 || !(fraction > 0.0) {
        return None;
    }
    let limit = (fraction * area as f64).floor() as usize;
    if limit == 0 {
        return None;
    }
    let mut rect = (0, 0, 0, 0);
    for _ in 0..OCCLUSION_ATTEMPTS {
        let target = fraction * area as f64;
        let aspect = rng.uniform(0.5f64.ln(), 2f64.ln()).exp();
        let w = ((target * aspect).sqrt().round() as usize).clamp(1, width);
        let h = ((target / w as f64).round() as usize).clamp(1, height);
        let x = rng.below(width - w + 1);
        let y = rng.below(height - h + 1);
        rect = (x, y, w, h);
        let c = covered(mask, width, x, y, w, h);
        if c > 0 && c <= limit {
            return Some(rect);
        }
    }
    let (x, y, mut w, mut h) = rect;
    while w > 0 && h > 0 && covered(mask, width, x, y, w, h) > limit {
        if w >= h {
            w -= 1;
        } else {
            h -= 1;
        }
    }
    (w > 0 && h > 0 && covered(mask, width, x, y, w, h) > 0).then_some((x, y, w, h))
}

/// Zeroes a random rectangle covering at most `fraction` of `mask`.
pub fn occlude(img: &Image, mask: &[bool], fraction: f64, rng: &mut Rng) -> Result<Image> {
    if mask.len() != img.width * img.height {
        return Err(Error::Dimension {
            expected: img.width * img.height,
            actual: mask.len(),
        });
    }
    let mut out = img.clone();
    if let Some((x, y, w, h)) = sample_occlusion(img.width, img.height, mask, fraction, rng) {
        fill_rect(&mut out, x, y, w, h);
    }
    Ok(out)
}

/// Samples and applies the configured ops, returning the image and its log.
pub fn augment(img: &Image, cfg: &AugmentConfig, rng: &mut Rng) -> (Image, Vec<AppliedOp>) {
    let mut log = Vec::new();
    let mut out = img.clone();
    let mut push = |out: &mut Image, op: AppliedOp| {
        *out = apply_op(out, &op);
        log.push(op);
    };

    type ColorOp = fn(f32, Option<usize>) -> AppliedOp;
    let color: [(Option<(f64, f64)>, ColorOp); 4] = [
        (Some(cfg.add_range), |v, channel| AppliedOp::Add { delta: v, channel }),
        (Some(cfg.contrast_range), |v, channel| AppliedOp::Contrast {
            factor: v,
            channel,
        }),
        (Some(cfg.multiply_range), |v, channel| AppliedOp::Multiply {
            factor: v,
            channel,
        }),
        (None, |_, channel| AppliedOp::Invert { channel }),
    ];
    for (range, make) in color {
        if range.is_none() && !cfg.invert_enabled {
            continue;
        }
        let draw = |rng: &mut Rng| range.map_or(0.0, |(lo, hi)| rng.uniform(lo, hi) as f32);
        if rng.bernoulli(cfg.op_probability) {
            let v = draw(rng);
            push(&mut out, make(v, None));
        }
        for ch in 0..img.channels {
            if rng.bernoulli(cfg.per_channel_probability) {
                let v = draw(rng);
                push(&mut out, make(v, Some(ch)));
            }
        }
    }
    if rng.bernoulli(cfg.op_probability) {
        let (lo, hi) = cfg.blur_sigma_range;
        let sigma = rng.uniform(lo, hi) as f32;
        push(&mut out, AppliedOp::Blur { sigma });
    }
    if rng.bernoulli(cfg.geometric_probability) {
        let scale = rng.uniform(cfg.scale_range.0, cfg.scale_range.1) as f32;
        let (lo, hi) = cfg.translation_range;
        let tx = rng.uniform(lo, hi) as f32;
        let ty = rng.uniform(lo, hi) as f32;
        push(&mut out, AppliedOp::Geometric { scale, tx, ty });
    }
    if rng.bernoulli(cfg.occlusion_probability) {
        let fraction = rng.uniform(0.0, cfg.occlusion_fraction_max);
        let mask = out.nonzero_mask();
        if let Some((x, y, w, h)) = sample_occlusion(out.width, out.height, &mask, fraction, rng) {
            push(&mut out, AppliedOp::Occlude { x, y, w, h });
        }
    }
    (out, log)
}

/// Replaces all-zero pixels of `img` with the background.
pub fn composite_background(img: &Image, background: &Image) -> Result<Image> {
    if !img.same_shape(background) {
        return Err(Error::Dimension {
            expected: img.data.len(),
            actual: background.data.len(),
        });
    }
    let mut out = img.clone();
    let c = img.channels;
    for (px, bg) in out.data.chunks_exact_mut(c).zip(background.data.chunks_exact(c)) {
        if px.iter().all(|&v| v == 0.0) {
            px.copy_from_slice(bg);
        }
    }
    Ok(out)
}

/// Smooth value noise: a random coarse grid upsampled bilinearly.
pub fn procedural_background(width: usize, height: usize, channels: usize, cell: usize, rng: &mut Rng) -> Image {
    let cell = cell.max(1);
    let gw = width / cell + 2;
    let gh = height / cell + 2;
    let grid: Vec<f32> = (0..gw * gh * channels).map(|_| rng.next_f64() as f32).collect();
    let at = |gx: usize, gy: usize, c: usize| grid[(gy * gw + gx) * channels + c];
    let mut out = Image::new(width, height, channels);
    for y in 0..height {
        for x in 0..width {
            let fx = x as f32 / cell as f32;
            let fy = y as f32 / cell as f32;
            let (x0, y0) = (fx as usize, fy as usize);
            let (ax, ay) = (fx - x0 as f32, fy - y0 as f32);
            for c in 0..channels {
                let top = at(x0, y0, c) * (1.0 - ax) + at(x0 + 1, y0, c) * ax;
                let bottom = at(x0, y0 + 1, c) * (1.0 - ax) + at(x0 + 1, y0 + 1, c) * ax;
                out.set(x, y, c, top * (1.0 - ay) + bottom * ay);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_image(channels: usize) -> Image {
        let (w, h) = (24, 20);
        let mut img = Image::new(w, h, channels);
        for y in 4..16 {
            for x in 6..18 {
                for c in 0..channels {
                    img.set(x, y, c, ((x * 7 + y * 3 + c * 5) % 17) as f32 / 16.0);
                }
            }
        }
        img
    }

    #[test]
    fn disabled_config_is_identity() {
        let img = sample_image(3);
        let (out, log) = augment(&img, &AugmentConfig::none(), &mut Rng::seed_from_u64(1));
        assert_eq!(out, img);
        assert!(log.is_empty());
    }

    #[test]
    fn identity_parameters_per_op() {
        let img = sample_image(3);
        for op in [
            AppliedOp::Multiply {
                factor: 1.0,
                channel: None,
            },
            AppliedOp::Add {
                delta: 0.0,
                channel: Some(1),
            },
            AppliedOp::Contrast {
                factor: 1.0,
                channel: None,
            },
            AppliedOp::Blur { sigma: 0.0 },
            AppliedOp::Geometric {
                scale: 1.0,
                tx: 0.0,
                ty: 0.0,
            },
        ] {
            assert_eq!(apply_op(&img, &op), img, "{op:?}");
        }
    }

    #[test]
    fn invert_is_an_involution() {
        let img = sample_image(1);
        let op = AppliedOp::Invert { channel: None };
        assert_eq!(apply_op(&apply_op(&img, &op), &op), img);
    }

    #[test]
    fn contrast_pivots_on_mid_gray() {
        let img = Image::gray(3, 1, vec![0.25, 0.5, 0.75]).unwrap();
        let out = apply_op(
            &img,
            &AppliedOp::Contrast {
                factor: 2.0,
                channel: None,
            },
        );
        assert_eq!(out.data, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn blur_preserves_constant_image() {
        let img = Image::gray(9, 9, vec![0.4; 81]).unwrap();
        let out = gaussian_blur(&img, 1.2);
        assert!(out.data.iter().all(|v| (v - 0.4).abs() < 1e-6));
    }

    #[test]
    fn replay_reproduces_output() {
        let img = sample_image(3);
        for seed in 0..30 {
            let (out, log) = augment(&img, &AugmentConfig::default(), &mut Rng::seed_from_u64(seed));
            assert_eq!(replay(&img, &log), out);
            assert!(out.data.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn occlusion_limits() {
        let img = Image::gray(40, 40, vec![1.0; 1600]).unwrap();
        let mask = vec![true; 1600];
        let mut rng = Rng::seed_from_u64(3);
        assert_eq!(occlude(&img, &mask, 0.0, &mut rng).unwrap(), img);
        for _ in 0..50 {
            let out = occlude(&img, &mask, 0.25, &mut rng).unwrap();
            let zeroed = out.data.iter().filter(|&&v| v == 0.0).count();
            assert!(zeroed as f64 / 1600.0 <= 0.25);
        }
        let mut single = vec![false; 1600];
        single[820] = true;
        assert_eq!(occlude(&img, &single, 0.25, &mut rng).unwrap(), img);
        assert_eq!(occlude(&img, &[false; 1600], 0.25, &mut rng).unwrap(), img);
    }

    #[test]
    fn config_roundtrips_through_toml() {
        let cfg = AugmentConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(toml::from_str::<AugmentConfig>(&text).unwrap(), cfg);
        let bad = AugmentConfig {
            add_range: (0.1, -0.1),
            ..cfg
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn background_fills_empty_pixels() {
        let img = sample_image(1);
        let bg = procedural_background(24, 20, 1, 4, &mut Rng::seed_from_u64(9));
        let out = composite_background(&img, &bg).unwrap();
        assert_eq!(out.get(0, 0, 0), bg.get(0, 0, 0));
        assert_eq!(out.get(10, 10, 0), img.get(10, 10, 0));
    }
}
