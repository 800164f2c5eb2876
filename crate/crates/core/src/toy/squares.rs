//! Binary square images and the four training distributions.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::Rng;

pub const CANVAS: usize = 64;

/// Side length (fraction of the canvas) of a square with nominal scale 1.
pub const FULL_SCALE_SIDE: f64 = 0.4;

/// Extra clearance, in canvas fractions, kept between a translated square and the border.
const CLEARANCE: f64 = 1.0 / 64.0;

/// A square of side `s` (fraction of the canvas side) centered at
/// `canvas/2 + t * canvas`, rotated by `r` radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SquareSpec {
    pub s: f64,
    pub t: [f64; 2],
    pub r: f64,
}

impl SquareSpec {
    pub fn new(s: f64, t: [f64; 2], r: f64) -> Self {
        SquareSpec { s, t, r }
    }

    pub fn with_rotation(self, r: f64) -> Self {
        SquareSpec { r, ..self }
    }

    /// Distance from center to the farthest corner, as a canvas fraction.
    fn corner_radius(&self) -> f64 {
        let r = self.r.rem_euclid(FRAC_PI_2);
        self.s / 2.0 * (r.cos() + r.sin())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s <= 1.0) {
            return Err(Error::bounds("square scale", format!("{} not in (0, 1]", self.s)));
        }
        if !self.r.is_finite() || self.t.iter().any(|v| !v.is_finite() || v.abs() > 1.0) {
            return Err(Error::bounds("square placement", format!("{self:?}")));
        }
        let reach = self.corner_radius();
        for c in self.t {
            if 0.5 + c - reach < -1e-12 || 0.5 + c + reach > 1.0 + 1e-12 {
                return Err(Error::bounds("square", format!("{self:?} exceeds the canvas")));
            }
        }
        Ok(())
    }
}

/// Rasterizes the square: a pixel is on iff its center lies inside.
/// The angle is reduced modulo `π/2`, so the 4-fold symmetry is exact.
pub fn draw_square(spec: &SquareSpec, size: usize) -> Result<Image> {
    spec.validate()?;
    let n = size as f64;
    let (cx, cy) = (n / 2.0 + spec.t[0] * n, n / 2.0 + spec.t[1] * n);
    let half = spec.s * n / 2.0;
    let (sin, cos) = spec.r.rem_euclid(FRAC_PI_2).sin_cos();
    let mut img = Image::new(size, size, 1);
    for y in 0..size {
        for x in 0..size {
            let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
            let u = cos * dx + sin * dy;
            let v = -sin * dx + cos * dy;
            if u.abs() <= half && v.abs() <= half {
                img.data[y * size + x] = 1.0;
            }
        }
    }
    Ok(img)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    A,
    B,
    C,
    D,
}

impl Distribution {
    pub const ALL: [Distribution; 4] = [Distribution::A, Distribution::B, Distribution::C, Distribution::D];

    pub fn name(&self) -> &'static str {
        match self {
            Distribution::A => "a",
            Distribution::B => "b",
            Distribution::C => "c",
            Distribution::D => "d",
        }
    }

    /// Draws a square. Nominal scale 1 maps to a side of [`FULL_SCALE_SIDE`];
    /// a nominal translation of ±1 reaches the border margin left by the
    /// square at its worst-case rotation. The rotation is drawn first.
    pub fn sample(&self, rng: &mut Rng) -> SquareSpec {
        let r = rng.uniform(0.0, 2.0 * PI);
        let (scale, moves) = match self {
            Distribution::A => (1.0, false),
            Distribution::B => (0.6, false),
            Distribution::C => (1.0, true),
            Distribution::D => (rng.uniform(0.5, 1.0), true),
        };
        let s = scale * FULL_SCALE_SIDE;
        let t = if moves {
            let margin = (1.0 - s * SQRT_2) / 2.0 - CLEARANCE;
            [rng.uniform(-1.0, 1.0) * margin, rng.uniform(-1.0, 1.0) * margin]
        } else {
            [0.0, 0.0]
        };
        SquareSpec::new(s, t, r)
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" => Ok(Distribution::A),
            "b" => Ok(Distribution::B),
            "c" => Ok(Distribution::C),
            "d" => Ok(Distribution::D),
            other => Err(Error::Config(format!("unknown square distribution '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn area(img: &Image) -> usize {
        img.data.iter().filter(|&&v| v > 0.0).count()
    }

    #[test]
    fn centered_half_square() {
        let img = draw_square(&SquareSpec::new(0.5, [0.0, 0.0], 0.0), 64).unwrap();
        assert_eq!(area(&img), 32 * 32);
        assert_eq!(img.get(16, 16, 0), 1.0);
        assert_eq!(img.get(15, 16, 0), 0.0);
    }

    #[test]
    fn quarter_turn_symmetry_and_area() {
        let spec = SquareSpec::new(0.5, [0.0, 0.0], 0.0);
        let a = draw_square(&spec, 64).unwrap();
        assert_eq!(a, draw_square(&spec.with_rotation(FRAC_PI_2), 64).unwrap());
        let tilted = draw_square(&spec.with_rotation(PI / 6.0), 64).unwrap();
        let rel = (area(&tilted) as f64 - area(&a) as f64).abs() / area(&a) as f64;
        assert!(rel < 0.03, "{rel}");
    }

    #[test]
    fn oversized_square_is_rejected() {
        assert!(draw_square(&SquareSpec::new(0.9, [0.0, 0.0], PI / 4.0), 64).is_err());
        assert!(draw_square(&SquareSpec::new(0.5, [0.3, 0.0], 0.0), 64).is_err());
        assert!(draw_square(&SquareSpec::new(0.0, [0.0, 0.0], 0.0), 64).is_err());
    }

    #[test]
    fn distributions_follow_their_definitions() {
        let mut rng = Rng::seed_from_u64(11);
        for _ in 0..500 {
            let a = Distribution::A.sample(&mut rng);
            assert_eq!((a.s, a.t), (FULL_SCALE_SIDE, [0.0, 0.0]));
            let b = Distribution::B.sample(&mut rng);
            assert!((b.s - 0.6 * FULL_SCALE_SIDE).abs() < 1e-15);
            let d = Distribution::D.sample(&mut rng);
            assert!((0.5..=1.0).contains(&(d.s / FULL_SCALE_SIDE)));
            for dist in Distribution::ALL {
                draw_square(&dist.sample(&mut rng), CANVAS).unwrap();
            }
        }
        assert!("e".parse::<Distribution>().is_err());
        assert_eq!("D".parse::<Distribution>().unwrap(), Distribution::D);
    }

    #[test]
    fn rotations_are_uniform() {
        let mut rng = Rng::seed_from_u64(5);
        for dist in Distribution::ALL {
            let mut r: Vec<f64> = (0..10_000).map(|_| dist.sample(&mut rng).r / (2.0 * PI)).collect();
            r.sort_by(f64::total_cmp);
            let n = r.len() as f64;
            let ks = r
                .iter()
                .enumerate()
                .map(|(i, &v)| (v - i as f64 / n).abs().max(((i + 1) as f64 / n - v).abs()))
                .fold(0.0, f64::max);
            assert!(ks < 0.02, "{dist}: {ks}");
        }
    }
}
