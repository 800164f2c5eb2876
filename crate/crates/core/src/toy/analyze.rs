//! Latent traces over rotation and their sinusoid fits.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::model::ToyModel;
use super::squares::{draw_square, Distribution, CANVAS};
use super::train::images_to_batch;
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const DEFAULT_ANGLES: usize = 40;
const OMEGA_MIN: f64 = 0.5;
const OMEGA_MAX: f64 = 12.0;
const OMEGA_STEP: f64 = 0.005;
const DEGENERATE_RANGE: f64 = 1e-6;

/// Raw codes of one distribution at `n` uniform rotations of one sampled square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentTrace {
    pub distribution: Distribution,
    pub r: Vec<f64>,
    pub z: Vec<Vec<f64>>,
}

/// `z(r) ≈ amplitude * sin(omega * r + phase) + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SineFit {
    pub omega: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub offset: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimReport {
    pub distribution: Distribution,
    pub dim: usize,
    /// `None` when the trace is constant.
    pub fit: Option<SineFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentReport {
    pub traces: Vec<LatentTrace>,
    /// Traces after per-dimension min-max scaling to `[-1, 1]` using the first trace's range.
    pub normalized: Vec<LatentTrace>,
    pub fits: Vec<DimReport>,
    /// Wrapped phase difference between dims 0 and 1 per distribution.
    pub phase_difference: Vec<(Distribution, Option<f64>)>,
    /// Mean absolute pointwise gap to the first trace, per later distribution.
    pub coincidence_gap: Vec<(Distribution, f64)>,
}

impl LatentReport {
    pub fn fits_for(&self, dist: Distribution) -> impl Iterator<Item = &DimReport> {
        self.fits.iter().filter(move |f| f.distribution == dist)
    }

    pub fn max_gap(&self) -> f64 {
        self.coincidence_gap.iter().map(|g| g.1).fold(0.0, f64::max)
    }
}

/// Encodes `n_angles` rotations in `[0, 2π)` of one square per distribution.
/// Non-rotation parameters come from a seeded draw per distribution.
pub fn latent_traces(
    model: &ToyModel,
    n_angles: usize,
    distributions: &[Distribution],
    seed: u64,
) -> Result<Vec<LatentTrace>> {
    if n_angles == 0 {
        return Err(Error::EmptyInput("angles"));
    }
    let r: Vec<f64> = (0..n_angles).map(|i| 2.0 * PI * i as f64 / n_angles as f64).collect();
    distributions
        .iter()
        .enumerate()
        .map(|(i, &dist)| {
            let base = dist.sample(&mut Rng::split(seed, i as u64));
            let images = r
                .iter()
                .map(|&a| draw_square(&base.with_rotation(a), CANVAS))
                .collect::<Result<Vec<_>>>()?;
            let codes = model.encode(images_to_batch(&images)?.view())?;
            let z = codes
                .outer_iter()
                .map(|row| row.iter().map(|&v| v as f64).collect())
                .collect();
            Ok(LatentTrace {
                distribution: dist,
                r: r.clone(),
                z,
            })
        })
        .collect()
}

/// Least-squares fit of `a sin(ωr) + b cos(ωr) + c`, scanning ω.
pub fn fit_sinusoid(r: &[f64], z: &[f64]) -> Option<SineFit> {
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    let sst: f64 = z.iter().map(|v| (v - mean).powi(2)).sum();
    if sst <= 0.0 {
        return None;
    }
    let steps = ((OMEGA_MAX - OMEGA_MIN) / OMEGA_STEP).round() as usize;
    let mut best: Option<SineFit> = None;
    for i in 0..=steps {
        let omega = OMEGA_MIN + i as f64 * OMEGA_STEP;
        let mut ata = Matrix3::zeros();
        let mut atb = Vector3::zeros();
        for (&ri, &zi) in r.iter().zip(z) {
            let row = Vector3::new((omega * ri).sin(), (omega * ri).cos(), 1.0);
            ata += row * row.transpose();
            atb += row * zi;
        }
        let Some(coef) = ata.cholesky().map(|c| c.solve(&atb)) else {
            continue;
        };
        let sse: f64 = r
            .iter()
            .zip(z)
            .map(|(&ri, &zi)| (zi - coef[0] * (omega * ri).sin() - coef[1] * (omega * ri).cos() - coef[2]).powi(2))
            .sum();
        let r2 = 1.0 - sse / sst;
        if best.is_none_or(|b| r2 > b.r2) {
            best = Some(SineFit {
                omega,
                amplitude: coef[0].hypot(coef[1]),
                phase: coef[1].atan2(coef[0]),
                offset: coef[2],
                r2,
            });
        }
    }
    best
}

fn wrap(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Traces, fits and coincidence gaps for the given distributions. The
/// first distribution is the reference for normalization and gaps.
pub fn analyze_latent(
    model: &ToyModel,
    n_angles: usize,
    distributions: &[Distribution],
    seed: u64,
) -> Result<LatentReport> {
    let traces = latent_traces(model, n_angles, distributions, seed)?;
    let dims = model.latent_dim();
    let reference = traces.first().ok_or(Error::EmptyInput("distributions"))?;
    let ranges: Vec<(f64, f64)> = (0..dims)
        .map(|d| {
            reference
                .z
                .iter()
                .map(|z| z[d])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
        })
        .collect();
    let normalized: Vec<LatentTrace> = traces
        .iter()
        .map(|t| LatentTrace {
            z: t.z
                .iter()
                .map(|z| {
                    (0..dims)
                        .map(|d| {
                            let (lo, hi) = ranges[d];
                            if hi - lo > DEGENERATE_RANGE {
                                2.0 * (z[d] - lo) / (hi - lo) - 1.0
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
                .collect(),
            ..t.clone()
        })
        .collect();

    let mut fits = Vec::new();
    let mut phase_difference = Vec::new();
    for t in &traces {
        let mut phases = Vec::new();
        for d in 0..dims {
            let series: Vec<f64> = t.z.iter().map(|z| z[d]).collect();
            let (lo, hi) = series.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
            let fit = if hi - lo > DEGENERATE_RANGE {
                fit_sinusoid(&t.r, &series)
            } else {
                None
            };
            phases.push(fit.map(|f| f.phase));
            fits.push(DimReport {
                distribution: t.distribution,
                dim: d,
                fit,
            });
        }
        let diff = match (phases.first(), phases.get(1)) {
            (Some(Some(a)), Some(Some(b))) => Some(wrap(a - b)),
            _ => None,
        };
        phase_difference.push((t.distribution, diff));
    }

    let reference = &normalized[0];
    let coincidence_gap = normalized[1..]
        .iter()
        .map(|t| {
            let total: f64 =
                t.z.iter()
                    .zip(&reference.z)
                    .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / dims as f64)
                    .sum();
            (t.distribution, total / t.z.len() as f64)
        })
        .collect();

    Ok(LatentReport {
        traces,
        normalized,
        fits,
        phase_difference,
        coincidence_gap,
    })
}

/// CSV with columns `r_deg,z1,z2,...,distribution`.
pub fn write_traces_csv(mut w: impl Write, traces: &[LatentTrace]) -> Result<()> {
    let dims = traces.first().and_then(|t| t.z.first()).map_or(0, |z| z.len());
    let header: Vec<String> = (1..=dims).map(|d| format!("z{d}")).collect();
    writeln!(w, "r_deg,{},distribution", header.join(","))?;
    for t in traces {
        for (r, z) in t.r.iter().zip(&t.z) {
            let zs: Vec<String> = z.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{},{},{}", r.to_degrees(), zs.join(","), t.distribution)?;
        }
    }
    Ok(())
}
