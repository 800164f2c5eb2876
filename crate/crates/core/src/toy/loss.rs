//! Bootstrapped squared-error loss: only the worst `1/k` of pixels count.

use num_traits::Float;

use crate::error::{Error, Result};

/// Number of pixels kept out of `d` for bootstrap factor `k`.
pub fn kept_pixels(d: usize, k: usize) -> usize {
    d.div_ceil(k.max(1))
}

/// Sum of the `⌈D/k⌉` largest squared errors and the mask of those pixels.
/// Ties at the cutoff favor the lower pixel index.
pub fn bootstrapped_l2<T: Float>(x: &[T], x_hat: &[T], k: usize) -> Result<(T, Vec<bool>)> {
    if x.len() != x_hat.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            actual: x_hat.len(),
        });
    }
    if k == 0 {
        return Err(Error::Config("bootstrap factor must be >= 1".into()));
    }
    let mut mask = vec![false; x.len()];
    let loss = bootstrapped_into(x, x_hat, k, &mut mask, &mut Vec::new());
    Ok((loss, mask))
}

/// Allocation-reusing core of [`bootstrapped_l2`]; inputs already validated.
pub(crate) fn bootstrapped_into<T: Float>(
    x: &[T],
    x_hat: &[T],
    k: usize,
    mask: &mut [bool],
    scratch: &mut Vec<u128>,
) -> T {
    let d = x.len();
    let keep = kept_pixels(d, k);
    mask.iter_mut().for_each(|m| *m = false);
    let sq = |i: usize| (x_hat[i] - x[i]) * (x_hat[i] - x[i]);
    if keep >= d {
        mask.iter_mut().for_each(|m| *m = true);
    } else {
        // Squared errors are non-negative, so their f64 bit patterns sort like
        // the values; the low half ranks lower indices higher on ties.
        scratch.clear();
        scratch.extend((0..d).map(|i| {
            let bits = sq(i).to_f64().unwrap_or(f64::INFINITY).to_bits() as u128;
            (bits << 64) | (u64::MAX - i as u64) as u128
        }));
        scratch.select_nth_unstable_by(keep - 1, |a, b| b.cmp(a));
        for &key in &scratch[..keep] {
            mask[(u64::MAX - key as u64) as usize] = true;
        }
    }
    let mut loss = T::zero();
    for i in 0..d {
        if mask[i] {
            loss = loss + sq(i);
        }
    }
    loss
}
