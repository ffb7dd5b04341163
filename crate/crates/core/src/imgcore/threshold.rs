use std::cmp::Ordering;

use super::image::{BinaryMask, Frame, GrayImage};
use crate::error::{Error, Result};
use crate::real::Real;

/// Rec. 601 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

pub fn to_grayscale<T: Real>(frame: &Frame) -> GrayImage<T> {
    let [wr, wg, wb] = LUMA_WEIGHTS.map(T::lit);
    let values = frame
        .pixels()
        .iter()
        .map(|p| wr * T::lit(p[0] as f64) + wg * T::lit(p[1] as f64) + wb * T::lit(p[2] as f64))
        .collect();
    GrayImage { width: frame.width(), height: frame.height(), values }
}

/// Histogram bin of a real intensity.
///
/// Values are rounded up so that, for every integer level `t`, a pixel lands in
/// a bin `<= t` exactly when `binarize` leaves it unset.
#[inline]
pub fn histogram_bin<T: Real>(v: T) -> usize {
    let c = v.ceil();
    if !(c > T::zero()) {
        0
    } else if c >= T::lit(255.0) {
        255
    } else {
        c.to_usize().unwrap_or(0)
    }
}

pub fn histogram<T: Real>(gray: &GrayImage<T>) -> [u64; 256] {
    let mut hist = [0u64; 256];
    for &v in &gray.values {
        hist[histogram_bin(v)] += 1;
    }
    hist
}

/// Between-class variance of a split, kept as an exact fraction.
///
/// For classes with `n0`, `n1` pixels and intensity sums `s0`, `s1`, the
/// variance is `(n1*s0 - n0*s1)^2 / (n0*n1*N^2)`; the common `N^2` is dropped.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SplitScore {
    num: u128,
    den: u128,
}

impl SplitScore {
    pub(crate) fn new(n0: u64, s0: u64, n1: u64, s1: u64) -> Self {
        let a = n1 as u128 * s0 as u128;
        let b = n0 as u128 * s1 as u128;
        let diff = a.abs_diff(b);
        Self { num: diff * diff, den: n0 as u128 * n1 as u128 }
    }

    pub(crate) fn cmp(&self, other: &Self) -> Ordering {
        mul_wide(self.num, other.den).cmp(&mul_wide(other.num, self.den))
    }
}

/// Full 256-bit product as (high, low) words.
fn mul_wide(a: u128, b: u128) -> (u128, u128) {
    const MASK: u128 = u64::MAX as u128;
    let (a1, a0) = (a >> 64, a & MASK);
    let (b1, b0) = (b >> 64, b & MASK);
    let p00 = a0 * b0;
    let p01 = a0 * b1;
    let p10 = a1 * b0;
    let p11 = a1 * b1;
    let mid = (p00 >> 64) + (p01 & MASK) + (p10 & MASK);
    let lo = (p00 & MASK) | (mid << 64);
    let hi = p11 + (p01 >> 64) + (p10 >> 64) + (mid >> 64);
    (hi, lo)
}

/// Otsu's threshold over a 256-bin histogram.
///
/// Returns the level `t` maximising the between-class variance of the split
/// `{bins <= t}` / `{bins > t}`; the smallest maximiser wins ties.
pub fn otsu_threshold<T: Real>(gray: &GrayImage<T>) -> Result<u8> {
    let hist = histogram(gray);
    let total_n: u64 = hist.iter().sum();
    let total_s: u64 = hist.iter().enumerate().map(|(i, &c)| i as u64 * c).sum();

    let mut best: Option<(u8, SplitScore)> = None;
    let (mut n0, mut s0) = (0u64, 0u64);
    for (t, &count) in hist.iter().enumerate() {
        n0 += count;
        s0 += t as u64 * count;
        let n1 = total_n - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let score = SplitScore::new(n0, s0, n1, total_s - s0);
        match &best {
            Some((_, b)) if score.cmp(b) != Ordering::Greater => {}
            _ => best = Some((t as u8, score)),
        }
    }
    best.map(|(t, _)| t).ok_or(Error::DegenerateHistogram)
}

/// Pixels strictly brighter than `threshold`.
pub fn binarize<T: Real>(gray: &GrayImage<T>, threshold: T) -> BinaryMask {
    BinaryMask { width: gray.width, height: gray.height, bits: gray.values.iter().map(|&v| v > threshold).collect() }
}
