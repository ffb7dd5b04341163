//! Multiscale Hessian vesselness and the entropy score used to pick the
//! starting frame.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::sample::convolve_separable;
use crate::imgcore::{check_dims, BinaryMask, GrayImage};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    /// Bright tubes on a darker background.
    BrightRidge,
    /// Dark tubes on a brighter background, as vessels appear in fundus images.
    DarkRidge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrangiConfig {
    pub beta: f64,
    pub c: f64,
    pub scales: Vec<f64>,
    pub polarity: Polarity,
}

impl Default for FrangiConfig {
    fn default() -> Self {
        Self { beta: 0.75, c: 15.0, scales: vec![3.0, 4.0, 5.0], polarity: Polarity::DarkRidge }
    }
}

impl FrangiConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !(self.c > 0.0) {
            return Err(Error::InvalidConfig("frangi: beta and c must be positive".into()));
        }
        if self.scales.is_empty() || self.scales.iter().any(|&s| !(s >= 1.0)) {
            return Err(Error::InvalidConfig("frangi: scales must be nonempty and each at least 1".into()));
        }
        Ok(())
    }
}

/// Per-pixel Hessian eigenvalues with `|l1| <= |l2|`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenField<T> {
    pub width: usize,
    pub height: usize,
    pub l1: Vec<T>,
    pub l2: Vec<T>,
}

/// Vesselness response in `[0, 1]`, zero outside `valid`.
#[derive(Debug, Clone, PartialEq)]
pub struct VesselnessMap<T> {
    pub width: usize,
    pub height: usize,
    pub values: Vec<T>,
    pub valid: BinaryMask,
}

impl<T: Real> VesselnessMap<T> {
    pub fn new(values: GrayImage<T>, valid: BinaryMask) -> Result<Self> {
        check_dims(values.dims(), valid.dims())?;
        let GrayImage { width, height, values } = values;
        let values = values.into_iter().zip(&valid.bits).map(|(v, &ok)| if ok { v } else { T::zero() }).collect();
        Ok(Self { width, height, values, valid })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, values: vec![T::zero(); width * height], valid: BinaryMask::new(width, height) }
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.values[y * self.width + x]
    }
}

/// Sampled Gaussian kernels of radius `ceil(3s)`, laid out for correlation:
/// smoothing (unit sum), first derivative (odd) and second derivative
/// (shifted to zero sum so constants vanish exactly).
pub fn derivative_kernels<T: Real>(s: f64) -> [Vec<T>; 3] {
    let r = (3.0 * s).ceil() as i64;
    let s2 = s * s;
    let offsets: Vec<f64> = (-r..=r).map(|i| i as f64).collect();
    let g: Vec<f64> = offsets.iter().map(|u| (-u * u / (2.0 * s2)).exp()).collect();
    let sum: f64 = g.iter().sum();
    let g: Vec<f64> = g.iter().map(|v| v / sum).collect();
    let d1: Vec<f64> = offsets.iter().zip(&g).map(|(u, gv)| u / s2 * gv).collect();
    let d2: Vec<f64> = offsets.iter().zip(&g).map(|(u, gv)| (u * u - s2) / (s2 * s2) * gv).collect();
    let bias: f64 = d2.iter().sum();
    let d2: Vec<f64> = d2.iter().zip(&g).map(|(v, gv)| v - bias * gv).collect();
    [g, d1, d2].map(|k| k.into_iter().map(T::lit).collect())
}

/// Eigenvalues of `[[a, b], [b, c]]`, ordered by absolute value.
#[inline]
pub fn symmetric_eigen<T: Real>(a: T, b: T, c: T) -> (T, T) {
    let half = T::lit(0.5);
    let mean = (a + c) * half;
    let r = ((a - c) * half).hypot(b);
    let (mu1, mu2) = (mean + r, mean - r);
    if mu1.abs() <= mu2.abs() {
        (mu1, mu2)
    } else {
        (mu2, mu1)
    }
}

/// Eigenvalues of the scale-normalised (`s^2`) Hessian at scale `s`.
pub fn hessian_eigen<T: Real>(gray: &GrayImage<T>, s: f64) -> EigenField<T> {
    let [g, d1, d2] = derivative_kernels::<T>(s);
    let norm = T::lit(s * s);
    let hxx = convolve_separable(gray, &d2, &g);
    let hyy = convolve_separable(gray, &g, &d2);
    let hxy = convolve_separable(gray, &d1, &d1);
    let n = gray.values.len();
    let mut l1 = Vec::with_capacity(n);
    let mut l2 = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = symmetric_eigen(hxx.values[i] * norm, hxy.values[i] * norm, hyy.values[i] * norm);
        l1.push(a);
        l2.push(b);
    }
    EigenField { width: gray.width, height: gray.height, l1, l2 }
}

/// Single-pixel vesselness: zero when the dominant curvature has the wrong
/// sign for the polarity or vanishes.
#[inline]
pub fn vesselness_value<T: Real>(l1: T, l2: T, beta: T, c: T, polarity: Polarity) -> T {
    let wrong_sign = match polarity {
        Polarity::BrightRidge => l2 > T::zero(),
        Polarity::DarkRidge => l2 < T::zero(),
    };
    if wrong_sign || l2 == T::zero() {
        return T::zero();
    }
    let two = T::lit(2.0);
    let rb = l1.abs() / l2.abs();
    let s2 = l1 * l1 + l2 * l2;
    (-(rb * rb) / (two * beta * beta)).exp() * (T::one() - (-s2 / (two * c * c)).exp())
}

pub fn vesselness_at_scale<T: Real>(eigen: &EigenField<T>, beta: f64, c: f64, polarity: Polarity) -> GrayImage<T> {
    let (beta, c) = (T::lit(beta), T::lit(c));
    let values = eigen.l1.iter().zip(&eigen.l2).map(|(&a, &b)| vesselness_value(a, b, beta, c, polarity)).collect();
    GrayImage { width: eigen.width, height: eigen.height, values }
}

/// Maximum response over the configured scales, zeroed outside `valid`.
pub fn vesselness<T: Real>(gray: &GrayImage<T>, valid: &BinaryMask, config: &FrangiConfig) -> Result<VesselnessMap<T>> {
    check_dims(gray.dims(), valid.dims())?;
    let mut best = GrayImage::filled(gray.width, gray.height, T::zero());
    for &s in &config.scales {
        let v = vesselness_at_scale(&hessian_eigen(gray, s), config.beta, config.c, config.polarity);
        for (b, x) in best.values.iter_mut().zip(v.values) {
            *b = b.max(x);
        }
    }
    VesselnessMap::new(best, valid.clone())
}

/// Replace every pixel outside `valid` by the mean of its already-filled
/// 8-neighbours, growing outward layer by layer from the valid region.
///
/// Removes the artificial step edges at the mask boundary that would
/// otherwise read as strong ridges.
pub fn fill_outside<T: Real>(gray: &GrayImage<T>, valid: &BinaryMask) -> Result<GrayImage<T>> {
    check_dims(gray.dims(), valid.dims())?;
    let (w, h) = gray.dims();
    if valid.is_empty() {
        return Err(Error::EmptyValidRegion);
    }
    let mut out = gray.clone();
    let mut known = valid.bits.clone();
    let neighbours = |i: usize| {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        (-1..=1isize)
            .flat_map(move |dy| (-1..=1isize).map(move |dx| (x + dx, y + dy)))
            .filter(move |&(nx, ny)| (nx, ny) != (x, y) && nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h)
    };
    let mut frontier: VecDeque<usize> = VecDeque::new();
    let mut queued = vec![false; w * h];
    for i in 0..w * h {
        if !known[i] && neighbours(i).any(|(nx, ny)| known[ny as usize * w + nx as usize]) {
            frontier.push_back(i);
            queued[i] = true;
        }
    }
    while !frontier.is_empty() {
        let layer: Vec<usize> = frontier.drain(..).collect();
        let fills: Vec<T> = layer
            .iter()
            .map(|&i| {
                let (sum, n) = neighbours(i)
                    .map(|(nx, ny)| ny as usize * w + nx as usize)
                    .filter(|&j| known[j])
                    .fold((T::zero(), 0usize), |(s, n), j| (s + out.values[j], n + 1));
                sum / T::from_usize_lossy(n)
            })
            .collect();
        for (&i, v) in layer.iter().zip(fills) {
            out.values[i] = v;
            known[i] = true;
        }
        for &i in &layer {
            for (nx, ny) in neighbours(i) {
                let j = ny as usize * w + nx as usize;
                if !known[j] && !queued[j] {
                    queued[j] = true;
                    frontier.push_back(j);
                }
            }
        }
    }
    Ok(out)
}

/// Shannon entropy (bits) of the 256-bin histogram of valid vesselness values.
pub fn entropy_score<T: Real>(map: &VesselnessMap<T>) -> Result<T> {
    let mut hist = [0usize; 256];
    let mut total = 0usize;
    for (&v, &ok) in map.values.iter().zip(&map.valid.bits) {
        if ok {
            let bin = (v * T::lit(256.0)).floor().to_usize().unwrap_or(0).min(255);
            hist[bin] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::EmptyValidRegion);
    }
    let n = T::from_usize_lossy(total);
    Ok(hist.iter().filter(|&&c| c > 0).fold(T::zero(), |acc, &c| {
        let p = T::from_usize_lossy(c) / n;
        acc - p * p.log2()
    }))
}

/// Usable frame with the highest score; the earliest wins ties.
pub fn select_start_frame<T: Real>(scores: &[T], usable: &[bool]) -> Result<usize> {
    let mut best: Option<(usize, T)> = None;
    for (i, (&s, &ok)) in scores.iter().zip(usable).enumerate() {
        if ok && best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i).ok_or(Error::NoUsableFrames)
}
