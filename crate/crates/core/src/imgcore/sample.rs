//! Interpolation and smoothing helpers shared by the warping stages.

use super::image::GrayImage;
use crate::real::Real;

/// Bilinear interpolation with coordinates clamped to the image.
#[inline]
pub fn bilinear<T: Real>(values: &[T], width: usize, height: usize, x: T, y: T) -> T {
    let max_x = T::from_usize_lossy(width - 1);
    let max_y = T::from_usize_lossy(height - 1);
    let x = x.max(T::zero()).min(max_x);
    let y = y.max(T::zero()).min(max_y);
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let x0 = x0.to_usize().unwrap_or(0);
    let y0 = y0.to_usize().unwrap_or(0);
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let v00 = values[y0 * width + x0];
    let v10 = values[y0 * width + x1];
    let v01 = values[y1 * width + x0];
    let v11 = values[y1 * width + x1];
    let one = T::one();
    (v00 * (one - fx) + v10 * fx) * (one - fy) + (v01 * (one - fx) + v11 * fx) * fy
}

/// Nearest pixel index of a real coordinate, if it falls inside the image.
#[inline]
pub fn nearest<T: Real>(width: usize, height: usize, x: T, y: T) -> Option<(usize, usize)> {
    let half = T::lit(0.5);
    let rx = (x + half).floor();
    let ry = (y + half).floor();
    if rx < T::zero() || ry < T::zero() {
        return None;
    }
    let (ix, iy) = (rx.to_usize()?, ry.to_usize()?);
    (ix < width && iy < height).then_some((ix, iy))
}

/// Mirror an out-of-range index back into `[0, n)` (edge sample repeated).
#[inline]
pub fn reflect_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

/// Separable convolution with reflective boundaries. Kernels are centred.
pub fn convolve_separable<T: Real>(img: &GrayImage<T>, kx: &[T], ky: &[T]) -> GrayImage<T> {
    let (w, h) = img.dims();
    let rx = (kx.len() / 2) as isize;
    let ry = (ky.len() / 2) as isize;
    let mut tmp = vec![T::zero(); w * h];
    for y in 0..h {
        let row = &img.values[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = T::zero();
            for (k, &kv) in kx.iter().enumerate() {
                let sx = reflect_index(x as isize + k as isize - rx, w);
                acc += kv * row[sx];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![T::zero(); w * h];
    for y in 0..h {
        for (k, &kv) in ky.iter().enumerate() {
            let sy = reflect_index(y as isize + k as isize - ry, h);
            let src = &tmp[sy * w..(sy + 1) * w];
            let dst = &mut out[y * w..(y + 1) * w];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += kv * s;
            }
        }
    }
    GrayImage { width: w, height: h, values: out }
}

/// Normalised sampled Gaussian of standard deviation `sigma`, radius `ceil(3 sigma)`.
pub fn gaussian_kernel<T: Real>(sigma: f64) -> Vec<T> {
    let r = (3.0 * sigma).ceil().max(1.0) as isize;
    let raw: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| T::lit(v / sum)).collect()
}

pub fn gaussian_blur<T: Real>(img: &GrayImage<T>, sigma: f64) -> GrayImage<T> {
    if sigma <= 0.0 {
        return img.clone();
    }
    let k = gaussian_kernel::<T>(sigma);
    convolve_separable(img, &k, &k)
}
