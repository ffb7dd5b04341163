//! Exhaustive integer-translation scan at the coarsest pyramid level.
//!
//! For a fixed scale the frame map is resampled once onto the mosaic grid;
//! every integer translation then overlaps the two grids pixel for pixel, so
//! the six masked sums behind each correlation score are plain
//! cross-correlations and are evaluated together with FFTs.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use super::{sample_masked, score_from_sums};
use crate::real::Real;
use crate::vesselness::VesselnessMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Hypothesis {
    pub scale: f64,
    pub tx: i64,
    pub ty: i64,
    pub score: f64,
}

struct Plan {
    px: usize,
    py: usize,
    row: Arc<dyn Fft<f64>>,
    col: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Plan {
    fn new(px: usize, py: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            px,
            py,
            row: planner.plan_fft_forward(px),
            col: planner.plan_fft_forward(py),
            row_inv: planner.plan_fft_inverse(px),
            col_inv: planner.plan_fft_inverse(py),
        }
    }

    fn run(&self, data: &mut [Complex<f64>], inverse: bool) {
        let (row, col) = if inverse { (&self.row_inv, &self.col_inv) } else { (&self.row, &self.col) };
        for r in data.chunks_exact_mut(self.px) {
            row.process(r);
        }
        let mut column = vec![Complex::new(0.0, 0.0); self.py];
        for x in 0..self.px {
            for y in 0..self.py {
                column[y] = data[y * self.px + x];
            }
            col.process(&mut column);
            for y in 0..self.py {
                data[y * self.px + x] = column[y];
            }
        }
    }

    fn forward(&self, w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> Vec<Complex<f64>> {
        let mut data = vec![Complex::new(0.0, 0.0); self.px * self.py];
        for y in 0..h {
            for x in 0..w {
                data[y * self.px + x] = Complex::new(f(x, y), 0.0);
            }
        }
        self.run(&mut data, false);
        data
    }

    /// Circular cross-correlation `sum_u f(u) g(u + t)` from the two spectra.
    fn correlate(&self, f: &[Complex<f64>], g: &[Complex<f64>]) -> Vec<f64> {
        let mut data: Vec<Complex<f64>> = f.iter().zip(g).map(|(a, b)| a.conj() * b).collect();
        self.run(&mut data, true);
        let norm = (self.px * self.py) as f64;
        data.into_iter().map(|c| c.re / norm).collect()
    }
}

/// Frame map resampled by `scale` onto an integer grid anchored at the origin.
struct Warped {
    width: usize,
    height: usize,
    values: Vec<f64>,
    mask: Vec<bool>,
}

fn warp<T: Real>(a: &VesselnessMap<T>, scale: f64) -> Warped {
    let width = (scale * (a.width - 1) as f64).floor() as usize + 1;
    let height = (scale * (a.height - 1) as f64).floor() as usize + 1;
    let s = T::lit(scale);
    let mut values = vec![0.0; width * height];
    let mut mask = vec![false; width * height];
    for v in 0..height {
        for u in 0..width {
            let x = T::from_usize_lossy(u) / s;
            let y = T::from_usize_lossy(v) / s;
            if let Some(val) = sample_masked(a, x, y) {
                values[v * width + u] = val.as_f64();
                mask[v * width + u] = true;
            }
        }
    }
    Warped { width, height, values, mask }
}

/// Scores of every integer translation, for every scale, whose overlap meets
/// `min_overlap_fraction`, in scale / row / column order.
pub(crate) fn scan<T: Real>(
    a: &VesselnessMap<T>,
    b: &VesselnessMap<T>,
    scales: &[f64],
    min_overlap_fraction: f64,
) -> Vec<Hypothesis> {
    let n_a = a.valid.count() as f64;
    let warped: Vec<Warped> = scales.iter().map(|&s| warp(a, s)).collect();
    let max_w = warped.iter().map(|w| w.width).max().unwrap_or(1);
    let max_h = warped.iter().map(|w| w.height).max().unwrap_or(1);
    let plan = Plan::new(max_w + b.width - 1, max_h + b.height - 1);
    let (px, py) = (plan.px, plan.py);

    let bv = |x: usize, y: usize| if b.valid.get(x, y) { b.get(x, y).as_f64() } else { 0.0 };
    let fb_mask = plan.forward(b.width, b.height, |x, y| if b.valid.get(x, y) { 1.0 } else { 0.0 });
    let fb = plan.forward(b.width, b.height, bv);
    let fb2 = plan.forward(b.width, b.height, |x, y| bv(x, y).powi(2));

    let mut out = Vec::new();
    for (&scale, wa) in scales.iter().zip(&warped) {
        let at = |x: usize, y: usize| wa.values[y * wa.width + x];
        let fa_mask = plan.forward(wa.width, wa.height, |x, y| if wa.mask[y * wa.width + x] { 1.0 } else { 0.0 });
        let fa = plan.forward(wa.width, wa.height, at);
        let fa2 = plan.forward(wa.width, wa.height, |x, y| at(x, y).powi(2));

        let n = plan.correlate(&fa_mask, &fb_mask);
        let sa = plan.correlate(&fa, &fb_mask);
        let saa = plan.correlate(&fa2, &fb_mask);
        let sb = plan.correlate(&fa_mask, &fb);
        let sbb = plan.correlate(&fa_mask, &fb2);
        let sab = plan.correlate(&fa, &fb);

        let needed = min_overlap_fraction * scale * scale * n_a;
        for ty in -(wa.height as i64 - 1)..b.height as i64 {
            let row = ty.rem_euclid(py as i64) as usize * px;
            for tx in -(wa.width as i64 - 1)..b.width as i64 {
                let i = row + tx.rem_euclid(px as i64) as usize;
                let count = n[i].round();
                if count < 2.0 || count < needed {
                    continue;
                }
                if let Some(score) = score_from_sums(count, sa[i], sb[i], saa[i], sbb[i], sab[i]) {
                    out.push(Hypothesis { scale, tx, ty, score });
                }
            }
        }
    }
    out
}
