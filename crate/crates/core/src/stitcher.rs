//! Weighted accumulation of registered frames into a growing mosaic.
//!
//! Every frame pixel carries a weight derived from its distance to the edge
//! of the usable region (ROI minus glare). The mosaic keeps running sums of
//! weighted colour and weight, so the displayed value is the weighted mean
//! of every contribution it has received.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{chamfer_distance, check_dims, BinaryMask, DistanceMap, Frame};
use crate::real::Real;
use crate::registration::SimilarityTransform;
use crate::roi::CanonicalEllipse;
use crate::vesselness::VesselnessMap;

/// How a frame pixel's distance to the usable-region boundary becomes its
/// blending weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// `w = d`: central pixels dominate.
    #[default]
    Direct,
    /// `w = 1/d`: the literal inverse-distance rule, kept for comparison.
    Inverse,
}

impl Weighting {
    pub fn weight<T: Real>(self, d: T) -> T {
        if d <= T::zero() {
            return T::zero();
        }
        match self {
            Weighting::Direct => d,
            Weighting::Inverse => T::one() / d,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StitchConfig {
    pub weighting: Weighting,
    /// Canvas growth granularity in pixels.
    pub canvas_padding: usize,
}

impl Default for StitchConfig {
    fn default() -> Self {
        Self { weighting: Weighting::Direct, canvas_padding: 32 }
    }
}

impl StitchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.canvas_padding == 0 {
            return Err(Error::InvalidConfig("stitch: canvas_padding must be positive".into()));
        }
        Ok(())
    }
}

/// Per-channel gains are clamped to this range.
pub const GAIN_MIN: f64 = 0.5;
pub const GAIN_MAX: f64 = 2.0;

/// Distance to the nearest pixel outside `roi \ glare`; zero on glare and
/// outside the ROI.
pub fn frame_weights<T: Real>(roi: &BinaryMask, glare: &BinaryMask) -> Result<DistanceMap<T>> {
    check_dims(roi.dims(), glare.dims())?;
    Ok(chamfer_distance(&roi.and_not(glare)))
}

/// Colour of `frame` at a real position. Bilinear when every neighbour with
/// nonzero interpolation weight lies in the support of `weights`, otherwise
/// the nearest pixel, and `None` when that pixel is outside the support.
fn sample_color<T: Real>(frame: &Frame, weights: &DistanceMap<T>, x: T, y: T) -> Option<[T; 3]> {
    let (w, h) = frame.dims();
    let nx = x.round();
    let ny = y.round();
    if nx < T::zero() || ny < T::zero() {
        return None;
    }
    let (ix, iy) = (nx.to_usize()?, ny.to_usize()?);
    if ix >= w || iy >= h || weights.get(ix, iy) <= T::zero() {
        return None;
    }
    let nearest = frame.pixel(ix, iy).map(|c| T::lit(c as f64));

    let (xf, yf) = (x.floor(), y.floor());
    let (x0, y0) = (xf.to_usize()?, yf.to_usize()?);
    let (fx, fy) = (x - xf, y - yf);
    let x1 = if fx > T::zero() { x0 + 1 } else { x0 };
    let y1 = if fy > T::zero() { y0 + 1 } else { y0 };
    if x1 >= w || y1 >= h {
        return Some(nearest);
    }
    let corners = [(x0, y0), (x1, y0), (x0, y1), (x1, y1)];
    if corners.iter().any(|&(cx, cy)| weights.get(cx, cy) <= T::zero()) {
        return Some(nearest);
    }
    let one = T::one();
    let px = |cx: usize, cy: usize, c: usize| T::lit(frame.pixel(cx, cy)[c] as f64);
    Some(std::array::from_fn(|c| {
        (px(x0, y0, c) * (one - fx) + px(x1, y0, c) * fx) * (one - fy)
            + (px(x0, y1, c) * (one - fx) + px(x1, y1, c) * fx) * fy
    }))
}

/// Nearest frame pixel to a real position, if inside the frame.
fn nearest_index<T: Real>(dims: (usize, usize), x: T, y: T) -> Option<(usize, usize)> {
    crate::imgcore::sample::nearest(dims.0, dims.1, x, y)
}

/// The growing mosaic.
#[derive(Debug, Clone, PartialEq)]
pub struct MosaicState<T: Real> {
    pub width: usize,
    pub height: usize,
    pub rgb_accum: Vec<[T; 3]>,
    pub weight: Vec<T>,
    /// Pixels with positive accumulated weight.
    pub valid: BinaryMask,
    pub vessel_accum: Vec<T>,
    pub vessel_weight: Vec<T>,
    /// Weighted mean vesselness; valid where some contribution carried a
    /// vesselness value.
    pub vessel_fused: VesselnessMap<T>,
    /// Canvas position of the start frame's origin.
    pub origin_offset: (i64, i64),
    config: StitchConfig,
}

impl<T: Real> MosaicState<T> {
    /// Mosaic holding only the start frame, in the start frame's own coordinates.
    pub fn start(
        frame: &Frame,
        frame_v: &VesselnessMap<T>,
        weights: &DistanceMap<T>,
        config: &StitchConfig,
    ) -> Result<Self> {
        config.validate()?;
        let (w, h) = frame.dims();
        let mut state = Self {
            width: w,
            height: h,
            rgb_accum: vec![[T::zero(); 3]; w * h],
            weight: vec![T::zero(); w * h],
            valid: BinaryMask::new(w, h),
            vessel_accum: vec![T::zero(); w * h],
            vessel_weight: vec![T::zero(); w * h],
            vessel_fused: VesselnessMap::empty(w, h),
            origin_offset: (0, 0),
            config: config.clone(),
        };
        state.blend(frame, frame_v, weights, &SimilarityTransform::identity(), [T::one(); 3])?;
        Ok(state)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn config(&self) -> &StitchConfig {
        &self.config
    }

    /// Weighted mean colour, clamped to the 8-bit range; `None` where nothing
    /// has been blended.
    pub fn displayed(&self, x: usize, y: usize) -> Option<[T; 3]> {
        let i = y * self.width + x;
        let w = self.weight[i];
        if w <= T::zero() {
            return None;
        }
        let max = T::lit(255.0);
        Some(self.rgb_accum[i].map(|c| (c / w).max(T::zero()).min(max)))
    }

    /// Displayed mosaic as 8-bit RGB with a black background.
    pub fn to_frame(&self) -> Result<Frame> {
        let rgb = (0..self.width * self.height)
            .map(|i| {
                self.displayed(i % self.width, i / self.width)
                    .map_or([0; 3], |c| c.map(|v| v.round().to_u8().unwrap_or(255)))
            })
            .collect();
        Frame::new(self.width, self.height, rgb, 0)
    }

    /// Accumulated weight scaled so the largest value maps to 65535.
    pub fn weight_map_u16(&self) -> Vec<u16> {
        let max = self.weight.iter().copied().fold(T::zero(), T::max);
        if max <= T::zero() {
            return vec![0; self.weight.len()];
        }
        self.weight.iter().map(|&w| (w / max * T::lit(65535.0)).round().to_u16().unwrap_or(u16::MAX)).collect()
    }

    /// A canvas transform expressed relative to the start frame's origin.
    pub fn to_anchor(&self, t: &SimilarityTransform<T>) -> SimilarityTransform<T> {
        t.translated(T::lit(-self.origin_offset.0 as f64), T::lit(-self.origin_offset.1 as f64))
    }

    pub fn from_anchor(&self, t: &SimilarityTransform<T>) -> SimilarityTransform<T> {
        t.translated(T::lit(self.origin_offset.0 as f64), T::lit(self.origin_offset.1 as f64))
    }

    /// Grow the canvas so it contains the closed box `[x0, x1] x [y0, y1]`
    /// (canvas coordinates), in steps of the configured padding. Returns the
    /// shift applied to existing content.
    pub fn ensure_covers(&mut self, x0: i64, y0: i64, x1: i64, y1: i64) -> (i64, i64) {
        let pad = self.config.canvas_padding as i64;
        let round_up = |v: i64| if v <= 0 { 0 } else { (v + pad - 1) / pad * pad };
        let left = round_up(-x0);
        let top = round_up(-y0);
        let right = round_up(x1 - (self.width as i64 - 1));
        let bottom = round_up(y1 - (self.height as i64 - 1));
        if left == 0 && top == 0 && right == 0 && bottom == 0 {
            return (0, 0);
        }
        let nw = self.width + (left + right) as usize;
        let nh = self.height + (top + bottom) as usize;
        let mut rgb = vec![[T::zero(); 3]; nw * nh];
        let mut weight = vec![T::zero(); nw * nh];
        let mut vacc = vec![T::zero(); nw * nh];
        let mut vw = vec![T::zero(); nw * nh];
        for y in 0..self.height {
            let src = y * self.width;
            let dst = (y + top as usize) * nw + left as usize;
            rgb[dst..dst + self.width].copy_from_slice(&self.rgb_accum[src..src + self.width]);
            weight[dst..dst + self.width].copy_from_slice(&self.weight[src..src + self.width]);
            vacc[dst..dst + self.width].copy_from_slice(&self.vessel_accum[src..src + self.width]);
            vw[dst..dst + self.width].copy_from_slice(&self.vessel_weight[src..src + self.width]);
        }
        self.width = nw;
        self.height = nh;
        self.rgb_accum = rgb;
        self.weight = weight;
        self.vessel_accum = vacc;
        self.vessel_weight = vw;
        self.origin_offset.0 += left;
        self.origin_offset.1 += top;
        self.refresh(0, 0, nw, nh);
        (left, top)
    }

    /// Recompute the derived masks and fused vesselness over a box.
    fn refresh(&mut self, x0: usize, y0: usize, x1: usize, y1: usize) {
        let (w, h) = self.dims();
        if self.valid.dims() != (w, h) {
            self.valid = BinaryMask::new(w, h);
            self.vessel_fused = VesselnessMap::empty(w, h);
        }
        for y in y0..y1.min(h) {
            for x in x0..x1.min(w) {
                let i = y * w + x;
                self.valid.bits[i] = self.weight[i] > T::zero();
                let vw = self.vessel_weight[i];
                let has_v = vw > T::zero();
                self.vessel_fused.valid.bits[i] = has_v;
                self.vessel_fused.values[i] = if has_v { (self.vessel_accum[i] / vw).min(T::one()) } else { T::zero() };
            }
        }
    }

    /// Canvas pixels already covered by the mosaic whose nearest frame pixel
    /// under `transform` has positive weight.
    pub fn overlap_mask(&self, weights: &DistanceMap<T>, transform: &SimilarityTransform<T>) -> BinaryMask {
        BinaryMask::from_fn(self.width, self.height, |x, y| {
            if !self.valid.get(x, y) {
                return false;
            }
            let (u, v) = transform.apply_inverse(T::from_usize_lossy(x), T::from_usize_lossy(y));
            nearest_index(weights.dims(), u, v).is_some_and(|(i, j)| weights.get(i, j) > T::zero())
        })
    }

    /// Add a registered frame. `transform` maps frame pixels to canvas
    /// coordinates as they are before the call; the canvas grows if needed.
    pub fn blend(
        &mut self,
        frame: &Frame,
        frame_v: &VesselnessMap<T>,
        weights: &DistanceMap<T>,
        transform: &SimilarityTransform<T>,
        gain: [T; 3],
    ) -> Result<()> {
        check_dims(frame.dims(), weights.dims())?;
        check_dims(frame.dims(), frame_v.dims())?;
        let support = weights.support();
        let Some(bbox) = bounding_box(&support) else {
            return Ok(());
        };
        // Canvas pixels whose nearest frame pixel can fall inside the support box.
        let corners = [
            transform.apply(T::from_usize_lossy(bbox.0), T::from_usize_lossy(bbox.1)),
            transform.apply(T::from_usize_lossy(bbox.2), T::from_usize_lossy(bbox.3)),
        ];
        let half = transform.scale.abs() / T::lit(2.0);
        let lo_x = (corners[0].0.min(corners[1].0) - half).ceil().to_i64().unwrap_or(0);
        let lo_y = (corners[0].1.min(corners[1].1) - half).ceil().to_i64().unwrap_or(0);
        let hi_x = (corners[0].0.max(corners[1].0) + half).floor().to_i64().unwrap_or(0);
        let hi_y = (corners[0].1.max(corners[1].1) + half).floor().to_i64().unwrap_or(0);
        let (sx, sy) = self.ensure_covers(lo_x, lo_y, hi_x, hi_y);
        let t = transform.translated(T::lit(sx as f64), T::lit(sy as f64));
        let (x0, y0) = ((lo_x + sx).max(0) as usize, (lo_y + sy).max(0) as usize);
        let (x1, y1) = (((hi_x + sx) as usize + 1).min(self.width), ((hi_y + sy) as usize + 1).min(self.height));

        let mode = self.config.weighting;
        for y in y0..y1 {
            for x in x0..x1 {
                let (u, v) = t.apply_inverse(T::from_usize_lossy(x), T::from_usize_lossy(y));
                let Some((i, j)) = nearest_index(frame.dims(), u, v) else { continue };
                let w = mode.weight(weights.get(i, j));
                if w <= T::zero() {
                    continue;
                }
                let Some(color) = sample_color(frame, weights, u, v) else { continue };
                let k = y * self.width + x;
                for c in 0..3 {
                    self.rgb_accum[k][c] += w * gain[c] * color[c];
                }
                self.weight[k] += w;
                if let Some(val) = crate::registration::sample_masked(frame_v, u, v) {
                    self.vessel_accum[k] += w * val;
                    self.vessel_weight[k] += w;
                }
            }
        }
        self.refresh(x0, y0, x1, y1);
        Ok(())
    }
}

/// Inclusive bounding box `(x0, y0, x1, y1)` of the set pixels.
fn bounding_box(mask: &BinaryMask) -> Option<(usize, usize, usize, usize)> {
    mask.iter_set().fold(None, |acc, (x, y)| {
        Some(match acc {
            None => (x, y, x, y),
            Some((a, b, c, d)) => (a.min(x), b.min(y), c.max(x), d.max(y)),
        })
    })
}

/// Per-channel gain bringing the warped frame's mean over `overlap` (canvas
/// coordinates) to the mosaic's, clamped to `[GAIN_MIN, GAIN_MAX]`. A channel
/// whose frame mean is zero gets gain one.
pub fn illumination_gain<T: Real>(
    frame: &Frame,
    mosaic: &MosaicState<T>,
    transform: &SimilarityTransform<T>,
    overlap: &BinaryMask,
) -> Result<[T; 3]> {
    check_dims(mosaic.dims(), overlap.dims())?;
    let (fw, fh) = frame.dims();
    let channels: [Vec<T>; 3] = std::array::from_fn(|c| frame.pixels().iter().map(|p| T::lit(p[c] as f64)).collect());
    let mut sum_m = [0.0f64; 3];
    let mut sum_f = [0.0f64; 3];
    let mut n = 0usize;
    for (x, y) in overlap.iter_set() {
        let Some(m) = mosaic.displayed(x, y) else { continue };
        let (u, v) = transform.apply_inverse(T::from_usize_lossy(x), T::from_usize_lossy(y));
        if nearest_index((fw, fh), u, v).is_none() {
            continue;
        }
        for c in 0..3 {
            sum_m[c] += m[c].as_f64();
            sum_f[c] += crate::imgcore::sample::bilinear(&channels[c], fw, fh, u, v).as_f64();
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyOverlap);
    }
    Ok(std::array::from_fn(|c| {
        if sum_f[c] <= 0.0 {
            T::one()
        } else {
            T::lit((sum_m[c] / sum_f[c]).clamp(GAIN_MIN, GAIN_MAX))
        }
    }))
}

/// Radial brightness falloff of a frame, `p(rho) = 1 + k2 rho^2 + k4 rho^4`
/// in the normalised elliptical radius of its ROI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub k2: f64,
    pub k4: f64,
}

impl RadialProfile {
    pub const FLAT: Self = Self { k2: 0.0, k4: 0.0 };

    /// Relative brightness at `rho`, kept within a sane range.
    pub fn at(&self, rho: f64) -> f64 {
        let r2 = rho * rho;
        (1.0 + self.k2 * r2 + self.k4 * r2 * r2).clamp(0.2, 2.0)
    }
}

/// Fit the radial falloff from per-ring luma medians over `usable` pixels.
/// Medians keep vessels and the optic disc from biasing the rings. Returns
/// the flat profile when too few rings are populated.
pub fn estimate_vignetting<T: Real>(frame: &Frame, roi: &CanonicalEllipse<T>, usable: &BinaryMask) -> RadialProfile {
    const RINGS: usize = 12;
    const MIN_RING: usize = 12;
    let mut rings: Vec<Vec<f64>> = vec![Vec::new(); RINGS];
    for (x, y) in usable.iter_set() {
        let rho = roi.radial(T::from_usize_lossy(x), T::from_usize_lossy(y)).as_f64();
        if rho < 1.0 {
            let [r, g, b] = frame.pixel(x, y).map(f64::from);
            rings[((rho * RINGS as f64) as usize).min(RINGS - 1)].push(0.299 * r + 0.587 * g + 0.114 * b);
        }
    }
    let samples: Vec<(f64, f64)> = rings
        .iter_mut()
        .enumerate()
        .filter(|(_, ring)| ring.len() >= MIN_RING)
        .map(|(k, ring)| {
            ring.sort_by(f64::total_cmp);
            ((k as f64 + 0.5) / RINGS as f64, ring[ring.len() / 2])
        })
        .collect();
    fit_profile(&samples)
}

/// Sequence-wide falloff: the ring-wise median of the individual profiles,
/// refitted. Scene content biases single-frame fits, but not consistently.
pub fn pool_vignetting(profiles: &[RadialProfile]) -> RadialProfile {
    const RINGS: usize = 12;
    let fitted: Vec<&RadialProfile> = profiles.iter().filter(|p| **p != RadialProfile::FLAT).collect();
    if fitted.is_empty() {
        return RadialProfile::FLAT;
    }
    let samples: Vec<(f64, f64)> = (0..RINGS)
        .map(|k| {
            let rho = (k as f64 + 0.5) / RINGS as f64;
            let mut v: Vec<f64> = fitted.iter().map(|p| p.at(rho)).collect();
            v.sort_by(f64::total_cmp);
            (rho, v[v.len() / 2])
        })
        .collect();
    fit_profile(&samples)
}

/// Least squares for `m(rho) = c0 + c2 rho^2 + c4 rho^4`, normalised by `c0`.
fn fit_profile(samples: &[(f64, f64)]) -> RadialProfile {
    if samples.len() < 4 {
        return RadialProfile::FLAT;
    }
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for &(rho, m) in samples {
        let basis = [1.0, rho * rho, rho.powi(4)];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += basis[i] * basis[j];
            }
            atb[i] += basis[i] * m;
        }
    }
    match solve3(ata, atb) {
        Some([c0, c2, c4]) if c0 > 0.0 => RadialProfile { k2: c2 / c0, k4: c4 / c0 },
        _ => RadialProfile::FLAT,
    }
}

/// Gaussian elimination with partial pivoting on a 3x3 system.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}

/// Divide the ROI pixels of `frame` by the radial profile.
pub fn flatten_vignetting<T: Real>(frame: &Frame, roi: &CanonicalEllipse<T>, profile: &RadialProfile) -> Frame {
    let mut out = frame.clone();
    let (w, h) = frame.dims();
    for y in 0..h {
        for x in 0..w {
            let rho = roi.radial(T::from_usize_lossy(x), T::from_usize_lossy(y)).as_f64();
            if rho < 1.0 {
                let p = profile.at(rho);
                let px = out.pixel_mut(x, y);
                *px = px.map(|c| (c as f64 / p).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    out
}
