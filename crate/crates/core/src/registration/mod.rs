//! Scale + translation registration of vesselness maps by normalised
//! cross-correlation, searched coarse to fine.

mod coarse;
mod transform;

pub use transform::SimilarityTransform;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{BinaryMask, GrayImage};
use crate::real::Real;
use crate::vesselness::VesselnessMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub pyramid_levels: usize,
    pub scale_min: f64,
    pub scale_max: f64,
    pub scale_step_coarse: f64,
    /// Translation refinement half-width at each finer level, in that level's pixels.
    pub refine_radius: usize,
    pub min_overlap_fraction: f64,
    pub ambiguity_factor: f64,
    /// Coarsest-level distance within which competing peaks are suppressed.
    pub nms_radius: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            pyramid_levels: 3,
            scale_min: 0.85,
            scale_max: 1.15,
            scale_step_coarse: 0.05,
            refine_radius: 2,
            min_overlap_fraction: 0.2,
            ambiguity_factor: 1.5,
            nms_radius: 5.0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(format!("search: {msg}")));
        if self.pyramid_levels < 1 {
            return fail("pyramid_levels must be at least 1");
        }
        if !(self.scale_min > 0.0 && self.scale_min <= self.scale_max) {
            return fail("scale range must satisfy 0 < scale_min <= scale_max");
        }
        if !(self.scale_step_coarse > 0.0) {
            return fail("scale_step_coarse must be positive");
        }
        if !(self.ambiguity_factor > 1.0) {
            return fail("ambiguity_factor must exceed 1");
        }
        if !(self.min_overlap_fraction > 0.0 && self.min_overlap_fraction <= 1.0) {
            return fail("min_overlap_fraction must lie in (0, 1]");
        }
        if !(self.nms_radius >= 0.0) {
            return fail("nms_radius must be non-negative");
        }
        Ok(())
    }

    /// Coarse scale grid from `scale_min` to `scale_max`.
    pub fn coarse_scales(&self) -> Vec<f64> {
        let steps = ((self.scale_max - self.scale_min) / self.scale_step_coarse + 1e-9).floor() as usize;
        (0..=steps).map(|i| self.scale_min + i as f64 * self.scale_step_coarse).collect()
    }

    fn clamp_scale<T: Real>(&self, s: T) -> T {
        s.max(T::lit(self.scale_min)).min(T::lit(self.scale_max))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RegistrationResult<T: Real> {
    pub transform: SimilarityTransform<T>,
    pub score: T,
    /// Best coarse-level score away from the winning peak; -1 when there is none.
    pub second_score: T,
    /// Overlap of the final hypothesis as a fraction of the frame's valid area.
    pub overlap: T,
    pub accepted: bool,
}

/// Bilinear sample of `map` at `(x, y)`, available only when every pixel
/// with nonzero interpolation weight is valid.
#[inline]
pub(crate) fn sample_masked<T: Real>(map: &VesselnessMap<T>, x: T, y: T) -> Option<T> {
    let xf = x.floor();
    let yf = y.floor();
    if xf < T::zero() || yf < T::zero() {
        return None;
    }
    let (ix, iy) = (xf.to_usize()?, yf.to_usize()?);
    let (w, h) = map.dims();
    if ix >= w || iy >= h {
        return None;
    }
    let fx = x - xf;
    let fy = y - yf;
    let need_x = fx > T::zero();
    let need_y = fy > T::zero();
    if (need_x && ix + 1 >= w) || (need_y && iy + 1 >= h) {
        return None;
    }
    let ok = |dx: usize, dy: usize| map.valid.get(ix + dx, iy + dy);
    if !ok(0, 0) || (need_x && !ok(1, 0)) || (need_y && !ok(0, 1)) || (need_x && need_y && !ok(1, 1)) {
        return None;
    }
    let v = |dx: usize, dy: usize| {
        if (dx == 0 || need_x) && (dy == 0 || need_y) {
            map.get(ix + dx, iy + dy)
        } else {
            T::zero()
        }
    };
    let one = T::one();
    Some((v(0, 0) * (one - fx) + v(1, 0) * fx) * (one - fy) + (v(0, 1) * (one - fx) + v(1, 1) * fx) * fy)
}

/// Masked sums over the overlap of a warped map with a fixed one.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NccStats {
    pub n: f64,
    pub sa: f64,
    pub sb: f64,
    pub saa: f64,
    pub sbb: f64,
    pub sab: f64,
}

impl NccStats {
    pub fn score(&self) -> Option<f64> {
        score_from_sums(self.n, self.sa, self.sb, self.saa, self.sbb, self.sab)
    }
}

/// Zero-mean normalised correlation from raw sums; `None` when either signal
/// is numerically constant.
pub(crate) fn score_from_sums(n: f64, sa: f64, sb: f64, saa: f64, sbb: f64, sab: f64) -> Option<f64> {
    if n < 1.0 {
        return None;
    }
    let va = saa - sa * sa / n;
    let vb = sbb - sb * sb / n;
    let tol = 1e-8;
    if !(va > tol * saa.abs().max(f64::MIN_POSITIVE)) || !(vb > tol * sbb.abs().max(f64::MIN_POSITIVE)) {
        return None;
    }
    let cov = sab - sa * sb / n;
    Some((cov / (va * vb).sqrt()).clamp(-1.0, 1.0))
}

/// Sums over mosaic-grid pixels `q` valid in `b` whose preimage under
/// `transform` can be sampled from `a`.
pub fn ncc_stats<T: Real>(a: &VesselnessMap<T>, b: &VesselnessMap<T>, transform: &SimilarityTransform<T>) -> NccStats {
    let mut st = NccStats::default();
    let (wa, ha) = a.dims();
    let (wb, hb) = b.dims();
    let (x_lo, y_lo) = transform.apply(T::zero(), T::zero());
    let (x_hi, y_hi) = transform.apply(T::from_usize_lossy(wa - 1), T::from_usize_lossy(ha - 1));
    let range = |lo: T, hi: T, n: usize| -> Option<(usize, usize)> {
        let lo = lo.ceil().max(T::zero());
        let hi = hi.floor().min(T::from_usize_lossy(n) - T::one());
        if hi < lo {
            return None;
        }
        Some((lo.to_usize()?, hi.to_usize()?))
    };
    let (Some((qx0, qx1)), Some((qy0, qy1))) = (range(x_lo, x_hi, wb), range(y_lo, y_hi, hb)) else {
        return st;
    };
    for qy in qy0..=qy1 {
        for qx in qx0..=qx1 {
            if !b.valid.get(qx, qy) {
                continue;
            }
            let (x, y) = transform.apply_inverse(T::from_usize_lossy(qx), T::from_usize_lossy(qy));
            if let Some(av) = sample_masked(a, x, y) {
                let av = av.as_f64();
                let bv = b.get(qx, qy).as_f64();
                st.n += 1.0;
                st.sa += av;
                st.sb += bv;
                st.saa += av * av;
                st.sbb += bv * bv;
                st.sab += av * bv;
            }
        }
    }
    st
}

fn overlap_fraction<T: Real>(n: f64, a: &VesselnessMap<T>, scale: T) -> f64 {
    let s = scale.as_f64();
    n / (s * s * a.valid.count().max(1) as f64)
}

/// Correlation of `a`, warped by `transform` into `b`'s grid, with `b` over
/// the overlap of their valid regions.
pub fn ncc<T: Real>(
    a: &VesselnessMap<T>,
    b: &VesselnessMap<T>,
    transform: &SimilarityTransform<T>,
    min_overlap_fraction: f64,
) -> Result<T> {
    let st = ncc_stats(a, b, transform);
    let fraction = overlap_fraction(st.n, a, transform.scale);
    if st.n < 2.0 || fraction < min_overlap_fraction {
        return Err(Error::InsufficientOverlap { fraction });
    }
    st.score().map(T::lit).ok_or(Error::ZeroVariance)
}

/// Halves a map: 2x2 block means, a block is valid only when all four pixels are.
pub fn downsample<T: Real>(map: &VesselnessMap<T>) -> VesselnessMap<T> {
    let (w, h) = (map.width / 2, map.height / 2);
    let valid = BinaryMask::from_fn(w, h, |x, y| {
        map.valid.get(2 * x, 2 * y)
            && map.valid.get(2 * x + 1, 2 * y)
            && map.valid.get(2 * x, 2 * y + 1)
            && map.valid.get(2 * x + 1, 2 * y + 1)
    });
    let quarter = T::lit(0.25);
    let values = GrayImage::from_fn(w, h, |x, y| {
        (map.get(2 * x, 2 * y) + map.get(2 * x + 1, 2 * y) + map.get(2 * x, 2 * y + 1) + map.get(2 * x + 1, 2 * y + 1))
            * quarter
    });
    VesselnessMap::new(values, valid).expect("dimensions agree by construction")
}

/// Level 0 is the input; stops early once a level would drop below 8 pixels.
pub fn pyramid<T: Real>(map: &VesselnessMap<T>, levels: usize) -> Vec<VesselnessMap<T>> {
    let mut out = vec![map.clone()];
    while out.len() < levels {
        let last = out.last().unwrap();
        if last.width / 2 < 8 || last.height / 2 < 8 {
            break;
        }
        out.push(downsample(last));
    }
    out
}

fn evaluate<T: Real>(
    a: &VesselnessMap<T>,
    b: &VesselnessMap<T>,
    t: &SimilarityTransform<T>,
    min_overlap: f64,
) -> Option<f64> {
    ncc(a, b, t, min_overlap).ok().map(|s| s.as_f64())
}

/// Best of `candidates` by score; the earliest wins ties.
fn best_of<T: Real>(
    candidates: impl IntoIterator<Item = (SimilarityTransform<T>, Option<f64>)>,
) -> Option<(SimilarityTransform<T>, f64)> {
    let mut best: Option<(SimilarityTransform<T>, f64)> = None;
    for (t, s) in candidates {
        if let Some(s) = s {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((t, s));
            }
        }
    }
    best
}

/// Register `frame_v` against `mosaic_v`: the returned transform maps frame
/// coordinates into mosaic coordinates.
pub fn register<T: Real>(
    frame_v: &VesselnessMap<T>,
    mosaic_v: &VesselnessMap<T>,
    config: &SearchConfig,
) -> Result<RegistrationResult<T>> {
    config.validate()?;
    if frame_v.valid.is_empty() || mosaic_v.valid.is_empty() {
        return Err(Error::EmptyValidRegion);
    }
    let pa = pyramid(frame_v, config.pyramid_levels);
    let pb = pyramid(mosaic_v, config.pyramid_levels);
    let top = pa.len().min(pb.len()) - 1;
    let min_overlap = config.min_overlap_fraction;

    let hyps = coarse::scan(&pa[top], &pb[top], &config.coarse_scales(), min_overlap);
    let peak = hyps
        .iter()
        .copied()
        .reduce(|best, h| if h.score > best.score { h } else { best })
        .ok_or(Error::NoValidHypothesis)?;
    // Competing peaks are measured by where they place the frame centroid, so
    // that rescaled copies of the winning alignment are suppressed too.
    let (cx, cy) = valid_centroid(&pa[top]);
    let landing = |h: &coarse::Hypothesis| (h.scale * cx + h.tx as f64, h.scale * cy + h.ty as f64);
    let peak_at = landing(&peak);
    let second = hyps
        .iter()
        .filter(|h| {
            let (x, y) = landing(h);
            (x - peak_at.0).hypot(y - peak_at.1) > config.nms_radius
        })
        .map(|h| h.score)
        .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |a| a.max(s))));

    let coarse_best =
        SimilarityTransform::new(T::lit(peak.scale), T::lit(peak.tx as f64), T::lit(peak.ty as f64)).from_level(top);
    let mut carried = coarse_best;
    let mut finalists = vec![coarse_best];
    for level in (0..top).rev() {
        let delta = config.scale_step_coarse / (1u64 << (top - level)) as f64;
        let centre = carried.to_level(level);
        let pivot = valid_centroid(&pa[level]);
        let r = config.refine_radius as i64;
        let mut candidates = Vec::new();
        for ds in [0.0, -delta, delta] {
            let rescaled = rescale_about(&centre, config.clamp_scale(centre.scale + T::lit(ds)), pivot);
            for dy in -r..=r {
                for dx in -r..=r {
                    candidates.push(rescaled.translated(T::lit(dx as f64), T::lit(dy as f64)));
                }
            }
        }
        let scored = candidates.into_iter().map(|t| (t, evaluate(&pa[level], &pb[level], &t, min_overlap)));
        if let Some((t, _)) = best_of(scored) {
            carried = t.from_level(level);
            finalists.push(carried);
        }
    }

    let (a0, b0) = (&pa[0], &pb[0]);
    let scored = finalists.into_iter().map(|t| (t, evaluate(a0, b0, &t, min_overlap)));
    let (start, start_score) = best_of(scored).ok_or(Error::NoValidHypothesis)?;
    let (transform, score) = polish(a0, b0, start, start_score, config, top);

    let st = ncc_stats(a0, b0, &transform);
    let overlap = overlap_fraction(st.n, a0, transform.scale);
    let second_score = second.unwrap_or(-1.0);
    let accepted = overlap >= min_overlap && score >= config.ambiguity_factor * second_score.max(0.0);
    Ok(RegistrationResult {
        transform,
        score: T::lit(score),
        second_score: T::lit(second_score),
        overlap: T::lit(overlap),
        accepted,
    })
}

/// Mean position of the valid pixels.
fn valid_centroid<T: Real>(map: &VesselnessMap<T>) -> (f64, f64) {
    let (sx, sy, n) =
        map.valid.iter_set().fold((0.0, 0.0, 0usize), |(sx, sy, n), (x, y)| (sx + x as f64, sy + y as f64, n + 1));
    if n == 0 {
        return (0.0, 0.0);
    }
    (sx / n as f64, sy / n as f64)
}

/// Change the scale while keeping the image of `pivot` fixed. Scale and
/// translation are strongly coupled when the pivot is far from the origin;
/// rescaling about the frame centroid decouples them.
fn rescale_about<T: Real>(t: &SimilarityTransform<T>, scale: T, pivot: (f64, f64)) -> SimilarityTransform<T> {
    let ds = t.scale - scale;
    SimilarityTransform::new(scale, t.tx + ds * T::lit(pivot.0), t.ty + ds * T::lit(pivot.1))
}

/// Sub-pixel coordinate search around the refined optimum at full resolution,
/// with scale moves taken about the frame centroid. Only ever moves to a
/// strictly better score.
fn polish<T: Real>(
    a: &VesselnessMap<T>,
    b: &VesselnessMap<T>,
    start: SimilarityTransform<T>,
    start_score: f64,
    config: &SearchConfig,
    top: usize,
) -> (SimilarityTransform<T>, f64) {
    let (mut cur, mut cur_score) = (start, start_score);
    let pivot = valid_centroid(a);
    let mut step_t = 0.5;
    let mut step_s = config.scale_step_coarse / (1u64 << (top + 1)) as f64;
    for _ in 0..3 {
        for _ in 0..8 {
            let moves = [
                (0.0, step_t, 0.0),
                (0.0, -step_t, 0.0),
                (0.0, 0.0, step_t),
                (0.0, 0.0, -step_t),
                (step_s, 0.0, 0.0),
                (-step_s, 0.0, 0.0),
            ];
            let scored = moves.iter().map(|&(ds, dx, dy)| {
                let t = rescale_about(&cur, config.clamp_scale(cur.scale + T::lit(ds)), pivot)
                    .translated(T::lit(dx), T::lit(dy));
                (t, evaluate(a, b, &t, config.min_overlap_fraction))
            });
            match best_of(scored) {
                Some((t, s)) if s > cur_score => {
                    cur = t;
                    cur_score = s;
                }
                _ => break,
            }
        }
        step_t /= 2.0;
        step_s /= 2.0;
    }
    (cur, cur_score)
}
