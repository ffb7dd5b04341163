//! Synthetic fundus video with exact ground truth.
//!
//! A square retina (background, optic disc, branching vessel tree) is rendered
//! once; each frame then views it through a moving, slightly zooming
//! elliptical aperture with rim darkening, glare spots, blur and sensor noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::sample::{bilinear, gaussian_blur};
use crate::imgcore::{BinaryMask, Frame, GrayImage};
use crate::registration::SimilarityTransform;
use crate::roi::CanonicalEllipse;

/// Camera position over the retina: frame centre in retina pixels and zoom
/// (frame pixels per retina pixel).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    pub zoom: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomConfig {
    pub retina_size: usize,
    /// Number of independent vessel trees.
    pub vessel_branches: usize,
    pub frame_size: usize,
    /// Range of the aperture semi-axes, in frame pixels.
    pub roi_radius_range: [f64; 2],
    pub frame_count: usize,
    /// Piecewise-linear camera path, traversed at constant parameter speed.
    pub trajectory: Vec<Waypoint>,
    pub glare_blob_count: usize,
    pub glare_radius_range: [f64; 2],
    pub blur_frames: Vec<usize>,
    pub blur_sigma: f64,
    pub noise_sigma: f64,
    /// Frames replaced by uniform noise (robustness testing).
    pub noise_frames: Vec<usize>,
    pub seed: u64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self {
            retina_size: 512,
            vessel_branches: 24,
            frame_size: 160,
            roi_radius_range: [58.0, 72.0],
            frame_count: 60,
            trajectory: vec![
                Waypoint { x: 190.0, y: 190.0, zoom: 1.0 },
                Waypoint { x: 320.0, y: 195.0, zoom: 1.06 },
                Waypoint { x: 330.0, y: 320.0, zoom: 0.96 },
                Waypoint { x: 200.0, y: 315.0, zoom: 1.02 },
                Waypoint { x: 200.0, y: 205.0, zoom: 1.0 },
            ],
            glare_blob_count: 1,
            glare_radius_range: [6.0, 11.0],
            blur_frames: vec![0, 1, 2],
            blur_sigma: 3.0,
            noise_sigma: 2.0,
            noise_frames: Vec::new(),
            seed: 0,
        }
    }
}

impl PhantomConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(format!("phantom: {msg}")));
        if self.frame_size < 16 || self.frame_size >= self.retina_size {
            return fail("frame_size must be at least 16 and below retina_size");
        }
        let [lo, hi] = self.roi_radius_range;
        if !(lo > 0.0 && lo <= hi) {
            return fail("roi_radius_range must be positive and ordered");
        }
        let [glo, ghi] = self.glare_radius_range;
        if !(glo > 0.0 && glo <= ghi) {
            return fail("glare_radius_range must be positive and ordered");
        }
        if self.trajectory.is_empty() {
            return fail("trajectory needs at least one waypoint");
        }
        if self.trajectory.iter().any(|w| !(w.zoom > 0.0)) {
            return fail("waypoint zoom must be positive");
        }
        if !(self.noise_sigma >= 0.0) || !(self.blur_sigma >= 0.0) {
            return fail("noise_sigma and blur_sigma must be non-negative");
        }
        Ok(())
    }

    /// Camera position for frame `i`.
    pub fn waypoint_at(&self, i: usize) -> Waypoint {
        let path = &self.trajectory;
        if path.len() == 1 || self.frame_count <= 1 {
            return path[0];
        }
        let u = i as f64 / (self.frame_count - 1) as f64 * (path.len() - 1) as f64;
        let k = (u.floor() as usize).min(path.len() - 2);
        let f = u - k as f64;
        let (p, q) = (path[k], path[k + 1]);
        Waypoint { x: p.x + f * (q.x - p.x), y: p.y + f * (q.y - p.y), zoom: p.zoom + f * (q.zoom - p.zoom) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameTruth {
    /// Aperture in frame coordinates.
    pub roi: CanonicalEllipse<f64>,
    /// Frame coordinates to retina coordinates.
    pub transform: SimilarityTransform<f64>,
    pub glare: BinaryMask,
    /// Uniform-noise frame with no retinal content.
    pub is_noise: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub retina: Frame,
    pub vessel_mask: BinaryMask,
    pub frames: Vec<FrameTruth>,
}

const BACKGROUND: [f64; 3] = [200.0, 100.0, 45.0];
const VESSEL: [f64; 3] = [200.0, 66.0, 40.0];
const DISC: [f64; 3] = [235.0, 170.0, 110.0];

/// Brightness factor at normalised aperture radius `rho`: one at the centre,
/// 0.45 on the rim.
pub fn rim_darkening(rho: f64) -> f64 {
    0.45 + 0.55 * (std::f64::consts::FRAC_PI_2 * rho.clamp(0.0, 1.0)).cos()
}

struct Segment {
    a: [f64; 2],
    b: [f64; 2],
    half_width: f64,
}

fn grow_vessels(rng: &mut ChaCha8Rng, size: f64, disc: [f64; 2], trees: usize) -> Vec<Segment> {
    let mut segments = Vec::new();
    let turn = Normal::new(0.0, 0.12).expect("valid sigma");
    // (position, heading, width, remaining steps)
    let mut stack: Vec<([f64; 2], f64, f64, usize)> = Vec::new();
    for t in 0..trees {
        let start = if t % 2 == 0 {
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            [disc[0] + 18.0 * a.cos(), disc[1] + 18.0 * a.sin()]
        } else {
            [rng.random_range(0.15..0.85) * size, rng.random_range(0.15..0.85) * size]
        };
        let heading = rng.random_range(0.0..std::f64::consts::TAU);
        stack.push((start, heading, rng.random_range(4.5..6.0), 110));
    }
    while let Some((mut p, mut heading, width, mut steps)) = stack.pop() {
        while steps > 0 {
            heading += turn.sample(rng);
            let step = 3.0;
            let q = [p[0] + step * heading.cos(), p[1] + step * heading.sin()];
            segments.push(Segment { a: p, b: q, half_width: width / 2.0 });
            p = q;
            steps -= 1;
            if !(0.0..size).contains(&p[0]) || !(0.0..size).contains(&p[1]) {
                break;
            }
            if width > 2.4 && rng.random_bool(0.02) {
                let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let child_heading = heading + side * rng.random_range(0.4..0.9);
                stack.push((p, child_heading, (width * 0.75).max(2.0), steps.min(70)));
                heading -= side * 0.15;
            }
        }
    }
    segments
}

fn render_retina(config: &PhantomConfig, rng: &mut ChaCha8Rng) -> (Frame, BinaryMask, Vec<[f64; 3]>) {
    let n = config.retina_size;
    let size = n as f64;
    let disc = [size * rng.random_range(0.4..0.6), size * rng.random_range(0.4..0.6)];
    let segments = grow_vessels(rng, size, disc, config.vessel_branches);

    // Distance from each pixel to the nearest vessel centreline, relative to its half-width.
    let mut depth = vec![0.0f64; n * n];
    for s in &segments {
        let r = s.half_width + 1.5;
        let x0 = (s.a[0].min(s.b[0]) - r).floor().max(0.0) as usize;
        let x1 = ((s.a[0].max(s.b[0]) + r).ceil().max(0.0) as usize).min(n - 1);
        let y0 = (s.a[1].min(s.b[1]) - r).floor().max(0.0) as usize;
        let y1 = ((s.a[1].max(s.b[1]) + r).ceil().max(0.0) as usize).min(n - 1);
        let (dx, dy) = (s.b[0] - s.a[0], s.b[1] - s.a[1]);
        let len2 = dx * dx + dy * dy;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let (px, py) = (x as f64 - s.a[0], y as f64 - s.a[1]);
                let t = ((px * dx + py * dy) / len2).clamp(0.0, 1.0);
                let d = (px - t * dx).hypot(py - t * dy);
                // Smooth cross-section: full contrast inside, soft one-pixel edge.
                let v = (s.half_width + 0.5 - d).clamp(0.0, 1.0);
                let i = y * n + x;
                depth[i] = depth[i].max(v);
            }
        }
    }

    // Gentle low-frequency shading.
    let phase: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.0..std::f64::consts::TAU));
    let mut colors = vec![[0.0; 3]; n * n];
    for y in 0..n {
        for x in 0..n {
            let (fx, fy) = (x as f64, y as f64);
            let shade = 1.0
                + 0.03 * (fx / 61.0 + phase[0]).sin() * (fy / 47.0 + phase[1]).cos()
                + 0.02 * (fx / 23.0 + fy / 31.0 + phase[2]).sin();
            let rd = (fx - disc[0]).hypot((fy - disc[1]) * 1.1) / 20.0;
            let disc_w = (1.0 - (rd - 0.8) / 0.4).clamp(0.0, 1.0);
            let v = depth[y * n + x];
            colors[y * n + x] = std::array::from_fn(|c| {
                let base = BACKGROUND[c] * shade * (1.0 - disc_w) + DISC[c] * disc_w;
                base * (1.0 - v) + VESSEL[c] * v
            });
        }
    }
    let retina = Frame::new(n, n, colors.iter().map(|c| c.map(|v| v.round().clamp(0.0, 255.0) as u8)).collect(), 0)
        .expect("retina dimensions are valid");
    let vessel_mask = BinaryMask { width: n, height: n, bits: depth.iter().map(|&v| v >= 0.5).collect() };
    (retina, vessel_mask, colors)
}

/// Render the frame sequence and its ground truth. Deterministic in `config.seed`.
pub fn generate(config: &PhantomConfig) -> Result<(Vec<Frame>, GroundTruth)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (retina, vessel_mask, colors) = render_retina(config, &mut rng);
    let n = config.retina_size;
    let channels: [Vec<f64>; 3] = std::array::from_fn(|c| colors.iter().map(|p| p[c]).collect());
    let fs = config.frame_size;
    let centre = (fs as f64 - 1.0) / 2.0;
    let noise = Normal::new(0.0, config.noise_sigma.max(f64::MIN_POSITIVE)).expect("valid sigma");

    let mut frames = Vec::with_capacity(config.frame_count);
    let mut truths = Vec::with_capacity(config.frame_count);
    for i in 0..config.frame_count {
        let wp = config.waypoint_at(i);
        let scale = 1.0 / wp.zoom;
        let transform = SimilarityTransform::new(scale, wp.x - centre * scale, wp.y - centre * scale);
        let [lo, hi] = config.roi_radius_range;
        let roi = CanonicalEllipse::new(
            rng.random_range(lo..=hi),
            rng.random_range(lo..=hi),
            centre + rng.random_range(-4.0..4.0),
            centre + rng.random_range(-4.0..4.0),
            rng.random_range(0.0..std::f64::consts::PI),
        );
        let inside = BinaryMask::from_fn(fs, fs, |x, y| roi.radial(x as f64, y as f64) < 1.0);

        let mut glare = BinaryMask::new(fs, fs);
        for _ in 0..config.glare_blob_count {
            let r = rng.random_range(config.glare_radius_range[0]..=config.glare_radius_range[1]);
            let t = rng.random_range(0.0..std::f64::consts::TAU);
            let rho = rng.random_range(0.0..0.6);
            let [gx, gy] = roi.point_at(t);
            let (cx, cy) = (roi.x0 + rho * (gx - roi.x0), roi.y0 + rho * (gy - roi.y0));
            for y in 0..fs {
                for x in 0..fs {
                    if (x as f64 - cx).hypot(y as f64 - cy) <= r && inside.get(x, y) {
                        glare.set(x, y, true);
                    }
                }
            }
        }

        // Defocus blurs the retinal image only; the aperture outline and the
        // corneal glare stay sharp.
        let blurred = config.blur_frames.contains(&i) && config.blur_sigma > 0.0;
        let planes: [GrayImage<f64>; 3] = std::array::from_fn(|c| {
            let content = GrayImage::from_fn(fs, fs, |x, y| {
                let (u, v) = transform.apply(x as f64, y as f64);
                let inside_retina = u >= 0.0 && v >= 0.0 && u <= (n - 1) as f64 && v <= (n - 1) as f64;
                if inside_retina {
                    bilinear(&channels[c], n, n, u, v)
                } else {
                    0.0
                }
            });
            let content = if blurred { gaussian_blur(&content, config.blur_sigma) } else { content };
            GrayImage::from_fn(fs, fs, |x, y| {
                if !inside.get(x, y) {
                    5.0
                } else if glare.get(x, y) {
                    255.0
                } else {
                    content.get(x, y) * rim_darkening(roi.radial(x as f64, y as f64))
                }
            })
        });
        let is_noise = config.noise_frames.contains(&i);
        let mut rgb = Vec::with_capacity(fs * fs);
        for k in 0..fs * fs {
            let px: [u8; 3] = if is_noise {
                std::array::from_fn(|_| rng.random_range(0..=255u8))
            } else {
                std::array::from_fn(|c| {
                    let jitter = if config.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                    (planes[c].values[k] + jitter).round().clamp(0.0, 255.0) as u8
                })
            };
            rgb.push(px);
        }
        frames.push(Frame::new(fs, fs, rgb, i)?);
        let glare = if is_noise { BinaryMask::new(fs, fs) } else { glare };
        truths.push(FrameTruth { roi, transform, glare, is_noise });
    }
    Ok((frames, GroundTruth { retina, vessel_mask, frames: truths }))
}
