//! End-to-end run: per-frame analysis, start-frame choice, then forward and
//! backward tracking against the growing mosaic.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glare::{detect_glare, GlareConfig};
use crate::imgcore::{chamfer_distance, BinaryMask, DistanceMap, Frame};
use crate::real::Real;
use crate::registration::{register, SearchConfig, SimilarityTransform};
use crate::roi::{detect_roi, CanonicalEllipse, GaConfig, RoiResult};
use crate::stitcher::{
    estimate_vignetting, flatten_vignetting, frame_weights, illumination_gain, pool_vignetting, MosaicState,
    RadialProfile, StitchConfig,
};
use crate::vesselness::{entropy_score, fill_outside, select_start_frame, vesselness, FrangiConfig, VesselnessMap};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub ga: GaConfig,
    pub glare: GlareConfig,
    pub frangi: FrangiConfig,
    pub search: SearchConfig,
    pub stitch: StitchConfig,
    /// A frame is registered only if its entropy reaches this fraction of the
    /// start frame's.
    pub quality_gate_fraction: f64,
    /// Band (pixels) around the ROI rim and glare excluded from the
    /// vesselness map, where the fit boundary would read as a ridge.
    pub analysis_margin: f64,
    /// Minimum share of the fitted ROI that must be thresholded foreground
    /// for a frame to be chosen as the start frame.
    pub min_start_support: f64,
    /// Divide out each frame's radial brightness falloff before blending.
    pub flatten_illumination: bool,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            ga: GaConfig::default(),
            glare: GlareConfig::default(),
            frangi: FrangiConfig::default(),
            search: SearchConfig::default(),
            stitch: StitchConfig::default(),
            quality_gate_fraction: 0.3,
            analysis_margin: 3.0,
            min_start_support: 0.75,
            flatten_illumination: true,
            seed: 0,
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        self.ga.validate()?;
        self.glare.validate()?;
        self.frangi.validate()?;
        self.search.validate()?;
        self.stitch.validate()?;
        if !(0.0..=1.0).contains(&self.quality_gate_fraction) {
            return Err(Error::InvalidConfig("quality_gate_fraction must lie in [0, 1]".into()));
        }
        if !(self.analysis_margin >= 0.0) {
            return Err(Error::InvalidConfig("analysis_margin must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.min_start_support) {
            return Err(Error::InvalidConfig("min_start_support must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameStatus {
    Used,
    RejectedRoi,
    RejectedQuality,
    RejectedRegistration,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub index: usize,
    pub status: FrameStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entropy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roi: Option<CanonicalEllipse<f64>>,
    /// Frame to start-frame coordinates.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transform: Option<SimilarityTransform<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub second_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl FrameReport {
    fn new(index: usize, status: FrameStatus) -> Self {
        Self {
            index,
            status,
            entropy: None,
            roi: None,
            transform: None,
            score: None,
            second_score: None,
            message: None,
        }
    }
}

/// Everything extracted from one frame before tracking.
#[derive(Debug, Clone)]
pub struct FrameAnalysis<T: Real> {
    pub roi: RoiResult<T>,
    pub glare: BinaryMask,
    pub vessels: VesselnessMap<T>,
    pub entropy: T,
    pub weights: DistanceMap<T>,
    /// This frame's own falloff estimate; flat when flattening is off.
    pub vignetting: RadialProfile,
}

/// Why a frame could not be analysed.
#[derive(Debug)]
pub struct FrameFailure {
    pub status: FrameStatus,
    pub error: Error,
}

/// FNV-1a over the run seed and the frame's pixels: a per-frame GA seed that
/// does not depend on the frame's position in the sequence.
pub fn frame_seed(run_seed: u64, frame: &Frame) -> u64 {
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |b: u8| {
        h ^= b as u64;
        h = h.wrapping_mul(PRIME);
    };
    run_seed.to_le_bytes().into_iter().for_each(&mut eat);
    (frame.width() as u64).to_le_bytes().into_iter().for_each(&mut eat);
    (frame.height() as u64).to_le_bytes().into_iter().for_each(&mut eat);
    frame.pixels().iter().flatten().copied().for_each(eat);
    h
}

/// GA settings for one frame, seeded from the run seed and the frame content.
pub fn frame_ga_config(frame: &Frame, config: &Config) -> GaConfig {
    GaConfig { seed: frame_seed(config.seed ^ config.ga.seed, frame), ..config.ga.clone() }
}

/// `mask` without the pixels within `margin` of its outside.
fn shrink(mask: &BinaryMask, margin: f64) -> BinaryMask {
    let d = chamfer_distance::<f64>(mask);
    BinaryMask::from_fn(mask.width, mask.height, |x, y| d.get(x, y) > margin)
}

/// `mask` plus every pixel within `margin` of it.
fn grow(mask: &BinaryMask, margin: f64) -> BinaryMask {
    let outside = BinaryMask { width: mask.width, height: mask.height, bits: mask.bits.iter().map(|b| !b).collect() };
    let d = chamfer_distance::<f64>(&outside);
    BinaryMask::from_fn(mask.width, mask.height, |x, y| mask.get(x, y) || d.get(x, y) <= margin)
}

/// ROI, glare, vesselness and entropy of one frame.
///
/// Vesselness runs on the green channel (vessels are dark ridges there) with
/// the area outside the shrunken ROI and grown glare mask smoothly filled.
pub fn analyze_frame<T: Real>(frame: &Frame, config: &Config) -> std::result::Result<FrameAnalysis<T>, FrameFailure> {
    let fail = |status| move |error| FrameFailure { status, error };
    let roi = detect_roi::<T>(frame, &frame_ga_config(frame, config)).map_err(fail(FrameStatus::RejectedRoi))?;
    let glare = detect_glare(frame, &roi.mask, &config.glare).map_err(fail(FrameStatus::Error))?;
    let weights = frame_weights::<T>(&roi.mask, &glare).map_err(fail(FrameStatus::Error))?;
    let valid = shrink(&roi.mask, config.analysis_margin).and_not(&grow(&glare, config.analysis_margin));
    if valid.is_empty() {
        return Err(FrameFailure { status: FrameStatus::RejectedQuality, error: Error::EmptyValidRegion });
    }
    // Without flattening, the dark rim trough reads as a ring-shaped ridge
    // that differs from frame to frame and biases the scale estimate.
    let (vignetting, green) = if config.flatten_illumination {
        let profile = estimate_vignetting(frame, &roi.ellipse, &valid);
        (profile, flatten_vignetting(frame, &roi.ellipse, &profile).channel::<T>(1))
    } else {
        (RadialProfile::FLAT, frame.channel::<T>(1))
    };
    let filled = fill_outside(&green, &valid).map_err(fail(FrameStatus::RejectedQuality))?;
    let vessels = vesselness(&filled, &valid, &config.frangi).map_err(fail(FrameStatus::Error))?;
    let entropy = entropy_score(&vessels).map_err(fail(FrameStatus::RejectedQuality))?;
    Ok(FrameAnalysis { roi, glare, vessels, entropy, weights, vignetting })
}

#[derive(Debug, Clone)]
pub struct PipelineOutput<T: Real> {
    pub mosaic: MosaicState<T>,
    pub reports: Vec<FrameReport>,
    pub start_index: usize,
    pub analyses: Vec<Option<FrameAnalysis<T>>>,
}

/// The serialised run report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub start_index: usize,
    pub config: Config,
    pub frames: Vec<FrameReport>,
}

impl<T: Real> PipelineOutput<T> {
    pub fn report(&self, config: &Config) -> RunReport {
        RunReport {
            version: VERSION.to_string(),
            start_index: self.start_index,
            config: config.clone(),
            frames: self.reports.clone(),
        }
    }
}

/// Stitch an ordered frame sequence into one mosaic.
pub fn run<T: Real>(frames: &[Frame], config: &Config) -> Result<PipelineOutput<T>> {
    config.validate()?;
    if frames.is_empty() {
        return Err(Error::NoUsableFrames);
    }
    let results: Vec<_> = frames.par_iter().map(|f| analyze_frame::<T>(f, config)).collect();

    let mut reports: Vec<FrameReport> = (0..frames.len()).map(|i| FrameReport::new(i, FrameStatus::Error)).collect();
    let mut analyses = Vec::with_capacity(frames.len());
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(a) => {
                reports[i].entropy = Some(a.entropy.as_f64());
                reports[i].roi = Some(a.roi.ellipse.cast());
                analyses.push(Some(a));
            }
            Err(failure) => {
                reports[i].status = failure.status;
                reports[i].message = Some(failure.error.to_string());
                analyses.push(None);
            }
        }
    }

    let scores: Vec<T> = analyses.iter().map(|a| a.as_ref().map_or(T::zero(), |a| a.entropy)).collect();
    let eligible: Vec<bool> = analyses
        .iter()
        .map(|a| a.as_ref().is_some_and(|a| a.roi.support.as_f64() >= config.min_start_support))
        .collect();
    let start = select_start_frame(&scores, &eligible)?;
    let first = analyses[start].as_ref().expect("eligible frames are analysed");
    let mut mosaic = MosaicState::start(&frames[start], &first.vessels, &first.weights, &config.stitch)?;
    let start_entropy = first.entropy.as_f64();
    reports[start].status = FrameStatus::Used;
    reports[start].transform = Some(SimilarityTransform::identity());
    reports[start].score = Some(1.0);
    let mut used = vec![(start, SimilarityTransform::identity())];

    let order = (start + 1..frames.len()).chain((0..start).rev());
    for i in order {
        let Some(a) = analyses[i].as_ref() else { continue };
        let report = &mut reports[i];
        if a.entropy.as_f64() < config.quality_gate_fraction * start_entropy {
            report.status = FrameStatus::RejectedQuality;
            report.message = Some("entropy below the quality gate".into());
            continue;
        }
        let result = match register(&a.vessels, &mosaic.vessel_fused, &config.search) {
            Ok(r) => r,
            Err(e) => {
                report.status = FrameStatus::RejectedRegistration;
                report.message = Some(e.to_string());
                continue;
            }
        };
        report.score = Some(result.score.as_f64());
        report.second_score = Some(result.second_score.as_f64());
        if !result.accepted {
            report.status = FrameStatus::RejectedRegistration;
            report.message = Some("ambiguous or insufficient match".into());
            continue;
        }
        let overlap = mosaic.overlap_mask(&a.weights, &result.transform);
        let gain = match illumination_gain(&frames[i], &mosaic, &result.transform, &overlap) {
            Ok(g) => g,
            Err(e) => {
                report.status = FrameStatus::RejectedRegistration;
                report.message = Some(e.to_string());
                continue;
            }
        };
        let anchored = mosaic.to_anchor(&result.transform);
        report.transform = Some(anchored.cast());
        used.push((i, anchored));
        mosaic.blend(&frames[i], &a.vessels, &a.weights, &result.transform, gain)?;
        report.status = FrameStatus::Used;
        log::debug!("frame {i}: score {:.3} second {:.3}", result.score.as_f64(), result.second_score.as_f64());
    }

    if config.flatten_illumination {
        mosaic = recomposite(frames, &analyses, &used, config)?;
    }
    Ok(PipelineOutput { mosaic, reports, start_index: start, analyses })
}

/// Rebuild the mosaic from the used frames, in tracking order, with colour
/// flattened by the falloff pooled over those frames. Geometry and vessel
/// accumulators come out identical to the tracking pass.
fn recomposite<T: Real>(
    frames: &[Frame],
    analyses: &[Option<FrameAnalysis<T>>],
    used: &[(usize, SimilarityTransform<T>)],
    config: &Config,
) -> Result<MosaicState<T>> {
    let analysis = |i: usize| analyses[i].as_ref().expect("used frames are analysed");
    let profiles: Vec<RadialProfile> = used.iter().map(|&(i, _)| analysis(i).vignetting).collect();
    let profile = pool_vignetting(&profiles);
    let flat = |i: usize| flatten_vignetting(&frames[i], &analysis(i).roi.ellipse, &profile);
    let (start, _) = used[0];
    let first = analysis(start);
    let mut mosaic = MosaicState::start(&flat(start), &first.vessels, &first.weights, &config.stitch)?;
    for &(i, anchored) in &used[1..] {
        let a = analysis(i);
        let color = flat(i);
        let transform = mosaic.from_anchor(&anchored);
        let overlap = mosaic.overlap_mask(&a.weights, &transform);
        let gain = illumination_gain(&color, &mosaic, &transform, &overlap).unwrap_or([T::one(); 3]);
        mosaic.blend(&color, &a.vessels, &a.weights, &transform, gain)?;
    }
    Ok(mosaic)
}
