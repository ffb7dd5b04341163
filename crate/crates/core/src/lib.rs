//! Wide-field retinal mosaics from narrow-field ophthalmoscope video.
//!
//! Each frame is reduced to an aperture ellipse, a glare mask and a vesselness
//! map; frames are then registered to a growing mosaic by correlating vessel
//! maps and blended with distance-based weights. The numeric code is generic
//! over [`Real`]; the aliases below fix it to `f32` or `f64`.

// Parameter checks use `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Small dense solvers read better with explicit row and column indices.
#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod glare;
pub mod imgcore;
pub mod io;
pub mod phantom;
pub mod pipeline;
pub mod real;
pub mod registration;
pub mod roi;
pub mod stitcher;
pub mod vesselness;

pub use error::{Error, Result};
pub use real::Real;

pub type GrayImageF32 = imgcore::GrayImage<f32>;
pub type GrayImageF64 = imgcore::GrayImage<f64>;
pub type DistanceMapF32 = imgcore::DistanceMap<f32>;
pub type DistanceMapF64 = imgcore::DistanceMap<f64>;
pub type EllipseF32 = roi::CanonicalEllipse<f32>;
pub type EllipseF64 = roi::CanonicalEllipse<f64>;
pub type VesselnessMapF32 = vesselness::VesselnessMap<f32>;
pub type VesselnessMapF64 = vesselness::VesselnessMap<f64>;
pub type TransformF32 = registration::SimilarityTransform<f32>;
pub type TransformF64 = registration::SimilarityTransform<f64>;
pub type MosaicF32 = stitcher::MosaicState<f32>;
pub type MosaicF64 = stitcher::MosaicState<f64>;
pub type PipelineOutputF32 = pipeline::PipelineOutput<f32>;
pub type PipelineOutputF64 = pipeline::PipelineOutput<f64>;
