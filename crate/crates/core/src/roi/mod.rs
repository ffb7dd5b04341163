//! Elliptical region-of-interest detection.

mod conic;
mod ga;

pub use conic::{
    canonical_from_conic, conic_from_points, sample_circumference, wrap_angle, CanonicalEllipse, ConicCoeffs,
};
pub use ga::{fit_ellipse_ga, fitness, Chromosome, GaConfig, GaFit};

use crate::error::Result;
use crate::imgcore::{binarize, contour, largest_component, otsu_threshold, to_grayscale, BinaryMask, Frame};
use crate::real::Real;

#[derive(Debug, Clone)]
pub struct RoiResult<T: Real> {
    pub ellipse: CanonicalEllipse<T>,
    pub conic: ConicCoeffs<T>,
    pub fitness: T,
    pub mask: BinaryMask,
    /// Share of the mask covered by the thresholded foreground.
    pub support: T,
}

/// Pixels strictly inside the conic.
pub fn render_mask<T: Real>(conic: &ConicCoeffs<T>, width: usize, height: usize) -> BinaryMask {
    BinaryMask::from_fn(width, height, |x, y| {
        conic.evaluate(T::from_usize_lossy(x), T::from_usize_lossy(y)) < T::zero()
    })
}

/// Otsu foreground, largest blob, its contour, then a genetic ellipse fit.
pub fn detect_roi<T: Real>(frame: &Frame, ga: &GaConfig) -> Result<RoiResult<T>> {
    let gray = to_grayscale::<T>(frame);
    let t = otsu_threshold(&gray)?;
    let foreground = binarize(&gray, T::lit(t as f64));
    let blob = largest_component(&foreground)?;
    let edges = contour(&blob)?;
    let fit = fit_ellipse_ga::<T>(&edges, ga)?;
    let ellipse = canonical_from_conic(&fit.conic)?;
    let (w, h) = frame.dims();
    let mask = render_mask(&fit.conic, w, h);
    let inside = mask.count();
    let support = if inside == 0 {
        T::zero()
    } else {
        T::from_usize_lossy(mask.and(&foreground).count()) / T::from_usize_lossy(inside)
    };
    Ok(RoiResult { ellipse, conic: fit.conic, fitness: fit.fitness, mask, support })
}
