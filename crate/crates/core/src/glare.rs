//! Specular glare detection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{asf, check_dims, remove_small_components, BinaryMask, Frame, GrayImage};
use crate::real::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlareConfig {
    /// Threshold on the smoothed glare measure (8-bit scale).
    pub threshold: f64,
    pub asf_radii: Vec<usize>,
    pub min_blob_area: usize,
}

impl Default for GlareConfig {
    fn default() -> Self {
        Self { threshold: 200.0, asf_radii: vec![1, 2, 3], min_blob_area: 9 }
    }
}

impl GlareConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) {
            return Err(Error::InvalidConfig("glare: threshold must be positive".into()));
        }
        if self.asf_radii.contains(&0) || self.asf_radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("glare: asf_radii must be positive and strictly increasing".into()));
        }
        Ok(())
    }
}

/// `min(R,G,B) - min/max`: high for bright, unsaturated (whitish) pixels.
/// Black pixels map to zero.
pub fn glare_value<T: Real>(rgb: [u8; 3]) -> T {
    let lo = rgb.iter().copied().min().unwrap_or(0);
    let hi = rgb.iter().copied().max().unwrap_or(0);
    if hi == 0 {
        return T::zero();
    }
    let lo = T::lit(lo as f64);
    lo - lo / T::lit(hi as f64)
}

pub fn glare_measure<T: Real>(frame: &Frame) -> GrayImage<T> {
    GrayImage {
        width: frame.width(),
        height: frame.height(),
        values: frame.pixels().iter().map(|&p| glare_value(p)).collect(),
    }
}

/// Smoothed glare measure above `threshold`, restricted to `roi`, with small
/// blobs removed.
pub fn detect_glare(frame: &Frame, roi: &BinaryMask, config: &GlareConfig) -> Result<BinaryMask> {
    check_dims(frame.dims(), roi.dims())?;
    let smoothed = asf(&glare_measure::<f64>(frame), &config.asf_radii);
    let raw = BinaryMask::from_fn(frame.width(), frame.height(), |x, y| {
        roi.get(x, y) && smoothed.get(x, y) > config.threshold
    });
    Ok(remove_small_components(&raw, config.min_blob_area))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame_with_disc(cx: f64, cy: f64, r: f64) -> Frame {
        Frame::from_fn(64, 64, 0, |x, y| {
            if (x as f64 - cx).hypot(y as f64 - cy) <= r {
                [255, 255, 255]
            } else {
                [190, 100, 50]
            }
        })
        .unwrap()
    }

    #[test]
    fn measure_examples() {
        assert_eq!(glare_value::<f64>([255, 255, 255]), 254.0);
        assert_eq!(glare_value::<f64>([0, 0, 0]), 0.0);
        assert_eq!(glare_value::<f64>([200, 100, 50]), 49.75);
    }

    #[test]
    fn saturated_disc_detected() {
        let f = frame_with_disc(30.0, 34.0, 7.0);
        let roi = BinaryMask::full(64, 64);
        let m = detect_glare(&f, &roi, &GlareConfig::default()).unwrap();
        let truth = BinaryMask::from_fn(64, 64, |x, y| f.pixel(x, y) == [255, 255, 255]);
        let tp = m.and(&truth).count() as f64;
        assert!(tp / truth.count() as f64 >= 0.9);
        assert!(tp / m.count() as f64 >= 0.8);
    }

    #[test]
    fn dim_frame_has_no_glare() {
        let f = Frame::from_fn(40, 40, 0, |x, y| [200, (x * 5) as u8, (y * 5) as u8]).unwrap();
        let cfg = GlareConfig { threshold: 230.0, ..GlareConfig::default() };
        assert!(detect_glare(&f, &BinaryMask::full(40, 40), &cfg).unwrap().is_empty());
    }

    #[test]
    fn isolated_pixel_removed() {
        let mut f = Frame::filled(32, 32, [120, 60, 30], 0).unwrap();
        *f.pixel_mut(16, 16) = [255, 255, 255];
        assert!(detect_glare(&f, &BinaryMask::full(32, 32), &GlareConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn mask_is_clipped_to_roi() {
        let f = frame_with_disc(30.0, 30.0, 10.0);
        let roi = BinaryMask::from_fn(64, 64, |x, _| x < 30);
        let m = detect_glare(&f, &roi, &GlareConfig::default()).unwrap();
        assert!(!m.is_empty());
        assert!(m.is_subset_of(&roi));
    }

    #[test]
    fn mismatched_roi_rejected() {
        let f = frame_with_disc(30.0, 30.0, 10.0);
        assert!(detect_glare(&f, &BinaryMask::full(20, 20), &GlareConfig::default()).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(GlareConfig::default().validate().is_ok());
        assert!(GlareConfig { threshold: 0.0, ..GlareConfig::default() }.validate().is_err());
        assert!(GlareConfig { asf_radii: vec![2, 1], ..GlareConfig::default() }.validate().is_err());
    }

    proptest! {
        #[test]
        fn measure_bounded(r in any::<u8>(), g in any::<u8>(), b in any::<u8>()) {
            let v = glare_value::<f64>([r, g, b]);
            prop_assert!((0.0..=255.0).contains(&v));
            prop_assert!(v <= r.min(g).min(b) as f64);
        }

        #[test]
        fn measure_monotone_under_scaling(r in 1u8..=85, g in 1u8..=85, b in 1u8..=85, k in 2u8..=3) {
            let scaled = [r * k, g * k, b * k];
            prop_assert!(glare_value::<f64>(scaled) >= glare_value::<f64>([r, g, b]));
        }

        #[test]
        fn threshold_monotone(seed in 0u64..1000, t1 in 50.0f64..250.0, dt in 0.0f64..50.0) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let f = Frame::from_fn(24, 24, 0, |_, _| {
                let v = rng.random_range(150..=255u8);
                [v, v, rng.random_range(150..=255u8)]
            }).unwrap();
            let roi = BinaryMask::from_fn(24, 24, |x, y| x + y > 6);
            let cfg = |t| GlareConfig { threshold: t, ..GlareConfig::default() };
            let lo = detect_glare(&f, &roi, &cfg(t1)).unwrap();
            let hi = detect_glare(&f, &roi, &cfg(t1 + dt)).unwrap();
            prop_assert!(hi.is_subset_of(&lo));
            prop_assert!(lo.is_subset_of(&roi));
        }
    }
}
