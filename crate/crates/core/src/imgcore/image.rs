use crate::error::{Error, Result};
use crate::real::Real;

/// Smallest frame edge accepted by the pipeline.
pub const MIN_FRAME_EDGE: usize = 16;

/// One RGB video frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    rgb: Vec<[u8; 3]>,
    /// Ordinal position in the source video.
    pub index: usize,
}

impl Frame {
    pub fn new(width: usize, height: usize, rgb: Vec<[u8; 3]>, index: usize) -> Result<Self> {
        if width < MIN_FRAME_EDGE || height < MIN_FRAME_EDGE {
            return Err(Error::InvalidFrame(format!(
                "frame is {width}x{height}, minimum is {MIN_FRAME_EDGE}x{MIN_FRAME_EDGE}"
            )));
        }
        if rgb.len() != width * height {
            return Err(Error::InvalidFrame(format!(
                "pixel buffer holds {} pixels, expected {}",
                rgb.len(),
                width * height
            )));
        }
        Ok(Self { width, height, rgb, index })
    }

    /// Frame filled with a single colour.
    pub fn filled(width: usize, height: usize, color: [u8; 3], index: usize) -> Result<Self> {
        Self::new(width, height, vec![color; width * height], index)
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        index: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Result<Self> {
        let mut rgb = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                rgb.push(f(x, y));
            }
        }
        Self::new(width, height, rgb, index)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        self.rgb[y * self.width + x]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [u8; 3] {
        &mut self.rgb[y * self.width + x]
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.rgb
    }

    /// Single colour channel as a real-valued image (0 = R, 1 = G, 2 = B).
    pub fn channel<T: Real>(&self, channel: usize) -> GrayImage<T> {
        let values = self.rgb.iter().map(|p| T::lit(p[channel] as f64)).collect();
        GrayImage { width: self.width, height: self.height, values }
    }
}

/// Real-valued single channel image.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage<T> {
    pub width: usize,
    pub height: usize,
    pub values: Vec<T>,
}

impl<T: Real> GrayImage<T> {
    pub fn new(width: usize, height: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::DimensionMismatch { expected: (width, height), got: (values.len(), 1) });
        }
        Ok(Self { width, height, values })
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self { width, height, values: vec![value; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self { width, height, values }
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        self.values[y * self.width + x] = v;
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { width: self.width, height: self.height, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn min_max(&self) -> (T, T) {
        self.values.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// Per-pixel boolean annotation of an image.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![false; width * height] }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![true; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// Bounds-checked lookup; anything outside the image reads as unset.
    #[inline]
    pub fn get_signed(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.bits[y as usize * self.width + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn and(&self, other: &BinaryMask) -> BinaryMask {
        debug_assert_eq!(self.dims(), other.dims());
        let bits = self.bits.iter().zip(&other.bits).map(|(&a, &b)| a && b).collect();
        BinaryMask { width: self.width, height: self.height, bits }
    }

    pub fn and_not(&self, other: &BinaryMask) -> BinaryMask {
        debug_assert_eq!(self.dims(), other.dims());
        let bits = self.bits.iter().zip(&other.bits).map(|(&a, &b)| a && !b).collect();
        BinaryMask { width: self.width, height: self.height, bits }
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dims() == other.dims() && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// Set pixels in row-major order.
    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(move |(i, _)| (i % w, i / w))
    }

    /// Dilation with the 3x3 square.
    pub fn dilate3(&self) -> BinaryMask {
        let (w, h) = self.dims();
        BinaryMask::from_fn(w, h, |x, y| {
            let (x, y) = (x as isize, y as isize);
            (-1..=1).any(|dy| (-1..=1).any(|dx| self.get_signed(x + dx, y + dy)))
        })
    }
}

/// Chamfer distance of every mask pixel to the nearest exterior pixel, in pixel units.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMap<T> {
    pub width: usize,
    pub height: usize,
    pub values: Vec<T>,
}

impl<T: Real> DistanceMap<T> {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, values: vec![T::zero(); width * height] }
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.values[y * self.width + x]
    }

    pub fn max_value(&self) -> T {
        self.values.iter().fold(T::zero(), |m, &v| m.max(v))
    }

    /// Pixels with positive distance.
    pub fn support(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.values.iter().map(|&v| v > T::zero()).collect(),
        }
    }
}

pub fn check_dims(expected: (usize, usize), got: (usize, usize)) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
