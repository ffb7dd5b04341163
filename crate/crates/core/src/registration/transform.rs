use serde::{Deserialize, Serialize};

use crate::real::Real;

/// `p -> scale * p + (tx, ty)`, mapping frame coordinates into mosaic coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SimilarityTransform<T: Real> {
    pub scale: T,
    pub tx: T,
    pub ty: T,
}

impl<T: Real> Default for SimilarityTransform<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> SimilarityTransform<T> {
    pub fn new(scale: T, tx: T, ty: T) -> Self {
        Self { scale, tx, ty }
    }

    pub fn identity() -> Self {
        Self { scale: T::one(), tx: T::zero(), ty: T::zero() }
    }

    pub fn translation(tx: T, ty: T) -> Self {
        Self { scale: T::one(), tx, ty }
    }

    #[inline]
    pub fn apply(&self, x: T, y: T) -> (T, T) {
        (self.scale * x + self.tx, self.scale * y + self.ty)
    }

    #[inline]
    pub fn apply_inverse(&self, x: T, y: T) -> (T, T) {
        ((x - self.tx) / self.scale, (y - self.ty) / self.scale)
    }

    pub fn inverse(&self) -> Self {
        let inv = T::one() / self.scale;
        Self { scale: inv, tx: -self.tx * inv, ty: -self.ty * inv }
    }

    /// `self` after `first`: `p -> self(first(p))`.
    pub fn compose(&self, first: &Self) -> Self {
        Self {
            scale: self.scale * first.scale,
            tx: self.scale * first.tx + self.tx,
            ty: self.scale * first.ty + self.ty,
        }
    }

    /// Shift of the target coordinate system: the result maps into
    /// coordinates offset by `(-dx, -dy)`.
    pub fn translated(&self, dx: T, dy: T) -> Self {
        Self { scale: self.scale, tx: self.tx + dx, ty: self.ty + dy }
    }

    /// The same mapping expressed between pyramid level `level` grids, where
    /// level pixel `i` covers level-0 pixels `2^l i .. 2^l i + 2^l - 1`.
    pub fn to_level(&self, level: usize) -> Self {
        let f = T::lit((1u64 << level) as f64);
        let c = (f - T::one()) / T::lit(2.0);
        let shift = (self.scale - T::one()) * c;
        Self { scale: self.scale, tx: (self.tx + shift) / f, ty: (self.ty + shift) / f }
    }

    pub fn from_level(&self, level: usize) -> Self {
        let f = T::lit((1u64 << level) as f64);
        let c = (f - T::one()) / T::lit(2.0);
        let shift = (self.scale - T::one()) * c;
        Self { scale: self.scale, tx: self.tx * f - shift, ty: self.ty * f - shift }
    }

    pub fn cast<U: Real>(&self) -> SimilarityTransform<U> {
        SimilarityTransform {
            scale: U::lit(self.scale.as_f64()),
            tx: U::lit(self.tx.as_f64()),
            ty: U::lit(self.ty.as_f64()),
        }
    }
}
