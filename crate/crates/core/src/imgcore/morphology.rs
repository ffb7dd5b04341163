use super::image::GrayImage;
use crate::real::Real;

/// Offsets of the discrete disc `dx^2 + dy^2 <= r^2`.
pub fn disc(radius: usize) -> Vec<(isize, isize)> {
    let r = radius as isize;
    let mut offsets = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                offsets.push((dx, dy));
            }
        }
    }
    offsets
}

fn rank_filter<T: Real>(img: &GrayImage<T>, se: &[(isize, isize)], pick: impl Fn(T, T) -> T) -> GrayImage<T> {
    let (w, h) = img.dims();
    GrayImage::from_fn(w, h, |x, y| {
        let mut acc = img.get(x, y);
        for &(dx, dy) in se {
            let (nx, ny) = (x as isize + dx, y as isize + dy);
            if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                acc = pick(acc, img.get(nx as usize, ny as usize));
            }
        }
        acc
    })
}

/// Grayscale dilation; samples outside the image are ignored.
pub fn dilate<T: Real>(img: &GrayImage<T>, se: &[(isize, isize)]) -> GrayImage<T> {
    rank_filter(img, se, T::max)
}

/// Grayscale erosion; samples outside the image are ignored.
pub fn erode<T: Real>(img: &GrayImage<T>, se: &[(isize, isize)]) -> GrayImage<T> {
    rank_filter(img, se, T::min)
}

pub fn closing<T: Real>(img: &GrayImage<T>, se: &[(isize, isize)]) -> GrayImage<T> {
    erode(&dilate(img, se), se)
}

pub fn opening<T: Real>(img: &GrayImage<T>, se: &[(isize, isize)]) -> GrayImage<T> {
    dilate(&erode(img, se), se)
}

/// Alternating sequential filter: for each radius in order, a closing then an
/// opening with a disc of that radius. `radii` should be strictly increasing.
pub fn asf<T: Real>(gray: &GrayImage<T>, radii: &[usize]) -> GrayImage<T> {
    let mut out = gray.clone();
    for &r in radii {
        let se = disc(r);
        out = opening(&closing(&out, &se), &se);
    }
    out
}
