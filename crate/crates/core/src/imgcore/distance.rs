use super::image::{BinaryMask, DistanceMap};
use crate::real::Real;

/// Chamfer step weights (orthogonal, diagonal) before normalisation.
pub const CHAMFER_ORTHOGONAL: u32 = 3;
pub const CHAMFER_DIAGONAL: u32 = 4;

/// Two-pass chamfer 3-4 distance from each mask pixel to the nearest pixel
/// outside the mask, in pixel units (raw chamfer value / 3).
///
/// Pixels beyond the image border count as outside the mask.
pub fn chamfer_distance<T: Real>(mask: &BinaryMask) -> DistanceMap<T> {
    let (w, h) = mask.dims();
    let (o, d) = (CHAMFER_ORTHOGONAL, CHAMFER_DIAGONAL);
    let inf = u32::MAX / 2;
    let mut dist: Vec<u32> = mask.bits.iter().map(|&b| if b { inf } else { 0 }).collect();
    let at = |dist: &[u32], x: isize, y: isize| -> u32 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0
        } else {
            dist[y as usize * w + x as usize]
        }
    };

    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            if dist[i] == 0 {
                continue;
            }
            let v = dist[i]
                .min(at(&dist, x - 1, y) + o)
                .min(at(&dist, x - 1, y - 1) + d)
                .min(at(&dist, x, y - 1) + o)
                .min(at(&dist, x + 1, y - 1) + d);
            dist[i] = v;
        }
    }
    for y in (0..h as isize).rev() {
        for x in (0..w as isize).rev() {
            let i = y as usize * w + x as usize;
            if dist[i] == 0 {
                continue;
            }
            let v = dist[i]
                .min(at(&dist, x + 1, y) + o)
                .min(at(&dist, x + 1, y + 1) + d)
                .min(at(&dist, x, y + 1) + o)
                .min(at(&dist, x - 1, y + 1) + d);
            dist[i] = v;
        }
    }

    let scale = T::lit(o as f64);
    DistanceMap { width: w, height: h, values: dist.into_iter().map(|v| T::lit(v as f64) / scale).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exact Euclidean distance to the nearest exterior pixel centre, with a
    /// one-pixel exterior ring around the image.
    fn brute_force_euclidean(mask: &BinaryMask) -> Vec<f64> {
        let (w, h) = (mask.width as isize, mask.height as isize);
        let mut exterior = Vec::new();
        for y in -1..=h {
            for x in -1..=w {
                if !mask.get_signed(x, y) {
                    exterior.push((x, y));
                }
            }
        }
        let mut out = vec![0.0; (w * h) as usize];
        for y in 0..h {
            for x in 0..w {
                if mask.get(x as usize, y as usize) {
                    out[(y * w + x) as usize] = exterior
                        .iter()
                        .map(|&(ex, ey)| (((ex - x).pow(2) + (ey - y).pow(2)) as f64).sqrt())
                        .fold(f64::INFINITY, f64::min);
                }
            }
        }
        out
    }

    #[test]
    fn three_by_three_full_mask() {
        let d = chamfer_distance::<f64>(&BinaryMask::full(3, 3));
        assert_eq!(d.values, vec![1.0, 1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(brute_force_euclidean(&BinaryMask::full(3, 3)), d.values);
    }

    #[test]
    fn empty_mask_is_zero() {
        let d = chamfer_distance::<f64>(&BinaryMask::new(9, 7));
        assert!(d.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn close_to_euclidean_on_random_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..20 {
            let density = 0.5 + 0.025 * trial as f64;
            let m = BinaryMask::from_fn(32, 32, |_, _| rng.random_bool(density));
            let chamfer = chamfer_distance::<f64>(&m);
            let exact = brute_force_euclidean(&m);
            for (c, e) in chamfer.values.iter().zip(&exact) {
                if *e == 0.0 {
                    assert_eq!(*c, 0.0);
                } else {
                    assert!((c - e).abs() / e <= 0.081, "chamfer {c} vs euclidean {e}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn chamfer_is_lipschitz(bits in proptest::collection::vec(any::<bool>(), 20 * 15)) {
            let m = BinaryMask { width: 20, height: 15, bits };
            let d = chamfer_distance::<f64>(&m);
            for y in 0..15isize {
                for x in 0..20isize {
                    let v = d.get(x as usize, y as usize);
                    if !m.get(x as usize, y as usize) {
                        prop_assert_eq!(v, 0.0);
                    }
                    for (dx, dy) in [(1isize, 0isize), (0, 1), (1, 1), (1, -1)] {
                        let (nx, ny) = (x + dx, y + dy);
                        if nx < 0 || ny < 0 || nx >= 20 || ny >= 15 {
                            continue;
                        }
                        let limit = if dx != 0 && dy != 0 { 4.0 / 3.0 } else { 1.0 };
                        let diff = (v - d.get(nx as usize, ny as usize)).abs();
                        prop_assert!(diff <= limit + 1e-12);
                    }
                }
            }
        }
    }
}
