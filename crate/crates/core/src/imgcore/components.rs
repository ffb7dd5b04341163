use std::collections::VecDeque;

use super::image::BinaryMask;
use crate::error::{Error, Result};

const NEIGHBOURS_8: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];
const NEIGHBOURS_4: [(isize, isize); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];

/// 8-connected component labelling.
///
/// Labels start at 1 and follow the row-major order of each component's first
/// pixel; 0 marks unset pixels. Returns the label image and per-label sizes
/// (index 0 unused).
pub fn label_components(mask: &BinaryMask) -> (Vec<u32>, Vec<usize>) {
    let (w, h) = mask.dims();
    let mut labels = vec![0u32; w * h];
    let mut sizes = vec![0usize];
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask.bits[start] || labels[start] != 0 {
            continue;
        }
        let label = sizes.len() as u32;
        let mut size = 0;
        labels[start] = label;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for (dx, dy) in NEIGHBOURS_8 {
                let (nx, ny) = (x + dx, y + dy);
                if mask.get_signed(nx, ny) {
                    let j = ny as usize * w + nx as usize;
                    if labels[j] == 0 {
                        labels[j] = label;
                        queue.push_back(j);
                    }
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

/// The largest 8-connected component; ties go to the component whose first
/// pixel comes earliest in row-major order.
pub fn largest_component(mask: &BinaryMask) -> Result<BinaryMask> {
    let (labels, sizes) = label_components(mask);
    let mut best = 0;
    for (label, &size) in sizes.iter().enumerate().skip(1) {
        if size > sizes[best] {
            best = label;
        }
    }
    if best == 0 {
        return Err(Error::EmptyMask);
    }
    let best = best as u32;
    Ok(BinaryMask { width: mask.width, height: mask.height, bits: labels.iter().map(|&l| l == best).collect() })
}

/// Drops 8-connected components with fewer than `min_area` pixels.
pub fn remove_small_components(mask: &BinaryMask, min_area: usize) -> BinaryMask {
    if min_area <= 1 {
        return mask.clone();
    }
    let (labels, sizes) = label_components(mask);
    BinaryMask {
        width: mask.width,
        height: mask.height,
        bits: labels.iter().map(|&l| l != 0 && sizes[l as usize] >= min_area).collect(),
    }
}

/// Mask pixels with at least one 4-neighbour outside the mask. The image
/// border counts as outside.
pub fn contour(mask: &BinaryMask) -> Result<BinaryMask> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let (w, h) = mask.dims();
    Ok(BinaryMask::from_fn(w, h, |x, y| {
        mask.get(x, y) && NEIGHBOURS_4.iter().any(|&(dx, dy)| !mask.get_signed(x as isize + dx, y as isize + dy))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_from(rows: &[&str]) -> BinaryMask {
        let h = rows.len();
        let w = rows[0].len();
        BinaryMask::from_fn(w, h, |x, y| rows[y].as_bytes()[x] == b'#')
    }

    #[test]
    fn keeps_largest_blob() {
        let m = mask_from(&[
            "##.....", //
            "#......", ".....#.", "....###", ".....#.",
        ]);
        let largest = largest_component(&m).unwrap();
        assert_eq!(largest.count(), 5);
        assert!(largest.get(5, 3) && !largest.get(0, 0));
        assert!(largest.is_subset_of(&m));
    }

    #[test]
    fn diagonal_pixels_are_connected() {
        let m = mask_from(&["#..", ".#.", "..#"]);
        assert_eq!(largest_component(&m).unwrap().count(), 3);
    }

    #[test]
    fn tie_prefers_earliest_component() {
        let m = mask_from(&["##..##", "......", "......"]);
        let largest = largest_component(&m).unwrap();
        assert!(largest.get(0, 0) && !largest.get(4, 0));
    }

    #[test]
    fn full_and_empty_masks() {
        let full = BinaryMask::full(6, 4);
        assert_eq!(largest_component(&full).unwrap(), full);
        assert!(matches!(largest_component(&BinaryMask::new(4, 4)), Err(Error::EmptyMask)));
        assert!(matches!(contour(&BinaryMask::new(4, 4)), Err(Error::EmptyMask)));
    }

    #[test]
    fn contour_of_square() {
        let m = BinaryMask::from_fn(7, 7, |x, y| (2..5).contains(&x) && (2..5).contains(&y));
        let c = contour(&m).unwrap();
        assert_eq!(c.count(), 8);
        assert!(!c.get(3, 3));
        assert!(c.is_subset_of(&m));
    }

    #[test]
    fn contour_of_single_pixel_and_full_image() {
        let mut m = BinaryMask::new(5, 5);
        m.set(2, 2, true);
        assert_eq!(contour(&m).unwrap(), m);

        let full = BinaryMask::full(6, 5);
        let ring = contour(&full).unwrap();
        assert_eq!(ring.count(), 2 * 6 + 2 * 3);
        assert!(!ring.get(2, 2));
        assert!(ring.get(0, 2) && ring.get(5, 4));
    }

    #[test]
    fn small_components_removed() {
        let m = mask_from(&["##...#", "##....", "......"]);
        let kept = remove_small_components(&m, 2);
        assert_eq!(kept.count(), 4);
        assert!(!kept.get(5, 0));
    }
}
