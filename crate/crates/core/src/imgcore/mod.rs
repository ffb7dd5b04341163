//! Image containers and the raster primitives every stage builds on.

mod components;
mod distance;
mod image;
mod morphology;
pub mod sample;
mod threshold;

pub use components::{contour, label_components, largest_component, remove_small_components};
pub use distance::{chamfer_distance, CHAMFER_DIAGONAL, CHAMFER_ORTHOGONAL};
pub use image::check_dims;
pub use image::{BinaryMask, DistanceMap, Frame, GrayImage, MIN_FRAME_EDGE};
pub use morphology::{asf, closing, dilate, disc, erode, opening};
pub use threshold::{binarize, histogram, histogram_bin, otsu_threshold, to_grayscale, LUMA_WEIGHTS};
