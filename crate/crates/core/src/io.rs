//! PNG and JSON persistence for frames, masks, mosaics and phantom datasets.

use std::fs;
use std::path::{Path, PathBuf};

use image::{GrayImage as Luma8, ImageBuffer, Luma, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{BinaryMask, Frame};
use crate::phantom::{GroundTruth, PhantomConfig};
use crate::registration::SimilarityTransform;
use crate::roi::CanonicalEllipse;

/// Load a PNG as an RGB frame. Gray or alpha inputs are converted; 16-bit
/// inputs are reduced to 8 bits.
pub fn load_frame(path: &Path, index: usize) -> Result<Frame> {
    let img = image::open(path)?.into_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let rgb = img.pixels().map(|p| p.0).collect();
    Frame::new(w, h, rgb, index)
}

pub fn save_frame(frame: &Frame, path: &Path) -> Result<()> {
    let (w, h) = frame.dims();
    let img = RgbImage::from_fn(w as u32, h as u32, |x, y| Rgb(frame.pixel(x as usize, y as usize)));
    img.save(path)?;
    Ok(())
}

/// PNG files of `dir` in lexicographic file-name order.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let is_png = path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            paths.push(path);
        }
    }
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(paths)
}

/// Every PNG frame of `dir`, indexed in lexicographic file-name order.
pub fn load_frames(dir: &Path) -> Result<Vec<Frame>> {
    list_frames(dir)?.iter().enumerate().map(|(i, p)| load_frame(p, i)).collect()
}

/// Mask as an 8-bit PNG, 255 for set pixels.
pub fn save_mask(mask: &BinaryMask, path: &Path) -> Result<()> {
    let img = Luma8::from_fn(mask.width as u32, mask.height as u32, |x, y| {
        Luma([if mask.get(x as usize, y as usize) { 255 } else { 0 }])
    });
    img.save(path)?;
    Ok(())
}

/// Mask from a gray PNG: any nonzero pixel is set.
pub fn load_mask(path: &Path) -> Result<BinaryMask> {
    let img = image::open(path)?.into_luma8();
    Ok(BinaryMask::from_fn(img.width() as usize, img.height() as usize, |x, y| {
        img.get_pixel(x as u32, y as u32).0[0] > 0
    }))
}

/// Row-major 16-bit values as a gray PNG.
pub fn save_gray16(values: &[u16], width: usize, height: usize, path: &Path) -> Result<()> {
    if values.len() != width * height {
        return Err(Error::DimensionMismatch { expected: (width, height), got: (values.len(), 1) });
    }
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(width as u32, height as u32, values.to_vec()).expect("length checked above");
    img.save(path)?;
    Ok(())
}

pub fn load_gray16(path: &Path) -> Result<(Vec<u16>, usize, usize)> {
    let img = image::open(path)?.into_luma16();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok((img.into_raw(), w, h))
}

pub fn write_json<S: Serialize>(value: &S, path: &Path) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

pub fn read_json<D: for<'de> Deserialize<'de>>(path: &Path) -> Result<D> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Per-frame entry of `truth.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameTruthRecord {
    pub file: String,
    pub roi: CanonicalEllipse<f64>,
    /// Frame coordinates to retina coordinates.
    pub transform: SimilarityTransform<f64>,
    pub glare_mask: String,
    pub is_noise: bool,
}

/// Contents of `truth.json`; image paths are relative to its directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub config: PhantomConfig,
    pub retina: String,
    pub vessel_mask: String,
    pub frames: Vec<FrameTruthRecord>,
}

pub fn frame_file_name(i: usize) -> String {
    format!("frame_{i:04}.png")
}

/// Write a phantom sequence: `frame_NNNN.png`, the retina, the vessel and
/// glare masks under `truth/`, and `truth.json` describing them.
pub fn write_phantom(dir: &Path, config: &PhantomConfig, frames: &[Frame], truth: &GroundTruth) -> Result<TruthRecord> {
    let truth_dir = dir.join("truth");
    fs::create_dir_all(&truth_dir)?;
    save_frame(&truth.retina, &truth_dir.join("retina.png"))?;
    save_mask(&truth.vessel_mask, &truth_dir.join("vessel_mask.png"))?;
    let mut records = Vec::with_capacity(frames.len());
    for (i, (frame, ft)) in frames.iter().zip(&truth.frames).enumerate() {
        let file = frame_file_name(i);
        save_frame(frame, &dir.join(&file))?;
        let glare_mask = format!("truth/glare_{i:04}.png");
        save_mask(&ft.glare, &dir.join(&glare_mask))?;
        records.push(FrameTruthRecord {
            file,
            roi: ft.roi,
            transform: ft.transform,
            glare_mask,
            is_noise: ft.is_noise,
        });
    }
    let record = TruthRecord {
        config: config.clone(),
        retina: "truth/retina.png".into(),
        vessel_mask: "truth/vessel_mask.png".into(),
        frames: records,
    };
    write_json(&record, &dir.join("truth.json"))?;
    Ok(record)
}
