//! Per-frame image grids stored as binary PNM files: `rgb_NNNNN.ppm` (P6) and
//! `depth_NNNNN.pgm` (P5, 8 or 16 bit) inside a per-sequence directory.

use std::borrow::Cow;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use super::mirror::mirror_images;
use super::{FrameImages, SkeletonFrame};
use crate::error::{Error, Result};
use crate::hog::GrayGrid;

fn format_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Reads a PGM or PPM file as a gray grid; color is reduced to luminance.
pub fn load_gray(path: &Path) -> Result<GrayGrid> {
    let img = image::open(path).map_err(|e| format_err(path, e))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let values: Vec<f64> = match img {
        DynamicImage::ImageLuma8(buf) => buf.pixels().map(|p| p.0[0] as f64).collect(),
        DynamicImage::ImageLuma16(buf) => buf.pixels().map(|p| p.0[0] as f64).collect(),
        other => other
            .to_rgb32f()
            .pixels()
            .map(|p| 255.0 * (0.299 * p.0[0] as f64 + 0.587 * p.0[1] as f64 + 0.114 * p.0[2] as f64))
            .collect(),
    };
    GrayGrid::new(w, h, values)
}

fn frame_paths(dir: &Path, frame_index: u64) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("rgb_{frame_index:05}.ppm")),
        dir.join(format!("depth_{frame_index:05}.pgm")),
    )
}

/// Reads the image pair of one frame from a sequence directory.
pub fn load_frame_images(dir: &Path, frame_index: u64) -> Result<FrameImages> {
    let (rgb, depth) = frame_paths(dir, frame_index);
    Ok(FrameImages {
        rgb: load_gray(&rgb)?,
        depth: load_gray(&depth)?,
    })
}

/// Per-frame images of a sequence. Recorded datasets are far too large to
/// hold in memory, so on-disk images are decoded only when a frame asks.
#[derive(Debug, Clone, PartialEq)]
pub enum ImageSource {
    Memory(Vec<FrameImages>),
    Disk {
        dir: PathBuf,
        frame_indices: Vec<u64>,
        /// Flip every image horizontally after decoding.
        mirrored: bool,
    },
}

impl ImageSource {
    /// Images for `frames` stored in `dir`. Fails early if any file is missing.
    pub fn on_disk(dir: &Path, frames: &[SkeletonFrame]) -> Result<Self> {
        for f in frames {
            let (rgb, depth) = frame_paths(dir, f.frame_index);
            for p in [rgb, depth] {
                if !p.is_file() {
                    return Err(Error::io(
                        &p,
                        std::io::Error::new(std::io::ErrorKind::NotFound, "missing frame image"),
                    ));
                }
            }
        }
        Ok(ImageSource::Disk {
            dir: dir.to_path_buf(),
            frame_indices: frames.iter().map(|f| f.frame_index).collect(),
            mirrored: false,
        })
    }

    pub fn len(&self) -> usize {
        match self {
            ImageSource::Memory(v) => v.len(),
            ImageSource::Disk { frame_indices, .. } => frame_indices.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Images of the `i`-th frame.
    pub fn get(&self, i: usize) -> Result<Cow<'_, FrameImages>> {
        match self {
            ImageSource::Memory(v) => v
                .get(i)
                .map(Cow::Borrowed)
                .ok_or(Error::MisalignedImages { images: v.len(), frames: i + 1 }),
            ImageSource::Disk {
                dir,
                frame_indices,
                mirrored,
            } => {
                let index = *frame_indices.get(i).ok_or(Error::MisalignedImages {
                    images: frame_indices.len(),
                    frames: i + 1,
                })?;
                let im = load_frame_images(dir, index)?;
                Ok(Cow::Owned(if *mirrored { mirror_images(&im) } else { im }))
            }
        }
    }

    pub fn slice(&self, start: usize, end: usize) -> ImageSource {
        match self {
            ImageSource::Memory(v) => ImageSource::Memory(v[start..end].to_vec()),
            ImageSource::Disk {
                dir,
                frame_indices,
                mirrored,
            } => ImageSource::Disk {
                dir: dir.clone(),
                frame_indices: frame_indices[start..end].to_vec(),
                mirrored: *mirrored,
            },
        }
    }

    /// The same images flipped left to right.
    pub fn mirrored(&self) -> ImageSource {
        match self {
            ImageSource::Memory(v) => ImageSource::Memory(v.iter().map(mirror_images).collect()),
            ImageSource::Disk {
                dir,
                frame_indices,
                mirrored,
            } => ImageSource::Disk {
                dir: dir.clone(),
                frame_indices: frame_indices.clone(),
                mirrored: !mirrored,
            },
        }
    }
}

/// Writes a gray grid as a 16-bit PGM (values rounded and clamped to u16).
pub fn save_depth_pgm(path: &Path, grid: &GrayGrid) -> Result<()> {
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_fn(
        grid.width() as u32,
        grid.height() as u32,
        |x, y| Luma([grid.get(x as usize, y as usize).round().clamp(0.0, 65535.0) as u16]),
    );
    buf.save_with_format(path, image::ImageFormat::Pnm)
        .map_err(|e| format_err(path, e))
}

/// Writes a gray grid as a P6 pixmap with equal channels.
pub fn save_rgb_ppm(path: &Path, grid: &GrayGrid) -> Result<()> {
    let buf: ImageBuffer<Rgb<u8>, Vec<u8>> = ImageBuffer::from_fn(
        grid.width() as u32,
        grid.height() as u32,
        |x, y| {
            let v = grid.get(x as usize, y as usize).round().clamp(0.0, 255.0) as u8;
            Rgb([v, v, v])
        },
    );
    buf.save_with_format(path, image::ImageFormat::Pnm)
        .map_err(|e| format_err(path, e))
}
