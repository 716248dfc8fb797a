//! Image representation, codecs, box geometry and the IoU matching rule.

mod codec;
mod geometry;
mod metrics;

pub use codec::{decode_image, decode_png, encode_png, load_image, save_image, CodecError};
pub use geometry::{interocular_distance, iou, is_true_accept, BoundingBox, FaceAnnotation, GeometryError, Keypoint};
pub use metrics::{mean_absolute_error, psnr};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ImageError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    ZeroDimension { width: u32, height: u32 },
    #[error("unsupported channel count {0} (expected 1 or 3)")]
    Channels(u8),
    #[error("sample buffer has {actual} bytes, expected {expected}")]
    SampleCount { expected: usize, actual: usize },
}

/// Row-major 8-bit image with one (gray) or three (RGB) interleaved channels.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Image {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
}

impl std::fmt::Debug for Image {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Image")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("channels", &self.channels)
            .finish_non_exhaustive()
    }
}

impl Image {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::ZeroDimension { width, height });
        }
        if channels != 1 && channels != 3 {
            return Err(ImageError::Channels(channels));
        }
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(ImageError::SampleCount { expected, actual: data.len() });
        }
        Ok(Image { width, height, channels, data })
    }

    /// An image with every sample set to `value`.
    pub fn filled(width: u32, height: u32, channels: u8, value: u8) -> Result<Self, ImageError> {
        let len = width as usize * height as usize * channels as usize;
        Self::new(width, height, channels, vec![value; len])
    }

    pub fn from_fn<F>(width: u32, height: u32, channels: u8, mut f: F) -> Result<Self, ImageError>
    where
        F: FnMut(u32, u32, u8) -> u8,
    {
        let mut data = Vec::with_capacity(width as usize * height as usize * channels as usize);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn samples(&self) -> &[u8] {
        &self.data
    }

    pub fn samples_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_samples(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn index(&self, x: u32, y: u32, c: u8) -> usize {
        (y as usize * self.width as usize + x as usize) * self.channels as usize + c as usize
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32, c: u8) -> u8 {
        self.data[self.index(x, y, c)]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, c: u8, v: u8) {
        let i = self.index(x, y, c);
        self.data[i] = v;
    }

    /// Luma conversion with Rec. 601 weights, rounded half away from zero.
    ///
    /// Computed in integer thousandths so the result is exact on every platform.
    pub fn to_grayscale(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| {
                let weighted = 299 * p[0] as u32 + 587 * p[1] as u32 + 114 * p[2] as u32;
                ((weighted + 500) / 1000).min(255) as u8
            })
            .collect();
        Image { width: self.width, height: self.height, channels: 1, data }
    }

    /// Replicates a gray image into three channels; RGB input is returned as is.
    pub fn to_rgb(&self) -> Image {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        Image { width: self.width, height: self.height, channels: 3, data }
    }

    /// Splits into per-channel planes of `f64`.
    pub(crate) fn planes(&self) -> Vec<Vec<f64>> {
        let n = self.width as usize * self.height as usize;
        let ch = self.channels as usize;
        (0..ch)
            .map(|c| (0..n).map(|i| self.data[i * ch + c] as f64).collect())
            .collect()
    }

    /// Inverse of [`Image::planes`]; values are rounded half away from zero and clamped.
    pub(crate) fn from_planes(width: u32, height: u32, planes: &[Vec<f64>]) -> Image {
        let n = width as usize * height as usize;
        let ch = planes.len();
        let mut data = vec![0u8; n * ch];
        for (c, plane) in planes.iter().enumerate() {
            for (i, &v) in plane.iter().enumerate() {
                data[i * ch + c] = clamp_u8(v);
            }
        }
        Image { width, height, channels: ch as u8, data }
    }
}

/// Rounds half away from zero and saturates to the 8-bit range.
#[inline]
pub fn clamp_u8(v: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    v.round().clamp(0.0, 255.0) as u8
}
