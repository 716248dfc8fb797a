//! Baseline sequential JPEG: 8x8 DCT, Annex K quantization and Huffman tables,
//! YCbCr 4:2:0 for color (4:4:4 at quality 100). No progressive mode, arithmetic coding or restart
//! markers on the encode side; the decoder also accepts restart intervals and
//! non-interleaved scans.

mod dct;
mod decoder;
mod encoder;
pub mod tables;

use thiserror::Error;

use crate::imaging::Image;

pub use decoder::decode;
pub use encoder::{chroma_subsampling, encode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JpegError {
    #[error("quality must be in 1..=100, got {0}")]
    InvalidQuality(i64),
    #[error("image {0}x{1} exceeds the 65535-pixel JPEG dimension limit")]
    TooLarge(u32, u32),
    #[error("truncated JPEG stream")]
    Truncated,
    #[error("corrupt JPEG stream: {0}")]
    Corrupt(String),
    #[error("unsupported JPEG feature: {0}")]
    Unsupported(String),
}

/// Encodes at `quality` and decodes again; dimensions and channel count are preserved.
pub fn jpeg_recompress(img: &Image, quality: u8) -> Result<Image, JpegError> {
    decode(&encode(img, quality)?)
}
