//! PNG (via the `image` crate) and binary PPM/PGM codecs.

use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageFormat};
use thiserror::Error;

use super::{Image, ImageError};

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("unsupported image format{}", .0.as_deref().map(|e| format!(" ({e})")).unwrap_or_default())]
    Unsupported(Option<String>),
    #[error("corrupt image data: {0}")]
    Decode(String),
    #[error(transparent)]
    Image(#[from] ImageError),
}

const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";

pub fn load_image(path: impl AsRef<Path>) -> Result<Image, CodecError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| CodecError::Read { path: path.to_owned(), source })?;
    decode_image(&bytes)
}

/// Decodes PNG or binary PPM/PGM by sniffing the leading bytes.
pub fn decode_image(bytes: &[u8]) -> Result<Image, CodecError> {
    if bytes.starts_with(PNG_MAGIC) {
        decode_png(bytes)
    } else if bytes.starts_with(b"P6") || bytes.starts_with(b"P5") {
        decode_pnm(bytes)
    } else {
        Err(CodecError::Unsupported(None))
    }
}

pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<(), CodecError> {
    let path = path.as_ref();
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    let bytes = match ext.as_deref() {
        Some("png") => encode_png(img)?,
        Some("ppm") => encode_pnm(&img.to_rgb()),
        Some("pgm") => encode_pnm(&img.to_grayscale()),
        other => return Err(CodecError::Unsupported(other.map(str::to_owned))),
    };
    std::fs::write(path, bytes).map_err(|source| CodecError::Write { path: path.to_owned(), source })
}

pub fn decode_png(bytes: &[u8]) -> Result<Image, CodecError> {
    let dynamic = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| CodecError::Decode(e.to_string()))?;
    from_dynamic(dynamic)
}

pub fn encode_png(img: &Image) -> Result<Vec<u8>, CodecError> {
    let color = if img.channels() == 1 { image::ExtendedColorType::L8 } else { image::ExtendedColorType::Rgb8 };
    let mut out = Cursor::new(Vec::new());
    image::write_buffer_with_format(&mut out, img.samples(), img.width(), img.height(), color, ImageFormat::Png)
        .map_err(|e| CodecError::Decode(e.to_string()))?;
    Ok(out.into_inner())
}

fn from_dynamic(dynamic: DynamicImage) -> Result<Image, CodecError> {
    let (w, h) = (dynamic.width(), dynamic.height());
    let img = if dynamic.color().has_color() {
        Image::new(w, h, 3, dynamic.into_rgb8().into_raw())?
    } else {
        Image::new(w, h, 1, dynamic.into_luma8().into_raw())?
    };
    Ok(img)
}

fn encode_pnm(img: &Image) -> Vec<u8> {
    let magic = if img.channels() == 3 { "P6" } else { "P5" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.samples());
    out
}

fn decode_pnm(bytes: &[u8]) -> Result<Image, CodecError> {
    let channels = if bytes[1] == b'6' { 3 } else { 1 };
    let mut pos = 2;
    let mut fields = [0u64; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(CodecError::Decode("truncated PNM header".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(CodecError::Decode("malformed PNM header".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .filter(|&v| v <= u32::MAX as u64)
            .ok_or_else(|| CodecError::Decode("PNM header value out of range".into()))?;
    }
    let [w, h, maxval] = fields;
    if maxval != 255 {
        return Err(CodecError::Unsupported(Some(format!("PNM maxval {maxval}"))));
    }
    // exactly one whitespace byte separates the header from the raster
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(CodecError::Decode("malformed PNM header".into()));
    }
    pos += 1;
    if w == 0 || h == 0 {
        return Err(ImageError::ZeroDimension { width: w as u32, height: h as u32 }.into());
    }
    let len = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(channels as u64))
        .and_then(|n| usize::try_from(n).ok())
        .ok_or_else(|| CodecError::Decode("PNM dimensions too large".into()))?;
    let raster = bytes
        .get(pos..pos.saturating_add(len))
        .ok_or_else(|| CodecError::Decode(format!("PNM raster truncated: need {len} bytes")))?;
    Ok(Image::new(w as u32, h as u32, channels, raster.to_vec())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(channels: u8) -> Image {
        Image::from_fn(13, 7, channels, |x, y, c| (x * 19 + y * 31 + c as u32 * 7) as u8).unwrap()
    }

    #[test]
    fn png_round_trip_gray_and_rgb() {
        for ch in [1, 3] {
            let img = sample(ch);
            let back = decode_image(&encode_png(&img).unwrap()).unwrap();
            assert_eq!(back, img);
        }
    }

    #[test]
    fn ppm_round_trip_via_files() {
        let dir = tempfile::tempdir().unwrap();
        let img = sample(3);
        let p = dir.path().join("a.ppm");
        save_image(&img, &p).unwrap();
        assert!(std::fs::read(&p).unwrap().starts_with(b"P6\n13 7\n255\n"));
        assert_eq!(load_image(&p).unwrap(), img);

        let gray = sample(1);
        let p = dir.path().join("a.pgm");
        save_image(&gray, &p).unwrap();
        assert_eq!(load_image(&p).unwrap(), gray);
    }

    #[test]
    fn one_pixel_round_trips() {
        let img = Image::new(1, 1, 3, vec![1, 2, 3]).unwrap();
        assert_eq!(decode_image(&encode_png(&img).unwrap()).unwrap(), img);
        assert_eq!(decode_image(&encode_pnm(&img)).unwrap(), img);
    }

    #[test]
    fn ppm_header_comments() {
        let bytes = b"P6 # comment\n2 1 # more\n255\n\x01\x02\x03\x04\x05\x06";
        let img = decode_image(bytes).unwrap();
        assert_eq!(img.samples(), &[1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn truncated_files_fail() {
        let png = encode_png(&sample(3)).unwrap();
        assert!(matches!(decode_image(&png[..png.len() / 2]), Err(CodecError::Decode(_))));
        let ppm = encode_pnm(&sample(3));
        assert!(matches!(decode_image(&ppm[..ppm.len() - 1]), Err(CodecError::Decode(_))));
        assert!(matches!(decode_image(b"P6\n"), Err(CodecError::Decode(_))));
    }

    #[test]
    fn zero_dimension_and_unsupported() {
        assert!(matches!(decode_image(b"P6\n0 4\n255\n"), Err(CodecError::Image(ImageError::ZeroDimension { .. }))));
        assert!(matches!(decode_image(b"P6\n1 1\n65535\n\0\0\0\0\0\0"), Err(CodecError::Unsupported(_))));
        assert!(matches!(decode_image(b"GIF89a"), Err(CodecError::Unsupported(None))));
    }

    #[test]
    fn missing_file() {
        let err = load_image("/nonexistent/definitely/not/here.png").unwrap_err();
        assert!(matches!(err, CodecError::Read { .. }));
    }
}
