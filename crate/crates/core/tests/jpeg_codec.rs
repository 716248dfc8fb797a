//! The built-in JPEG codec checked against independent decoders.

use std::path::PathBuf;

use faceveil::filters::jpeg::{decode, encode, jpeg_recompress};
use faceveil::imaging::{load_image, mean_absolute_error, psnr, Image};
use zune_jpeg::zune_core::colorspace::ColorSpace;
use zune_jpeg::zune_core::options::DecoderOptions;
use zune_jpeg::JpegDecoder;

fn asset(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn face() -> Image {
    load_image(asset("assets/minicorpus/images/face_01.png")).unwrap()
}

fn zune_decode(bytes: &[u8], channels: u8) -> Image {
    let cs = if channels == 1 { ColorSpace::Luma } else { ColorSpace::RGB };
    let opts = DecoderOptions::default().jpeg_set_out_colorspace(cs);
    let mut dec = JpegDecoder::new_with_options(bytes, opts);
    let pixels = dec.decode().expect("oracle decodes our stream");
    let (w, h) = dec.dimensions().unwrap();
    Image::new(w as u32, h as u32, channels, pixels).unwrap()
}

#[test]
fn encoder_output_decodes_with_independent_decoder() {
    let img = face();
    for q in [100, 75, 30, 5] {
        let bytes = encode(&img, q).unwrap();
        let ours = decode(&bytes).unwrap();
        let theirs = zune_decode(&bytes, 3);
        assert_eq!((theirs.width(), theirs.height()), (img.width(), img.height()));
        // Different IDCT and chroma upsampling; agreement must still be close.
        let mae = mean_absolute_error(&ours, &theirs).unwrap();
        assert!(mae < 1.5, "q={q} decoder disagreement {mae}");
    }
    let gray = img.to_grayscale();
    let bytes = encode(&gray, 50).unwrap();
    let theirs = zune_decode(&bytes, 1);
    let mae = mean_absolute_error(&decode(&bytes).unwrap(), &theirs).unwrap();
    assert!(mae < 1.0, "gray decoder disagreement {mae}");
}

#[test]
fn decodes_streams_from_a_reference_encoder() {
    // Encoded and decoded once with libjpeg; the PNG holds libjpeg's decode.
    for (jpg, png, tol) in [("libjpeg_q85_rst.jpg", "libjpeg_q85_rst.png", 1.5), ("libjpeg_gray_q60.jpg", "libjpeg_gray_q60.png", 1.0)] {
        let bytes = std::fs::read(asset(&format!("tests/fixtures/{jpg}"))).unwrap();
        let reference = load_image(asset(&format!("tests/fixtures/{png}"))).unwrap();
        let ours = decode(&bytes).unwrap();
        assert_eq!((ours.width(), ours.height(), ours.channels()), (reference.width(), reference.height(), reference.channels()));
        let mae = mean_absolute_error(&ours, &reference).unwrap();
        assert!(mae < tol, "{jpg}: {mae}");
    }
}

#[test]
fn quality_100_psnr_on_natural_image() {
    let img = face();
    let out = jpeg_recompress(&img, 100).unwrap();
    let p = psnr(&img, &out).unwrap();
    assert!(p >= 40.0, "psnr {p}");
}

#[test]
fn mean_absolute_error_grows_as_quality_drops() {
    let img = face();
    let maes: Vec<f64> = [100, 75, 50, 25, 10, 5]
        .iter()
        .map(|&q| mean_absolute_error(&img, &jpeg_recompress(&img, q).unwrap()).unwrap())
        .collect();
    for pair in maes.windows(2) {
        assert!(pair[0] <= pair[1], "{maes:?}");
    }
    let q95 = mean_absolute_error(&img, &jpeg_recompress(&img, 95).unwrap()).unwrap();
    assert!(maes[5] > q95);
}
