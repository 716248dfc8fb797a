use crate::imaging::{clamp_u8, Image};

/// Scales every sample by `factor`, rounding half away from zero.
pub fn darken(img: &Image, factor: f64) -> Image {
    let data = img.samples().iter().map(|&s| clamp_u8(s as f64 * factor)).collect();
    Image::new(img.width(), img.height(), img.channels(), data).expect("shape preserved")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let img = Image::new(3, 1, 1, vec![128, 255, 3]).unwrap();
        assert_eq!(darken(&img, 1.0), img);
        assert_eq!(darken(&img, 0.0).samples(), &[0, 0, 0]);
        assert_eq!(darken(&img, 0.5).samples(), &[64, 128, 2]);
    }
}
