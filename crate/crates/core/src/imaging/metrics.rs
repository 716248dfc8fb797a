use super::Image;

/// Mean absolute sample difference; `None` when shapes differ.
pub fn mean_absolute_error(a: &Image, b: &Image) -> Option<f64> {
    if !same_shape(a, b) {
        return None;
    }
    let total: u64 = a
        .samples()
        .iter()
        .zip(b.samples())
        .map(|(&x, &y)| (x as i32 - y as i32).unsigned_abs() as u64)
        .sum();
    Some(total as f64 / a.samples().len() as f64)
}

/// Peak signal-to-noise ratio in dB over all samples.
///
/// `None` when shapes differ; `Some(f64::INFINITY)` for identical images.
pub fn psnr(a: &Image, b: &Image) -> Option<f64> {
    if !same_shape(a, b) {
        return None;
    }
    let sse: u64 = a
        .samples()
        .iter()
        .zip(b.samples())
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum();
    if sse == 0 {
        return Some(f64::INFINITY);
    }
    let mse = sse as f64 / a.samples().len() as f64;
    Some(10.0 * (255.0 * 255.0 / mse).log10())
}

fn same_shape(a: &Image, b: &Image) -> bool {
    a.width() == b.width() && a.height() == b.height() && a.channels() == b.channels()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psnr_and_mae() {
        let a = Image::filled(4, 4, 1, 100).unwrap();
        let b = Image::filled(4, 4, 1, 110).unwrap();
        assert_eq!(mean_absolute_error(&a, &b), Some(10.0));
        assert_eq!(psnr(&a, &a), Some(f64::INFINITY));
        let p = psnr(&a, &b).unwrap();
        assert!((p - 10.0 * (65025.0f64 / 100.0).log10()).abs() < 1e-12);
        let c = Image::filled(4, 5, 1, 100).unwrap();
        assert_eq!(psnr(&a, &c), None);
    }
}
