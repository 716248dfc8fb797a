use crate::imaging::{clamp_u8, Image};
use crate::stochastic::SeededRng;

/// Adds independent `N(0, sigma)` noise to every sample (raster order, channels
/// interleaved, one stream seeded by `seed`) and min-max rescales to `[0, 255]`.
///
/// If the perturbed image is constant the rescale is undefined and the
/// perturbed values are returned as-is.
///
/// # Panics
/// If `sigma` is negative or not finite; [`super::apply`] validates first.
pub fn gaussian_noise(img: &Image, sigma: f64, seed: u64) -> Image {
    let mut rng = SeededRng::new(seed);
    let noisy: Vec<f64> = img
        .samples()
        .iter()
        .map(|&s| s as f64 + rng.next_gaussian(0.0, sigma).expect("sigma validated"))
        .collect();
    let (lo, hi) = noisy.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let data = if hi > lo {
        noisy.iter().map(|&v| clamp_u8((v - lo) * 255.0 / (hi - lo))).collect()
    } else {
        noisy.iter().map(|&v| clamp_u8(v)).collect()
    };
    Image::new(img.width(), img.height(), img.channels(), data).expect("shape preserved")
}
