use crate::imaging::{clamp_u8, Image};

use super::FaceContext;

/// Normalized 1D Gaussian taps for offsets `-r..=r`, `r = ceil(3 sigma)`.
/// `sigma = 0` yields the single tap `[1.0]`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let r = (3.0 * sigma).ceil() as i64;
    let taps: Vec<f64> = (-r..=r).map(|i| libm::exp(-((i * i) as f64) / (2.0 * sigma * sigma))).collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

/// Separable convolution of a `w x h` plane with clamp-to-edge borders.
pub(crate) fn convolve_separable(plane: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..w {
            tmp[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, &t)| t * row[clamp(x as isize + k as isize - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, &t)| t * tmp[clamp(y as isize + k as isize - r, h) * w + x])
                .sum();
        }
    }
    out
}

fn blur_planes(img: &Image, sigma: f64) -> Vec<Vec<f64>> {
    let kernel = gaussian_kernel(sigma);
    let (w, h) = (img.width() as usize, img.height() as usize);
    img.planes().iter().map(|p| convolve_separable(p, w, h, &kernel)).collect()
}

/// Separable Gaussian blur, kernel radius `ceil(3 sigma)`, clamp-to-edge.
pub fn gaussian_blur(img: &Image, sigma: f64) -> Image {
    if sigma <= 0.0 {
        return img.clone();
    }
    Image::from_planes(img.width(), img.height(), &blur_planes(img, sigma))
}

/// Periocular rectangle `(x0, y0, x1, y1)`: the eye-line bounding box expanded
/// by `0.25 iod` horizontally and `0.35 iod` vertically.
pub fn periocular_region(ctx: &FaceContext) -> (f64, f64, f64, f64) {
    let ((ax, ay), (bx, by)) = ctx.eye_line;
    let (mx, my) = (0.25 * ctx.iod, 0.35 * ctx.iod);
    (ax.min(bx) - mx, ay.min(by) - my, ax.max(bx) + mx, ay.max(by) + my)
}

const FEATHER: f64 = 2.0;

/// Blurs only the periocular region. Pixels whose centers fall inside the region
/// blend toward the blurred value with weight `min(1, depth / 2)`, where depth
/// is the distance from the center to the region's nearest edge.
pub fn blur_periocular(img: &Image, ctx: &FaceContext, sigma: f64) -> Image {
    if sigma <= 0.0 {
        return img.clone();
    }
    let (x0, y0, x1, y1) = periocular_region(ctx);
    let (w, h) = (img.width() as i64, img.height() as i64);
    // pixel index range whose centers can lie inside the region
    let px0 = ((x0 - 0.5).floor() as i64).clamp(0, w);
    let px1 = ((x1 - 0.5).ceil() as i64 + 1).clamp(0, w);
    let py0 = ((y0 - 0.5).floor() as i64).clamp(0, h);
    let py1 = ((y1 - 0.5).ceil() as i64 + 1).clamp(0, h);
    if px0 >= px1 || py0 >= py1 {
        return img.clone();
    }
    // blur a crop padded by the kernel radius so borders match a full-image blur
    let r = (3.0 * sigma).ceil() as i64;
    let (cx0, cy0) = ((px0 - r).max(0), (py0 - r).max(0));
    let (cx1, cy1) = ((px1 + r).min(w), (py1 + r).min(h));
    let (cw, ch) = ((cx1 - cx0) as usize, (cy1 - cy0) as usize);
    let channels = img.channels();
    let crop = Image::from_fn(cw as u32, ch as u32, channels, |x, y, c| {
        img.get(x + cx0 as u32, y + cy0 as u32, c)
    })
    .expect("non-empty crop");
    let blurred = blur_planes(&crop, sigma);

    let mut out = img.clone();
    for y in py0..py1 {
        let cy = y as f64 + 0.5;
        for x in px0..px1 {
            let cx = x as f64 + 0.5;
            let depth = (cx - x0).min(x1 - cx).min(cy - y0).min(y1 - cy);
            if depth <= 0.0 {
                continue;
            }
            let alpha = (depth / FEATHER).min(1.0);
            let i = (y - cy0) as usize * cw + (x - cx0) as usize;
            for c in 0..channels {
                let orig = img.get(x as u32, y as u32, c) as f64;
                let v = alpha * blurred[c as usize][i] + (1.0 - alpha) * orig;
                out.set(x as u32, y as u32, c, clamp_u8(v));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::BoundingBox;

    #[test]
    fn kernel_radius_and_normalization() {
        let k = gaussian_kernel(1.5);
        assert_eq!(k.len(), 2 * 5 + 1);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(gaussian_kernel(0.0), vec![1.0]);
    }

    #[test]
    fn zero_sigma_and_constant_image() {
        let img = Image::from_fn(9, 7, 3, |x, y, c| (x * 20 + y * 3 + c as u32) as u8).unwrap();
        assert_eq!(gaussian_blur(&img, 0.0), img);
        let flat = Image::filled(12, 12, 1, 77).unwrap();
        assert_eq!(gaussian_blur(&flat, 3.0), flat);
    }

    #[test]
    fn impulse_matches_analytic_gaussian() {
        let n = 31u32;
        let sigma = 2.0;
        let img = Image::from_fn(n, n, 1, |x, y, _| if x == 15 && y == 15 { 255 } else { 0 }).unwrap();
        let out = gaussian_blur(&img, sigma);
        // Analytic 2D Gaussian with unit mass, independent of the discrete kernel.
        for y in 0..n {
            for x in 0..n {
                let (dx, dy) = (x as f64 - 15.0, y as f64 - 15.0);
                let g = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp() / (std::f64::consts::TAU * sigma * sigma);
                let got = out.get(x, y, 0) as f64;
                assert!((got - 255.0 * g).abs() <= 1.0, "({x},{y}) {got} vs {}", 255.0 * g);
            }
        }
    }

    fn ctx() -> FaceContext {
        let bbox = BoundingBox::new(10.0, 10.0, 44.0, 44.0).unwrap();
        FaceContext::new(bbox, ((16.0, 28.0), (48.0, 28.0)), 24.0).unwrap()
    }

    fn stripes() -> Image {
        Image::from_fn(64, 64, 3, |x, _, _| if (x / 2) % 2 == 0 { 255 } else { 0 }).unwrap()
    }

    #[test]
    fn periocular_is_local() {
        let img = stripes();
        let c = ctx();
        let out = blur_periocular(&img, &c, 5.0);
        let (x0, y0, x1, y1) = periocular_region(&c);
        for y in 0..64 {
            for x in 0..64 {
                let (cx, cy) = (x as f64 + 0.5, y as f64 + 0.5);
                let inside = cx > x0 && cx < x1 && cy > y0 && cy < y1;
                if !inside {
                    for ch in 0..3 {
                        assert_eq!(out.get(x, y, ch), img.get(x, y, ch), "({x},{y}) changed");
                    }
                }
            }
        }
        assert_eq!(blur_periocular(&img, &c, 0.0), img);
    }

    #[test]
    fn periocular_interior_matches_direct_convolution() {
        let img = stripes();
        let out = blur_periocular(&img, &ctx(), 5.0);
        // Direct 2D convolution at one interior pixel, no separability assumed.
        let (px, py) = (32i64, 28i64);
        let k = gaussian_kernel(5.0);
        let r = (k.len() / 2) as i64;
        let mut acc = 0.0;
        for j in -r..=r {
            for i in -r..=r {
                let sx = (px + i).clamp(0, 63) as u32;
                let sy = (py + j).clamp(0, 63) as u32;
                acc += k[(i + r) as usize] * k[(j + r) as usize] * img.get(sx, sy, 0) as f64;
            }
        }
        assert_eq!(out.get(px as u32, py as u32, 0), clamp_u8(acc));
        assert_ne!(out.get(px as u32, py as u32, 0), img.get(px as u32, py as u32, 0));
    }
}
