use crate::imaging::{clamp_u8, BoundingBox, Image};
use crate::stochastic::{derive_seed, SimplexField};

/// Variant labels carried into report provenance.
pub const ROTATION_VARIANT: &str = "rotate-ccw-aabb-bilinear-v1";
pub const SWIRL_VARIANT: &str = "swirl-quadratic-falloff-v1";
pub const WARP_VARIANT: &str = "simplex-displacement-v1";

/// Bilinear sample at continuous position `(x, y)` with clamp-to-edge borders.
fn bilinear(img: &Image, x: f64, y: f64, c: u8) -> f64 {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let (fx, fy) = (x - 0.5, y - 0.5);
    let (ix, iy) = (fx.floor(), fy.floor());
    let (tx, ty) = (fx - ix, fy - iy);
    let (ix, iy) = (ix as i64, iy as i64);
    let at = |xx: i64, yy: i64| img.get(xx.clamp(0, w - 1) as u32, yy.clamp(0, h - 1) as u32, c) as f64;
    let top = at(ix, iy) * (1.0 - tx) + at(ix + 1, iy) * tx;
    let bottom = at(ix, iy + 1) * (1.0 - tx) + at(ix + 1, iy + 1) * tx;
    top * (1.0 - ty) + bottom * ty
}

fn normalized_degrees(degrees: f64) -> f64 {
    let d = degrees.rem_euclid(360.0);
    if d >= 360.0 {
        0.0
    } else {
        d
    }
}

fn snap_up(v: f64) -> u32 {
    let r = v.round();
    let n = if (v - r).abs() < 1e-9 { r } else { v.ceil() };
    n.max(1.0) as u32
}

/// Output canvas of [`rotate`]: the axis-aligned bounding box of the rotated input.
pub fn rotated_canvas(width: u32, height: u32, degrees: f64) -> (u32, u32) {
    let d = normalized_degrees(degrees);
    if d == 90.0 || d == 270.0 {
        return (height, width);
    }
    if d == 0.0 || d == 180.0 {
        return (width, height);
    }
    let t = d.to_radians();
    let (s, c) = (libm::sin(t).abs(), libm::cos(t).abs());
    let (w, h) = (width as f64, height as f64);
    (snap_up(w * c + h * s), snap_up(w * s + h * c))
}

/// Maps a source-image point into the rotated canvas (counter-clockwise on screen).
pub fn rotate_point(p: (f64, f64), degrees: f64, width: u32, height: u32) -> (f64, f64) {
    let (ow, oh) = rotated_canvas(width, height, degrees);
    let t = normalized_degrees(degrees).to_radians();
    let (s, c) = (libm::sin(t), libm::cos(t));
    let (dx, dy) = (p.0 - width as f64 / 2.0, p.1 - height as f64 / 2.0);
    (ow as f64 / 2.0 + dx * c + dy * s, oh as f64 / 2.0 - dx * s + dy * c)
}

/// Inverse of [`rotate_point`]: maps a canvas point back into the source image.
pub fn inverse_rotate_point(q: (f64, f64), degrees: f64, width: u32, height: u32) -> (f64, f64) {
    let (ow, oh) = rotated_canvas(width, height, degrees);
    let t = normalized_degrees(degrees).to_radians();
    let (s, c) = (libm::sin(t), libm::cos(t));
    let (dx, dy) = (q.0 - ow as f64 / 2.0, q.1 - oh as f64 / 2.0);
    (width as f64 / 2.0 + dx * c - dy * s, height as f64 / 2.0 + dx * s + dy * c)
}

/// Co-rotates a ground-truth box: transforms the four corners and takes their hull.
pub fn rotate_box(b: &BoundingBox, degrees: f64, width: u32, height: u32) -> BoundingBox {
    let pts = b.corners().map(|p| rotate_point(p, degrees, width, height));
    BoundingBox::hull(&pts).expect("rotation preserves positive area")
}

/// Rotates about the image center onto the bounding canvas. Right angles are exact
/// sample permutations; other angles use bilinear sampling with black outside the source.
pub fn rotate(img: &Image, degrees: f64) -> Image {
    let d = normalized_degrees(degrees);
    let (w, h) = (img.width(), img.height());
    let ch = img.channels();
    let right_angle = |ow, oh, src: &dyn Fn(u32, u32) -> (u32, u32)| {
        Image::from_fn(ow, oh, ch, |x, y, c| {
            let (sx, sy) = src(x, y);
            img.get(sx, sy, c)
        })
        .expect("valid dimensions")
    };
    if d == 0.0 {
        return img.clone();
    }
    if d == 90.0 {
        return right_angle(h, w, &|x, y| (w - 1 - y, x));
    }
    if d == 180.0 {
        return right_angle(w, h, &|x, y| (w - 1 - x, h - 1 - y));
    }
    if d == 270.0 {
        return right_angle(h, w, &|x, y| (y, h - 1 - x));
    }
    let (ow, oh) = rotated_canvas(w, h, d);
    let mut out = Image::filled(ow, oh, ch, 0).expect("valid dimensions");
    for y in 0..oh {
        for x in 0..ow {
            let (sx, sy) = inverse_rotate_point((x as f64 + 0.5, y as f64 + 0.5), d, w, h);
            if sx < 0.0 || sy < 0.0 || sx > w as f64 || sy > h as f64 {
                continue;
            }
            for c in 0..ch {
                out.set(x, y, c, clamp_u8(bilinear(img, sx, sy, c)));
            }
        }
    }
    out
}

/// Inverse-mapped swirl: the output pixel at distance `d < radius` from `center`
/// samples the source rotated by `strength * (1 - d / radius)^2` radians.
pub fn swirl(img: &Image, center: (f64, f64), radius: f64, strength: f64) -> Image {
    if strength == 0.0 {
        return img.clone();
    }
    let mut out = img.clone();
    for y in 0..img.height() {
        for x in 0..img.width() {
            let (dx, dy) = (x as f64 + 0.5 - center.0, y as f64 + 0.5 - center.1);
            let d = dx.hypot(dy);
            if d >= radius {
                continue;
            }
            let k = 1.0 - d / radius;
            let a = strength * k * k;
            let (s, c) = (libm::sin(a), libm::cos(a));
            let (sx, sy) = (center.0 + dx * c - dy * s, center.1 + dx * s + dy * c);
            for ch in 0..img.channels() {
                out.set(x, y, ch, clamp_u8(bilinear(img, sx, sy, ch)));
            }
        }
    }
    out
}

/// The two displacement fields used by [`warp`], seeded from children 0 and 1 of `seed`.
pub fn warp_fields(seed: u64, cell: f64) -> (SimplexField, SimplexField) {
    let fx = SimplexField::new(derive_seed(seed, 0), cell).expect("cell validated positive");
    let fy = SimplexField::new(derive_seed(seed, 1), cell).expect("cell validated positive");
    (fx, fy)
}

/// Smooth random displacement: each output pixel samples the source at
/// `p + amplitude * (fx(p), fy(p))`, clamp-to-edge.
pub fn warp(img: &Image, amplitude: f64, cell: f64, seed: u64) -> Image {
    if amplitude == 0.0 {
        return img.clone();
    }
    let (fx, fy) = warp_fields(seed, cell);
    let mut out = img.clone();
    for y in 0..img.height() {
        for x in 0..img.width() {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let (sx, sy) = (px + amplitude * fx.sample(px, py), py + amplitude * fy.sample(px, py));
            for c in 0..img.channels() {
                out.set(x, y, c, clamp_u8(bilinear(img, sx, sy, c)));
            }
        }
    }
    out
}

/// Forward map of [`swirl`]: where a source point lands in the output.
pub fn swirl_point(p: (f64, f64), center: (f64, f64), radius: f64, strength: f64) -> (f64, f64) {
    let (dx, dy) = (p.0 - center.0, p.1 - center.1);
    let d = dx.hypot(dy);
    if strength == 0.0 || d >= radius {
        return p;
    }
    let k = 1.0 - d / radius;
    let a = -strength * k * k;
    let (s, c) = (libm::sin(a), libm::cos(a));
    (center.0 + dx * c - dy * s, center.1 + dx * s + dy * c)
}

/// Forward map of [`warp`], solved by fixed-point iteration on `q + amplitude * f(q) = p`.
pub fn warp_point(p: (f64, f64), amplitude: f64, fields: &(SimplexField, SimplexField)) -> (f64, f64) {
    let mut q = p;
    for _ in 0..32 {
        q = (p.0 - amplitude * fields.0.sample(q.0, q.1), p.1 - amplitude * fields.1.sample(q.0, q.1));
    }
    q
}

/// Hull of a box's boundary, sampled at 16 points per edge, after mapping through `f`.
pub fn map_box_boundary(b: &BoundingBox, f: impl Fn((f64, f64)) -> (f64, f64)) -> BoundingBox {
    const N: usize = 16;
    let mut pts = Vec::with_capacity(4 * N);
    for i in 0..N {
        let t = i as f64 / N as f64;
        pts.push(f((b.x + t * b.w, b.y)));
        pts.push(f((b.right(), b.y + t * b.h)));
        pts.push(f((b.right() - t * b.w, b.bottom())));
        pts.push(f((b.x, b.bottom() - t * b.h)));
    }
    BoundingBox::hull(&pts).unwrap_or(*b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(w: u32, h: u32) -> Image {
        Image::from_fn(w, h, 3, |x, y, c| ((x * 13 + y * 7 + c as u32 * 40) % 256) as u8).unwrap()
    }

    #[test]
    fn zero_degrees_is_identity() {
        let img = gradient(9, 5);
        assert_eq!(rotate(&img, 0.0), img);
        assert_eq!(rotate(&img, 360.0), img);
        assert_eq!(rotate(&img, -720.0), img);
    }

    #[test]
    fn right_angles_swap_dimensions_and_compose() {
        let img = gradient(9, 5);
        let r = rotate(&img, 90.0);
        assert_eq!((r.width(), r.height()), (5, 9));
        // top-right corner moves to top-left under a counter-clockwise turn
        assert_eq!(r.get(0, 0, 0), img.get(8, 0, 0));
        let mut cur = img.clone();
        for _ in 0..4 {
            cur = rotate(&cur, 90.0);
        }
        assert_eq!(cur, img);
        assert_eq!(rotate(&rotate(&img, 90.0), 270.0), img);
        assert_eq!(rotate(&rotate(&img, 180.0), 180.0), img);
        assert_eq!(rotate(&img, -90.0), rotate(&img, 270.0));
    }

    #[test]
    fn general_angle_agrees_with_fast_path() {
        let img = gradient(12, 8);
        let slow = rotate(&img, 90.0 + 1e-12);
        let fast = rotate(&img, 90.0);
        assert_eq!((slow.width(), slow.height()), (fast.width(), fast.height()));
        for (a, b) in slow.samples().iter().zip(fast.samples()) {
            assert!((*a as i32 - *b as i32).abs() <= 1);
        }
    }

    #[test]
    fn canvas_is_bounding_box() {
        assert_eq!(rotated_canvas(100, 50, 45.0), (107, 107));
        assert_eq!(rotated_canvas(100, 50, 90.0), (50, 100));
        assert_eq!(rotated_canvas(100, 50, 30.0), (112, 94));
    }

    #[test]
    fn point_round_trip() {
        for deg in [0.0, 17.0, 45.0, 90.0, 133.3, 270.0, -40.0] {
            let p = (13.7, 42.1);
            let q = rotate_point(p, deg, 64, 48);
            let back = inverse_rotate_point(q, deg, 64, 48);
            assert!((back.0 - p.0).abs() < 1e-9 && (back.1 - p.1).abs() < 1e-9, "{deg}");
        }
        let q = rotate_point((64.0, 0.0), 90.0, 64, 48);
        assert!((q.0 - 0.0).abs() < 1e-9 && (q.1 - 0.0).abs() < 1e-9);
    }

    #[test]
    fn box_center_survives_rotation_and_back() {
        let b = BoundingBox::new(10.0, 12.0, 20.0, 16.0).unwrap();
        let (w, h) = (64, 48);
        let r = rotate_box(&b, 30.0, w, h);
        let (ow, oh) = rotated_canvas(w, h, 30.0);
        let c = inverse_rotate_point(r.center(), 30.0, w, h);
        assert!((c.0 - b.center().0).abs() < 1.0 && (c.1 - b.center().1).abs() < 1.0);
        assert!(r.w > b.w && r.right() <= ow as f64 + 1e-9 && r.bottom() <= oh as f64 + 1e-9);
    }

    #[test]
    fn swirl_properties() {
        let img = gradient(41, 41);
        assert_eq!(swirl(&img, (20.5, 20.5), 15.0, 0.0), img);
        let out = swirl(&img, (20.5, 20.5), 15.0, 3.0);
        assert_ne!(out, img);
        // center pixel fixed
        assert_eq!(out.get(20, 20, 0), img.get(20, 20, 0));
        for y in 0..41u32 {
            for x in 0..41u32 {
                let d = (x as f64 + 0.5 - 20.5).hypot(y as f64 + 0.5 - 20.5);
                if d >= 15.0 {
                    assert_eq!(out.get(x, y, 1), img.get(x, y, 1));
                }
            }
        }
    }

    #[test]
    fn warp_properties() {
        let img = gradient(48, 48);
        assert_eq!(warp(&img, 0.0, 16.0, 5), img);
        let a = warp(&img, 4.0, 16.0, 5);
        assert_eq!(a, warp(&img, 4.0, 16.0, 5));
        assert_ne!(a, warp(&img, 4.0, 16.0, 6));
        let (fx, fy) = warp_fields(5, 16.0);
        let amp = 4.0;
        for y in 0..48 {
            for x in 0..48 {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                let d = (amp * fx.sample(px, py)).hypot(amp * fy.sample(px, py));
                assert!(d <= amp * std::f64::consts::SQRT_2 + 1e-12);
            }
        }
    }

    #[test]
    fn swirl_point_inverts_the_sampling_map() {
        let (c, r, k) = ((40.0, 30.0), 25.0, 3.0);
        for p in [(41.0, 33.0), (50.0, 20.0), (30.0, 45.0), (90.0, 90.0)] {
            let q = swirl_point(p, c, r, k);
            let (dx, dy) = (q.0 - c.0, q.1 - c.1);
            let d = dx.hypot(dy);
            let back = if d >= r {
                q
            } else {
                let a = k * (1.0 - d / r).powi(2);
                (c.0 + dx * a.cos() - dy * a.sin(), c.1 + dx * a.sin() + dy * a.cos())
            };
            assert!((back.0 - p.0).abs() < 1e-9 && (back.1 - p.1).abs() < 1e-9);
        }
    }

    #[test]
    fn warp_point_solves_the_displacement_equation() {
        let fields = warp_fields(5, 32.0);
        for p in [(10.0, 10.0), (33.3, 70.1), (64.0, 2.0)] {
            let q = warp_point(p, 4.0, &fields);
            let back = (q.0 + 4.0 * fields.0.sample(q.0, q.1), q.1 + 4.0 * fields.1.sample(q.0, q.1));
            assert!((back.0 - p.0).abs() < 1e-6 && (back.1 - p.1).abs() < 1e-6, "{p:?} {back:?}");
        }
    }

    proptest::proptest! {
        #[test]
        fn rotated_box_center_maps_back(
            x in 0.0f64..80.0, y in 0.0f64..60.0, w in 1.0f64..40.0, h in 1.0f64..40.0,
            deg in -720.0f64..720.0, iw in 20u32..200, ih in 20u32..200,
        ) {
            let b = BoundingBox { x, y, w, h };
            let (cx, cy) = rotate_box(&b, deg, iw, ih).center();
            let (bx, by) = inverse_rotate_point((cx, cy), deg, iw, ih);
            let (ox, oy) = b.center();
            proptest::prop_assert!((bx - ox).hypot(by - oy) <= 1.0);
        }
    }
}
