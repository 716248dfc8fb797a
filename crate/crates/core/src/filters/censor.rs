use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::imaging::Image;

use super::FaceContext;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CensorColor {
    White,
    Black,
}

impl CensorColor {
    pub fn value(self) -> u8 {
        match self {
            CensorColor::White => 255,
            CensorColor::Black => 0,
        }
    }
}

impl FromStr for CensorColor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "white" => Ok(CensorColor::White),
            "black" => Ok(CensorColor::Black),
            _ => Err(format!("unknown color {s:?}")),
        }
    }
}

impl fmt::Display for CensorColor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CensorColor::White => "white",
            CensorColor::Black => "black",
        })
    }
}

/// Euclidean distance from `p` to the segment `a`-`b`.
pub fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
    (p.0 - qx).hypot(p.1 - qy)
}

/// Paints a round-capped bar of width `thickness * iod` along the eye line.
/// A pixel is covered when its center lies within half the width of the segment.
pub fn censor_bar(img: &Image, ctx: &FaceContext, thickness: f64, color: CensorColor) -> Image {
    let half = thickness * ctx.iod / 2.0;
    let (a, b) = ctx.eye_line;
    let (w, h) = (img.width() as i64, img.height() as i64);
    let x0 = ((a.0.min(b.0) - half - 0.5).floor() as i64).clamp(0, w);
    let x1 = ((a.0.max(b.0) + half - 0.5).ceil() as i64 + 1).clamp(0, w);
    let y0 = ((a.1.min(b.1) - half - 0.5).floor() as i64).clamp(0, h);
    let y1 = ((a.1.max(b.1) + half - 0.5).ceil() as i64 + 1).clamp(0, h);
    let mut out = img.clone();
    let v = color.value();
    for y in y0..y1 {
        for x in x0..x1 {
            let p = (x as f64 + 0.5, y as f64 + 0.5);
            if point_segment_distance(p, a, b) <= half {
                for c in 0..img.channels() {
                    out.set(x as u32, y as u32, c, v);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::BoundingBox;

    fn ctx(a: (f64, f64), b: (f64, f64)) -> FaceContext {
        let bbox = BoundingBox::new(0.0, 0.0, 100.0, 100.0).unwrap();
        FaceContext::new(bbox, (a, b), 40.0).unwrap()
    }

    #[test]
    fn distances() {
        assert_eq!(point_segment_distance((5.0, 3.0), (0.0, 0.0), (10.0, 0.0)), 3.0);
        assert_eq!(point_segment_distance((13.0, 4.0), (0.0, 0.0), (10.0, 0.0)), 5.0);
        assert_eq!(point_segment_distance((3.0, 4.0), (0.0, 0.0), (0.0, 0.0)), 5.0);
    }

    #[test]
    fn on_segment_white_and_far_pixels_unchanged() {
        let img = Image::filled(100, 100, 3, 90).unwrap();
        let c = ctx((20.5, 50.5), (80.5, 50.5));
        let out = censor_bar(&img, &c, 0.5, CensorColor::White);
        assert_eq!([out.get(50, 50, 0), out.get(50, 50, 1), out.get(50, 50, 2)], [255; 3]);
        // half-width is 10 px; row 70 is 20 px away
        assert_eq!(out.get(50, 70, 0), 90);
        let black = censor_bar(&img, &c, 0.5, CensorColor::Black);
        assert_eq!(black.get(50, 50, 1), 0);
    }

    #[test]
    fn covered_set_matches_exhaustive_scan() {
        let img = Image::filled(100, 100, 1, 128).unwrap();
        let c = ctx((12.3, 40.7), (77.9, 58.1));
        let out = censor_bar(&img, &c, 0.37, CensorColor::White);
        let half = 0.37 * 40.0 / 2.0;
        for y in 0..100 {
            for x in 0..100 {
                let p = (x as f64 + 0.5, y as f64 + 0.5);
                let (ax, ay, bx, by) = (12.3f64, 40.7f64, 77.9f64, 58.1f64);
                // oracle: sample the segment densely and take the minimum distance
                let mut best = f64::INFINITY;
                for k in 0..=2_000 {
                    let t = k as f64 / 2_000.0;
                    let d = (p.0 - (ax + t * (bx - ax))).hypot(p.1 - (ay + t * (by - ay)));
                    best = best.min(d);
                }
                let exact = point_segment_distance(p, (ax, ay), (bx, by));
                assert!((best - exact).abs() < 0.05);
                assert_eq!(out.get(x, y, 0) == 255, exact <= half, "({x},{y})");
            }
        }
    }
}
