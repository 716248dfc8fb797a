//! Multi-scale sliding-window evaluation of a cascade over an integral image.
//!
//! Scale space is built by scaling the window and its features; the image is
//! never resampled.

use rayon::prelude::*;

use super::cascade::Cascade;
use super::group::group;
use super::integral::IntegralImage;
use super::{DetectError, Detection, DetectorConfig};
use crate::imaging::{BoundingBox, Image};

/// Windows whose standard deviation falls below this are skipped as flat.
pub const MIN_STDDEV: f64 = 1e-6;

#[derive(Debug, Clone, Copy, Default)]
struct ScaledRect {
    x: u32,
    y: u32,
    w: u32,
    h: u32,
    weight: f64,
}

#[derive(Debug, Clone)]
struct ScaledStump {
    rects: [ScaledRect; 3],
    n: usize,
    threshold: f64,
    left: f64,
    right: f64,
}

#[derive(Debug, Clone)]
struct ScaledStage {
    threshold: f64,
    stumps: Vec<ScaledStump>,
}

/// One scan level: window size, stride and the cascade with its features
/// rounded to that size.
#[derive(Debug, Clone)]
pub(crate) struct ScaleLevel {
    pub win_w: u32,
    pub win_h: u32,
    pub step: u32,
    /// Span actually read from the image, which rounding can push one pixel
    /// past the window.
    pub extent_w: u32,
    pub extent_h: u32,
    norm: ScaledRect,
    inv_area: f64,
    stages: Vec<ScaledStage>,
}

fn round(v: f64) -> u32 {
    v.round().max(0.0) as u32
}

impl ScaleLevel {
    fn geometry(cascade: &Cascade, s: f64, step: u32) -> (u32, u32, u32) {
        let win_w = round(cascade.window_w as f64 * s);
        let win_h = round(cascade.window_h as f64 * s);
        (win_w, win_h, round(step as f64 * s).max(1))
    }

    fn new(cascade: &Cascade, s: f64, step: u32) -> ScaleLevel {
        let (win_w, win_h, step) = Self::geometry(cascade, s, step);
        let norm = ScaledRect {
            x: round(s),
            y: round(s),
            w: round((cascade.window_w as f64 - 2.0) * s).max(1),
            h: round((cascade.window_h as f64 - 2.0) * s).max(1),
            weight: 1.0,
        };
        let inv_area = 1.0 / (norm.w as f64 * norm.h as f64);
        let (mut extent_w, mut extent_h) = (win_w.max(norm.x + norm.w), win_h.max(norm.y + norm.h));
        let stages = cascade
            .stages
            .iter()
            .map(|stage| ScaledStage {
                threshold: stage.threshold,
                stumps: stage
                    .classifiers
                    .iter()
                    .map(|wc| {
                        let mut rects = [ScaledRect::default(); 3];
                        for (k, r) in wc.rects.iter().enumerate() {
                            let sr = ScaledRect {
                                x: round(r.x as f64 * s),
                                y: round(r.y as f64 * s),
                                w: round(r.w as f64 * s).max(1),
                                h: round(r.h as f64 * s).max(1),
                                weight: r.weight * inv_area,
                            };
                            extent_w = extent_w.max(sr.x + sr.w);
                            extent_h = extent_h.max(sr.y + sr.h);
                            rects[k] = sr;
                        }
                        // Rounding changes the relative rectangle areas; rebalance the
                        // first weight so a flat window still sums to zero.
                        let n = wc.rects.len();
                        let area = |r: &ScaledRect| r.w as f64 * r.h as f64;
                        let rest: f64 = rects[1..n].iter().map(|r| r.weight * area(r)).sum();
                        rects[0].weight = -rest / area(&rects[0]);
                        ScaledStump { rects, n, threshold: wc.threshold, left: wc.left, right: wc.right }
                    })
                    .collect(),
            })
            .collect();
        ScaleLevel { win_w, win_h, step, extent_w, extent_h, norm, inv_area, stages }
    }

    fn positions(&self, img_w: u32, img_h: u32) -> (u64, u64) {
        if self.extent_w > img_w || self.extent_h > img_h {
            return (0, 0);
        }
        let n = |free: u32| (free / self.step) as u64 + 1;
        (n(img_w - self.extent_w), n(img_h - self.extent_h))
    }

    fn stddev(&self, ii: &IntegralImage, x: u32, y: u32) -> f64 {
        let r = &self.norm;
        let sum = ii.rect_sum(x + r.x, y + r.y, r.w, r.h) as f64;
        let sq = ii.rect_sqsum(x + r.x, y + r.y, r.w, r.h) as f64;
        let mean = sum * self.inv_area;
        let var = sq * self.inv_area - mean * mean;
        if var > 0.0 {
            var.sqrt()
        } else {
            0.0
        }
    }

    #[inline]
    fn stage_sum(stage: &ScaledStage, ii: &IntegralImage, x: u32, y: u32, stddev: f64) -> f64 {
        let mut total = 0.0;
        for st in &stage.stumps {
            let mut v = 0.0;
            for r in &st.rects[..st.n] {
                v += ii.rect_sum(x + r.x, y + r.y, r.w, r.h) as f64 * r.weight;
            }
            total += if v < st.threshold * stddev { st.left } else { st.right };
        }
        total
    }

    /// Returns whether the window at `(x, y)` passes every stage; `None` for flat windows.
    fn accepts(&self, ii: &IntegralImage, x: u32, y: u32, early_exit: bool) -> Option<bool> {
        let stddev = self.stddev(ii, x, y);
        if stddev < MIN_STDDEV {
            return None;
        }
        let mut accepted = true;
        for stage in &self.stages {
            if Self::stage_sum(stage, ii, x, y, stddev) < stage.threshold {
                accepted = false;
                if early_exit {
                    break;
                }
            }
        }
        Some(accepted)
    }

    fn scan(&self, ii: &IntegralImage, early_exit: bool) -> Vec<BoundingBox> {
        let (nx, ny) = self.positions(ii.width(), ii.height());
        let mut out = Vec::new();
        for j in 0..ny {
            let y = j as u32 * self.step;
            for i in 0..nx {
                let x = i as u32 * self.step;
                if self.accepts(ii, x, y, early_exit) == Some(true) {
                    out.push(BoundingBox { x: x as f64, y: y as f64, w: self.win_w as f64, h: self.win_h as f64 });
                }
            }
        }
        out
    }
}

/// Scale factors `scale_factor^k` whose windows fit the image and the size bounds.
fn scale_factors(cascade: &Cascade, img_w: u32, img_h: u32, cfg: &DetectorConfig) -> Vec<f64> {
    let mut out = Vec::new();
    let mut s = 1.0;
    loop {
        let (w, h, _) = ScaleLevel::geometry(cascade, s, cfg.step);
        if w > img_w || h > img_h || cfg.max_size.is_some_and(|m| w > m || h > m) {
            break;
        }
        if cfg.min_size.map_or(true, |m| w >= m && h >= m) {
            out.push(s);
        }
        s *= cfg.scale_factor;
    }
    out
}

pub(crate) fn levels(cascade: &Cascade, img_w: u32, img_h: u32, cfg: &DetectorConfig) -> Vec<ScaleLevel> {
    scale_factors(cascade, img_w, img_h, cfg).into_iter().map(|s| ScaleLevel::new(cascade, s, cfg.step)).collect()
}

fn raw_windows(cascade: &Cascade, img: &Image, cfg: &DetectorConfig, early_exit: bool) -> Result<Vec<BoundingBox>, DetectError> {
    cfg.validate()?;
    let ii = IntegralImage::new(img);
    let levels = levels(cascade, ii.width(), ii.height(), cfg);
    let per_scale: Vec<Vec<BoundingBox>> = levels.par_iter().map(|l| l.scan(&ii, early_exit)).collect();
    Ok(per_scale.into_iter().flatten().collect())
}

/// Accepted windows before grouping, in scale-major then raster order.
pub fn detect_raw(cascade: &Cascade, img: &Image, cfg: &DetectorConfig) -> Result<Vec<BoundingBox>, DetectError> {
    raw_windows(cascade, img, cfg, true)
}

/// Like [`detect_raw`] but evaluates every stage of every window.
pub fn detect_raw_exhaustive(cascade: &Cascade, img: &Image, cfg: &DetectorConfig) -> Result<Vec<BoundingBox>, DetectError> {
    raw_windows(cascade, img, cfg, false)
}

/// Full detection: raw scan followed by grouping and clipping to the image.
pub fn detect(cascade: &Cascade, img: &Image, cfg: &DetectorConfig) -> Result<Vec<Detection>, DetectError> {
    let raw = detect_raw(cascade, img, cfg)?;
    let (w, h) = (img.width() as f64, img.height() as f64);
    Ok(group(&raw, cfg.min_neighbors)
        .into_iter()
        .filter_map(|d| d.bbox.clip(w, h).map(|bbox| Detection { bbox, ..d }))
        .collect())
}

/// Number of window positions a scan of a `width x height` image visits.
pub fn count_windows(cascade: &Cascade, width: u32, height: u32, cfg: &DetectorConfig) -> Result<u64, DetectError> {
    cfg.validate()?;
    Ok(scale_factors(cascade, width, height, cfg)
        .into_iter()
        .map(|s| {
            let (nx, ny) = ScaleLevel::new(cascade, s, cfg.step).positions(width, height);
            nx * ny
        })
        .sum())
}
