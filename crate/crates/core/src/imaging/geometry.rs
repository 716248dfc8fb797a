use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("box must have positive width and height, got {w}x{h}")]
    EmptyBox { w: f64, h: f64 },
    #[error("duplicate keypoint name {0:?}")]
    DuplicateKeypoint(String),
    #[error("missing keypoints for the {0} eye")]
    MissingEye(&'static str),
    #[error("eye centers coincide (inter-ocular distance is zero)")]
    DegenerateEyes,
}

/// Axis-aligned box anchored at its top-left corner, in real-valued pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        let b = BoundingBox { x, y, w, h };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        // NaN fails both comparisons.
        if self.w > 0.0 && self.h > 0.0 && self.x.is_finite() && self.y.is_finite() {
            Ok(())
        } else {
            Err(GeometryError::EmptyBox { w: self.w, h: self.h })
        }
    }

    /// Area from the edge coordinates, so a box's area equals its self-intersection bit for bit.
    pub fn area(&self) -> f64 {
        (self.right() - self.x) * (self.bottom() - self.y)
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    /// Area of the overlap with `other`, zero when disjoint.
    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let iw = self.right().min(other.right()) - self.x.max(other.x);
        let ih = self.bottom().min(other.bottom()) - self.y.max(other.y);
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }

    /// Clips to `[0, width] x [0, height]`; `None` when nothing remains.
    pub fn clip(&self, width: f64, height: f64) -> Option<BoundingBox> {
        let x0 = self.x.max(0.0);
        let y0 = self.y.max(0.0);
        let x1 = self.right().min(width);
        let y1 = self.bottom().min(height);
        (x1 > x0 && y1 > y0).then(|| BoundingBox { x: x0, y: y0, w: x1 - x0, h: y1 - y0 })
    }

    /// Smallest axis-aligned box containing all `points`.
    pub fn hull(points: &[(f64, f64)]) -> Option<BoundingBox> {
        let (mut x0, mut y0) = (f64::INFINITY, f64::INFINITY);
        let (mut x1, mut y1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &(x, y) in points {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        BoundingBox::new(x0, y0, x1 - x0, y1 - y0).ok()
    }

    pub fn corners(&self) -> [(f64, f64); 4] {
        [
            (self.x, self.y),
            (self.right(), self.y),
            (self.right(), self.bottom()),
            (self.x, self.bottom()),
        ]
    }
}

/// Intersection over union of two valid boxes, using continuous areas.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// True iff some detection overlaps `truth` with IoU strictly above `threshold`.
pub fn is_true_accept(detections: &[BoundingBox], truth: &BoundingBox, threshold: f64) -> bool {
    detections.iter().any(|d| iou(d, truth) > threshold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub name: String,
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub occluded: bool,
}

/// Ground-truth face: box, optional named keypoints and boolean attribute tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceAnnotation {
    #[serde(rename = "box", with = "box_as_array")]
    pub bbox: BoundingBox,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub keypoints: Vec<Keypoint>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attributes: BTreeMap<String, bool>,
}

/// Which side of the image an eye keypoint belongs to, from its name.
///
/// Accepted names: `eye_left`, `eye_right`, and `eye_<part>_left` / `eye_<part>_right`
/// (e.g. `eye_outer_left`). Sides refer to the image, not the subject.
fn eye_side(name: &str) -> Option<EyeSide> {
    if !name.starts_with("eye_") {
        return None;
    }
    if name.ends_with("_left") {
        Some(EyeSide::Left)
    } else if name.ends_with("_right") {
        Some(EyeSide::Right)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EyeSide {
    Left,
    Right,
}

impl FaceAnnotation {
    pub fn new(bbox: BoundingBox) -> Self {
        FaceAnnotation { bbox, keypoints: Vec::new(), attributes: BTreeMap::new() }
    }

    pub fn keypoint(&self, name: &str) -> Option<&Keypoint> {
        self.keypoints.iter().find(|k| k.name == name)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        self.bbox.validate()?;
        let mut seen = HashSet::new();
        for k in &self.keypoints {
            if !seen.insert(k.name.as_str()) {
                return Err(GeometryError::DuplicateKeypoint(k.name.clone()));
            }
        }
        let has_left = self.keypoints.iter().any(|k| eye_side(&k.name) == Some(EyeSide::Left));
        let has_right = self.keypoints.iter().any(|k| eye_side(&k.name) == Some(EyeSide::Right));
        if has_left && has_right {
            interocular_distance(self)?;
        }
        Ok(())
    }

    fn eye_points(&self, side: EyeSide) -> Vec<(f64, f64)> {
        self.keypoints
            .iter()
            .filter(|k| eye_side(&k.name) == Some(side))
            .map(|k| (k.x, k.y))
            .collect()
    }

    /// Mean of the eye's corner keypoints.
    pub fn eye_center(&self, left: bool) -> Result<(f64, f64), GeometryError> {
        let side = if left { EyeSide::Left } else { EyeSide::Right };
        let pts = self.eye_points(side);
        if pts.is_empty() {
            return Err(GeometryError::MissingEye(if left { "left" } else { "right" }));
        }
        let n = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(ax, ay), &(x, y)| (ax + x, ay + y));
        Ok((sx / n, sy / n))
    }

    /// Outermost available point of each eye: the outer corner when annotated,
    /// otherwise the eye point farthest from the other eye's center.
    pub fn eye_line(&self) -> Result<((f64, f64), (f64, f64)), GeometryError> {
        let lc = self.eye_center(true)?;
        let rc = self.eye_center(false)?;
        let pick = |side: EyeSide, other: (f64, f64), outer: &str| {
            if let Some(k) = self.keypoint(outer) {
                return (k.x, k.y);
            }
            self.eye_points(side)
                .into_iter()
                .max_by(|a, b| {
                    let da = (a.0 - other.0).hypot(a.1 - other.1);
                    let db = (b.0 - other.0).hypot(b.1 - other.1);
                    da.total_cmp(&db)
                })
                .expect("eye center exists so the side has points")
        };
        Ok((pick(EyeSide::Left, rc, "eye_outer_left"), pick(EyeSide::Right, lc, "eye_outer_right")))
    }
}

/// Euclidean distance between the two eye centers.
pub fn interocular_distance(face: &FaceAnnotation) -> Result<f64, GeometryError> {
    let (lx, ly) = face.eye_center(true)?;
    let (rx, ry) = face.eye_center(false)?;
    let d = (lx - rx).hypot(ly - ry);
    if d > 0.0 {
        Ok(d)
    } else {
        Err(GeometryError::DegenerateEyes)
    }
}

pub(crate) mod box_as_array {
    use super::BoundingBox;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(b: &BoundingBox, s: S) -> Result<S::Ok, S::Error> {
        [b.x, b.y, b.w, b.h].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BoundingBox, D::Error> {
        let [x, y, w, h] = <[f64; 4]>::deserialize(d)?;
        Ok(BoundingBox { x, y, w, h })
    }
}
