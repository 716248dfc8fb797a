//! Seeded, serializable image perturbations.
//!
//! A [`FilterSpec`] is the unit of reproducibility: `{"kind", "seed", "params"}`.
//! [`apply`] validates it against the kind's schema ([`catalog`]) and dispatches
//! to the per-kind operation. Every filter is a pure function of
//! `(spec, image, context)`.
//!
//! Coordinates are continuous pixels: sample `(i, j)` covers `[i, i+1) x [j, j+1)`
//! and its center sits at `(i + 0.5, j + 0.5)`.

mod blur;
mod catalog;
mod censor;
mod geometric;
pub mod jpeg;
mod leopard;
mod noise;
mod tone;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{BoundingBox, FaceAnnotation, GeometryError, Image};

pub use blur::{blur_periocular, gaussian_blur, gaussian_kernel, periocular_region};
pub use catalog::{
    catalog, default_grid, reference_accuracy, schema, FilterSchema, ParamSchema, ParamType, ReferenceAccuracy,
};
pub use censor::{censor_bar, point_segment_distance, CensorColor};
pub use geometric::{
    inverse_rotate_point, map_box_boundary, rotate, rotate_box, rotate_point, rotated_canvas, swirl, swirl_point, warp,
    warp_fields, warp_point, ROTATION_VARIANT, SWIRL_VARIANT, WARP_VARIANT,
};
pub use jpeg::{jpeg_recompress, JpegError};
pub use leopard::{leopard_mask, leopard_spots, Softness, SpotScale};
pub use noise::gaussian_noise;
pub use tone::darken;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("context required: filter {0} needs face geometry (eye keypoints)")]
    MissingContext(FilterKind),
    #[error("unknown parameter {name:?} for filter {kind}")]
    UnknownParam { kind: FilterKind, name: String },
    #[error("invalid parameter {name:?} for filter {kind}: {reason}")]
    InvalidParam { kind: FilterKind, name: String, reason: String },
    #[error("invalid face context: {0}")]
    InvalidContext(String),
    #[error(transparent)]
    Jpeg(#[from] JpegError),
}

impl From<GeometryError> for FilterError {
    fn from(e: GeometryError) -> Self {
        FilterError::InvalidContext(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    Noise,
    Blur,
    BlurPeriocular,
    Darken,
    Censor,
    Jpeg,
    Leopard,
    Rotation,
    Swirl,
    Warp,
    Identity,
}

impl FilterKind {
    pub const ALL: [FilterKind; 11] = [
        FilterKind::Noise,
        FilterKind::Blur,
        FilterKind::BlurPeriocular,
        FilterKind::Darken,
        FilterKind::Censor,
        FilterKind::Jpeg,
        FilterKind::Leopard,
        FilterKind::Rotation,
        FilterKind::Swirl,
        FilterKind::Warp,
        FilterKind::Identity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FilterKind::Noise => "noise",
            FilterKind::Blur => "blur",
            FilterKind::BlurPeriocular => "blur_periocular",
            FilterKind::Darken => "darken",
            FilterKind::Censor => "censor",
            FilterKind::Jpeg => "jpeg",
            FilterKind::Leopard => "leopard",
            FilterKind::Rotation => "rotation",
            FilterKind::Swirl => "swirl",
            FilterKind::Warp => "warp",
            FilterKind::Identity => "identity",
        }
    }

    /// Kinds that cannot run without a [`FaceContext`].
    pub fn requires_context(self) -> bool {
        matches!(self, FilterKind::BlurPeriocular | FilterKind::Censor | FilterKind::Leopard)
    }

    /// Kinds that move pixels, so ground truth must be co-transformed (rotation)
    /// or is only approximately preserved (swirl, warp).
    pub fn is_geometric(self) -> bool {
        matches!(self, FilterKind::Rotation | FilterKind::Swirl | FilterKind::Warp)
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FilterKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FilterKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown filter kind {s:?}"))
    }
}

/// A named parameter value: integer, real or enumeration label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Text(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            ParamValue::Int(i) => Some(i as f64),
            ParamValue::Real(r) => Some(r),
            ParamValue::Text(_) => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Real(r) => write!(f, "{r}"),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Real(v)
    }
}

impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Text(v.to_owned())
    }
}

/// Serializable description of one perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub kind: FilterKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub params: BTreeMap<String, ParamValue>,
}

impl FilterSpec {
    pub fn new(kind: FilterKind) -> Self {
        FilterSpec { kind, seed: 0, params: BTreeMap::new() }
    }

    pub fn identity() -> Self {
        Self::new(FilterKind::Identity)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_param(mut self, name: &str, value: impl Into<ParamValue>) -> Self {
        self.params.insert(name.to_owned(), value.into());
        self
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("filter specs always serialize")
    }

    /// Validates parameters against the kind's schema and resolves defaults.
    pub fn resolve(&self) -> Result<Filter, FilterError> {
        Filter::from_spec(self)
    }
}

/// Face geometry needed by region-based filters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceContext {
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    /// Left-eye outer corner to right-eye outer corner.
    pub eye_line: ((f64, f64), (f64, f64)),
    /// Distance between the eye centers.
    pub iod: f64,
}

impl FaceContext {
    pub fn new(bbox: BoundingBox, eye_line: ((f64, f64), (f64, f64)), iod: f64) -> Result<Self, FilterError> {
        bbox.validate()?;
        if !(iod > 0.0) || !iod.is_finite() {
            return Err(FilterError::InvalidContext(format!("inter-ocular distance must be positive, got {iod}")));
        }
        Ok(FaceContext { bbox, eye_line, iod })
    }

    pub fn from_annotation(face: &FaceAnnotation) -> Result<Self, FilterError> {
        let iod = crate::imaging::interocular_distance(face)?;
        FaceContext::new(face.bbox, face.eye_line()?, iod)
    }

    /// Context from two eye-center positions (e.g. user clicks). Outer corners are
    /// placed `OUTER_CORNER_OFFSET * iod` beyond each center along the eye axis.
    pub fn from_eye_centers(bbox: BoundingBox, left: (f64, f64), right: (f64, f64)) -> Result<Self, FilterError> {
        let (dx, dy) = (right.0 - left.0, right.1 - left.1);
        let iod = dx.hypot(dy);
        if !(iod > 0.0) {
            return Err(FilterError::InvalidContext("eye positions coincide".into()));
        }
        let k = Self::OUTER_CORNER_OFFSET;
        let outer_left = (left.0 - k * dx, left.1 - k * dy);
        let outer_right = (right.0 + k * dx, right.1 + k * dy);
        FaceContext::new(bbox, (outer_left, outer_right), iod)
    }

    /// Typical outer-corner distance from the eye center, in units of iod.
    pub const OUTER_CORNER_OFFSET: f64 = 0.3;
}

/// A validated filter with every parameter resolved.
#[derive(Debug, Clone, PartialEq)]
pub enum Filter {
    Identity,
    Noise { sigma: f64 },
    Blur { sigma: f64 },
    BlurPeriocular { sigma: f64 },
    Darken { factor: f64 },
    Censor { thickness: f64, color: CensorColor },
    Jpeg { quality: u8 },
    Leopard { coverage: f64, scale: SpotScale, softness: Softness },
    Rotation { degrees: f64 },
    Swirl { radius: f64, strength: f64, center: Option<(f64, f64)> },
    Warp { amplitude: f64, cell: f64 },
}

impl Filter {
    pub fn from_spec(spec: &FilterSpec) -> Result<Filter, FilterError> {
        let p = catalog::ResolvedParams::new(spec)?;
        Ok(match spec.kind {
            FilterKind::Identity => Filter::Identity,
            FilterKind::Noise => Filter::Noise { sigma: p.real("sigma") },
            FilterKind::Blur => Filter::Blur { sigma: p.real("sigma") },
            FilterKind::BlurPeriocular => Filter::BlurPeriocular { sigma: p.real("sigma") },
            FilterKind::Darken => Filter::Darken { factor: p.real("factor") },
            FilterKind::Censor => Filter::Censor { thickness: p.real("thickness"), color: p.choice("color")? },
            FilterKind::Jpeg => Filter::Jpeg { quality: p.int("quality") as u8 },
            FilterKind::Leopard => Filter::Leopard {
                coverage: p.real("coverage"),
                scale: p.choice("scale")?,
                softness: p.choice("softness")?,
            },
            FilterKind::Rotation => Filter::Rotation { degrees: p.real("degrees") },
            FilterKind::Swirl => {
                let center = match (p.opt_real("center_x"), p.opt_real("center_y")) {
                    (Some(x), Some(y)) => Some((x, y)),
                    (None, None) => None,
                    _ => {
                        return Err(FilterError::InvalidParam {
                            kind: spec.kind,
                            name: "center_x".into(),
                            reason: "center_x and center_y must be given together".into(),
                        })
                    }
                };
                Filter::Swirl { radius: p.real("radius"), strength: p.real("strength"), center }
            }
            FilterKind::Warp => Filter::Warp { amplitude: p.real("amplitude"), cell: p.real("cell") },
        })
    }
}

/// Applies `spec` to `img`. Region filters (blur_periocular, censor, leopard) need `ctx`.
pub fn apply(spec: &FilterSpec, img: &Image, ctx: Option<&FaceContext>) -> Result<Image, FilterError> {
    let filter = spec.resolve()?;
    let need = |kind| ctx.ok_or(FilterError::MissingContext(kind));
    Ok(match filter {
        Filter::Identity => img.clone(),
        Filter::Noise { sigma } => gaussian_noise(img, sigma, spec.seed),
        Filter::Blur { sigma } => gaussian_blur(img, sigma),
        Filter::BlurPeriocular { sigma } => blur_periocular(img, need(spec.kind)?, sigma),
        Filter::Darken { factor } => darken(img, factor),
        Filter::Censor { thickness, color } => censor_bar(img, need(spec.kind)?, thickness, color),
        Filter::Jpeg { quality } => jpeg_recompress(img, quality)?,
        Filter::Leopard { coverage, scale, softness } => {
            leopard_spots(img, need(spec.kind)?, coverage, scale, softness, spec.seed)
        }
        Filter::Rotation { degrees } => rotate(img, degrees),
        Filter::Swirl { radius, strength, center } => {
            swirl(img, swirl_center(center, ctx, img.width(), img.height()), radius, strength)
        }
        Filter::Warp { amplitude, cell } => warp(img, amplitude, cell, spec.seed),
    })
}

/// Explicit center, else the face-box center, else the image center.
fn swirl_center(center: Option<(f64, f64)>, ctx: Option<&FaceContext>, width: u32, height: u32) -> (f64, f64) {
    center.or_else(|| ctx.map(|c| c.bbox.center())).unwrap_or((width as f64 / 2.0, height as f64 / 2.0))
}

/// Maps a ground-truth box on a `width x height` input into the coordinates of
/// the filtered output. Only geometric filters move boxes.
pub fn transform_box(
    spec: &FilterSpec,
    bbox: &BoundingBox,
    width: u32,
    height: u32,
    ctx: Option<&FaceContext>,
) -> Result<BoundingBox, FilterError> {
    Ok(match spec.resolve()? {
        Filter::Rotation { degrees } => rotate_box(bbox, degrees, width, height),
        Filter::Swirl { radius, strength, center } => {
            let c = swirl_center(center, ctx, width, height);
            map_box_boundary(bbox, |p| swirl_point(p, c, radius, strength))
        }
        Filter::Warp { amplitude, cell } if amplitude != 0.0 => {
            let fields = warp_fields(spec.seed, cell);
            map_box_boundary(bbox, |p| warp_point(p, amplitude, &fields))
        }
        _ => *bbox,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> FaceContext {
        let bbox = BoundingBox::new(10.0, 10.0, 40.0, 40.0).unwrap();
        FaceContext::new(bbox, ((18.0, 25.0), (42.0, 25.0)), 18.0).unwrap()
    }

    fn test_image() -> Image {
        Image::from_fn(64, 64, 3, |x, y, c| ((x * 7 + y * 3 + c as u32 * 50) % 256) as u8).unwrap()
    }

    #[test]
    fn identity_is_byte_identical() {
        let img = test_image();
        assert_eq!(apply(&FilterSpec::identity(), &img, None).unwrap(), img);
    }

    #[test]
    fn censor_requires_context() {
        let spec = FilterSpec::new(FilterKind::Censor);
        let err = apply(&spec, &test_image(), None).unwrap_err();
        assert_eq!(err, FilterError::MissingContext(FilterKind::Censor));
        assert!(err.to_string().starts_with("context required"));
        assert!(apply(&spec, &test_image(), Some(&ctx())).is_ok());
    }

    #[test]
    fn spec_json_shape() {
        let spec = FilterSpec::from_json(r#"{"kind":"leopard","seed":7,"params":{"coverage":0.4,"scale":"small"}}"#)
            .unwrap();
        assert_eq!(spec.kind, FilterKind::Leopard);
        assert_eq!(spec.params["coverage"], ParamValue::Real(0.4));
        assert_eq!(spec.params["scale"], ParamValue::Text("small".into()));
        assert_eq!(FilterSpec::from_json(&spec.to_json()).unwrap(), spec);
        let v: serde_json::Value = serde_json::from_str(&spec.to_json()).unwrap();
        assert_eq!(v["kind"], "leopard");
        assert_eq!(v["seed"], 7);
    }

    #[test]
    fn invalid_params_rejected() {
        let bad = FilterSpec::new(FilterKind::Darken).with_param("factor", 1.5);
        assert!(matches!(bad.resolve(), Err(FilterError::InvalidParam { .. })));
        let unknown = FilterSpec::new(FilterKind::Darken).with_param("gain", 0.5);
        assert!(matches!(unknown.resolve(), Err(FilterError::UnknownParam { .. })));
        let wrong_type = FilterSpec::new(FilterKind::Censor).with_param("color", 3i64);
        assert!(matches!(wrong_type.resolve(), Err(FilterError::InvalidParam { .. })));
        let bad_choice = FilterSpec::new(FilterKind::Censor).with_param("color", "pink");
        assert!(matches!(bad_choice.resolve(), Err(FilterError::InvalidParam { .. })));
        let q = FilterSpec::new(FilterKind::Jpeg).with_param("quality", 0i64);
        assert!(matches!(q.resolve(), Err(FilterError::InvalidParam { .. })));
        let frac_q = FilterSpec::new(FilterKind::Jpeg).with_param("quality", 50.5);
        assert!(matches!(frac_q.resolve(), Err(FilterError::InvalidParam { .. })));
        let half_center = FilterSpec::new(FilterKind::Swirl).with_param("center_x", 3.0);
        assert!(matches!(half_center.resolve(), Err(FilterError::InvalidParam { .. })));
    }

    #[test]
    fn integers_accepted_for_real_params() {
        let spec = FilterSpec::new(FilterKind::Noise).with_param("sigma", 50i64);
        assert_eq!(spec.resolve().unwrap(), Filter::Noise { sigma: 50.0 });
        let q = FilterSpec::new(FilterKind::Jpeg).with_param("quality", 75.0);
        assert_eq!(q.resolve().unwrap(), Filter::Jpeg { quality: 75 });
    }

    #[test]
    fn kinds_round_trip_through_strings() {
        for k in FilterKind::ALL {
            assert_eq!(k.as_str().parse::<FilterKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{k}\""));
        }
    }

    #[test]
    fn context_from_eye_centers() {
        let bbox = BoundingBox::new(0.0, 0.0, 100.0, 100.0).unwrap();
        let c = FaceContext::from_eye_centers(bbox, (30.0, 40.0), (70.0, 40.0)).unwrap();
        assert_eq!(c.iod, 40.0);
        assert_eq!(c.eye_line, ((18.0, 40.0), (82.0, 40.0)));
        assert!(FaceContext::from_eye_centers(bbox, (3.0, 3.0), (3.0, 3.0)).is_err());
    }

    proptest::proptest! {
        #[test]
        fn spec_serialization_round_trips(
            kind_idx in 0usize..11,
            seed in proptest::num::u64::ANY,
            real in -1e6f64..1e6,
            int in proptest::num::i64::ANY,
            text in "[a-z_]{0,12}",
        ) {
            let spec = FilterSpec::new(FilterKind::ALL[kind_idx])
                .with_seed(seed)
                .with_param("a", real)
                .with_param("b", int)
                .with_param("c", text.as_str());
            let back = FilterSpec::from_json(&spec.to_json()).unwrap();
            proptest::prop_assert_eq!(back, spec);
        }
    }
}
