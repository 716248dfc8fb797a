use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CascadeError {
    #[error("malformed cascade XML: {0}")]
    Xml(String),
    #[error("malformed cascade: {0}")]
    Malformed(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("non-stump tree in stage {stage}, classifier {classifier}: only single-split trees are supported")]
    NonStump { stage: usize, classifier: usize },
    #[error("invalid cascade: {0}")]
    Invalid(String),
    #[error("malformed cascade JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot read cascade {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// A weighted rectangle in window coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 5]", into = "[f64; 5]")]
pub struct WeightedRect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
    pub weight: f64,
}

impl TryFrom<[f64; 5]> for WeightedRect {
    type Error = String;

    fn try_from(a: [f64; 5]) -> Result<Self, Self::Error> {
        let coord = |v: f64| {
            if v.fract() == 0.0 && (0.0..=u32::MAX as f64).contains(&v) {
                Ok(v as u32)
            } else {
                Err(format!("rectangle coordinate {v} is not a non-negative integer"))
            }
        };
        Ok(WeightedRect { x: coord(a[0])?, y: coord(a[1])?, w: coord(a[2])?, h: coord(a[3])?, weight: a[4] })
    }
}

impl From<WeightedRect> for [f64; 5] {
    fn from(r: WeightedRect) -> Self {
        [r.x as f64, r.y as f64, r.w as f64, r.h as f64, r.weight]
    }
}

/// Decision stump over one Haar feature: `left` if the normalized feature value
/// is below `threshold`, else `right`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakClassifier {
    pub rects: Vec<WeightedRect>,
    pub threshold: f64,
    pub left: f64,
    pub right: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub threshold: f64,
    pub classifiers: Vec<WeakClassifier>,
}

/// Boosted cascade of Haar-feature stumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cascade {
    pub window_w: u32,
    pub window_h: u32,
    pub stages: Vec<Stage>,
}

/// On-disk JSON wrapper.
#[derive(Serialize, Deserialize)]
struct CascadeDocument {
    format: String,
    version: u32,
    #[serde(flatten)]
    cascade: Cascade,
}

pub const JSON_FORMAT: &str = "faceveil-cascade";
pub const JSON_VERSION: u32 = 1;

const BUNDLED_XML: &str = include_str!("../../assets/haarcascade_frontalface_default.xml");

/// Name of the vendored frontal-face cascade.
pub const BUNDLED_NAME: &str = "haarcascade_frontalface_default";

impl Cascade {
    /// The vendored 24x24 frontal-face cascade (25 stages, 2913 stumps).
    pub fn bundled() -> &'static Cascade {
        static CASCADE: OnceLock<Cascade> = OnceLock::new();
        CASCADE.get_or_init(|| Cascade::from_xml(BUNDLED_XML).expect("vendored cascade parses"))
    }

    /// Parses either supported dialect, chosen by the first non-whitespace character.
    pub fn parse(text: &str) -> Result<Cascade, CascadeError> {
        let trimmed = text.trim_start_matches('\u{feff}').trim_start();
        if trimmed.starts_with('{') {
            Cascade::from_json(trimmed)
        } else {
            Cascade::from_xml(trimmed)
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Cascade, CascadeError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| CascadeError::Io { path: path.display().to_string(), source })?;
        Cascade::parse(&text)
    }

    pub fn from_xml(text: &str) -> Result<Cascade, CascadeError> {
        let c = super::xml::parse(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_json(text: &str) -> Result<Cascade, CascadeError> {
        let doc: CascadeDocument = serde_json::from_str(text)?;
        if doc.format != JSON_FORMAT {
            return Err(CascadeError::Malformed(format!("format tag {:?}, expected {JSON_FORMAT:?}", doc.format)));
        }
        if doc.version != JSON_VERSION {
            return Err(CascadeError::Unsupported(format!("cascade JSON version {}", doc.version)));
        }
        doc.cascade.validate()?;
        Ok(doc.cascade)
    }

    /// Canonical JSON form (compact).
    pub fn to_json(&self) -> String {
        let doc = CascadeDocument { format: JSON_FORMAT.into(), version: JSON_VERSION, cascade: self.clone() };
        serde_json::to_string(&doc).expect("cascades always serialize")
    }

    /// Hex SHA-256 of the canonical JSON form; independent of the source dialect.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn stump_count(&self) -> usize {
        self.stages.iter().map(|s| s.classifiers.len()).sum()
    }

    pub fn validate(&self) -> Result<(), CascadeError> {
        let invalid = |m: String| Err(CascadeError::Invalid(m));
        if self.window_w == 0 || self.window_h == 0 {
            return invalid("window must be at least 1x1".into());
        }
        if self.window_w < 3 || self.window_h < 3 {
            return invalid(format!("window {}x{} too small for variance normalization", self.window_w, self.window_h));
        }
        if self.stages.is_empty() {
            return invalid("no stages".into());
        }
        for (si, stage) in self.stages.iter().enumerate() {
            if !stage.threshold.is_finite() {
                return invalid(format!("stage {si}: non-finite threshold"));
            }
            if stage.classifiers.is_empty() {
                return invalid(format!("stage {si}: no weak classifiers"));
            }
            for (ci, wc) in stage.classifiers.iter().enumerate() {
                if !(2..=3).contains(&wc.rects.len()) {
                    return invalid(format!("stage {si}, classifier {ci}: {} rectangles (expected 2-3)", wc.rects.len()));
                }
                if ![wc.threshold, wc.left, wc.right].iter().all(|v| v.is_finite()) {
                    return invalid(format!("stage {si}, classifier {ci}: non-finite value"));
                }
                for r in &wc.rects {
                    let inside = r.w > 0
                        && r.h > 0
                        && r.x.checked_add(r.w).is_some_and(|e| e <= self.window_w)
                        && r.y.checked_add(r.h).is_some_and(|e| e <= self.window_h);
                    if !inside || !r.weight.is_finite() {
                        return invalid(format!(
                            "stage {si}, classifier {ci}: rectangle {} {} {} {} outside the {}x{} window",
                            r.x, r.y, r.w, r.h, self.window_w, self.window_h
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}
