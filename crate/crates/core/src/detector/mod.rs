//! Haar-cascade face detection and an adapter for external detectors.

mod cascade;
mod external;
mod group;
mod integral;
mod scan;
mod xml;

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{BoundingBox, Image};

pub use cascade::{Cascade, CascadeError, Stage, WeakClassifier, WeightedRect, BUNDLED_NAME, JSON_FORMAT, JSON_VERSION};
pub use external::{Endpoint, ExternalConfig, ExternalDetector, ImageTransport, DEFAULT_TIMEOUT};
pub use group::{group, partition, similar, SIMILARITY_EPS};
pub use integral::IntegralImage;
pub use scan::{count_windows, detect, detect_raw, detect_raw_exhaustive, MIN_STDDEV};

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("invalid detector config: {0}")]
    InvalidConfig(String),
    #[error("cannot start detector: {0}")]
    Spawn(String),
    #[error("cannot reach detector: {0}")]
    Connect(String),
    #[error("detector protocol violation: {0}")]
    Protocol(String),
    #[error("detector timed out after {0:?}")]
    Timeout(Duration),
    #[error("cannot hand image to detector: {0}")]
    Image(String),
}

impl DetectError {
    /// Stable machine-readable name of the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            DetectError::InvalidConfig(_) => "invalid_config",
            DetectError::Spawn(_) => "spawn",
            DetectError::Connect(_) => "connect",
            DetectError::Protocol(_) => "protocol",
            DetectError::Timeout(_) => "timeout",
            DetectError::Image(_) => "image",
        }
    }
}

/// One face found by a detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    /// Number of raw windows merged into this detection (1 for external detectors).
    pub support: usize,
}

/// Scan parameters for the built-in detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub scale_factor: f64,
    /// Window stride at the base scale; scaled with the window.
    pub step: u32,
    pub min_neighbors: usize,
    pub min_size: Option<u32>,
    pub max_size: Option<u32>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig { scale_factor: 1.1, step: 2, min_neighbors: 3, min_size: None, max_size: None }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        if !(self.scale_factor.is_finite() && self.scale_factor > 1.0) {
            return Err(DetectError::InvalidConfig(format!("scale_factor must be > 1, got {}", self.scale_factor)));
        }
        if self.step == 0 {
            return Err(DetectError::InvalidConfig("step must be at least 1".into()));
        }
        if let (Some(lo), Some(hi)) = (self.min_size, self.max_size) {
            if lo > hi {
                return Err(DetectError::InvalidConfig(format!("min_size {lo} exceeds max_size {hi}")));
            }
        }
        Ok(())
    }
}

/// Anything that maps an image to face boxes.
pub trait FaceDetector: Send + Sync {
    /// Human-readable identity recorded in report provenance.
    fn id(&self) -> String;

    fn detect(&self, img: &Image) -> Result<Vec<Detection>, DetectError>;

    /// SHA-256 of the cascade in canonical form, for cascade-based detectors.
    fn cascade_sha256(&self) -> Option<String> {
        None
    }
}

/// The built-in cascade detector.
#[derive(Debug, Clone)]
pub struct BuiltinDetector {
    cascade: Arc<Cascade>,
    config: DetectorConfig,
    name: String,
    fingerprint: String,
}

impl BuiltinDetector {
    pub fn new(cascade: Arc<Cascade>, config: DetectorConfig, name: impl Into<String>) -> Result<Self, DetectError> {
        config.validate()?;
        let fingerprint = cascade.fingerprint();
        Ok(BuiltinDetector { cascade, config, name: name.into(), fingerprint })
    }

    /// The vendored frontal-face cascade with the given config.
    pub fn bundled(config: DetectorConfig) -> Result<Self, DetectError> {
        Self::new(Arc::new(Cascade::bundled().clone()), config, BUNDLED_NAME)
    }

    pub fn cascade(&self) -> &Cascade {
        &self.cascade
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }
}

impl FaceDetector for BuiltinDetector {
    fn id(&self) -> String {
        format!("builtin:{}", self.name)
    }

    fn detect(&self, img: &Image) -> Result<Vec<Detection>, DetectError> {
        detect(&self.cascade, img, &self.config)
    }

    fn cascade_sha256(&self) -> Option<String> {
        Some(self.fingerprint.clone())
    }
}

impl<T: FaceDetector + ?Sized> FaceDetector for Arc<T> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn detect(&self, img: &Image) -> Result<Vec<Detection>, DetectError> {
        (**self).detect(img)
    }

    fn cascade_sha256(&self) -> Option<String> {
        (**self).cascade_sha256()
    }
}
