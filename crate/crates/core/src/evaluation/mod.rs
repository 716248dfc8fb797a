//! Corpus loading, accuracy scoring, parameter sweeps and reports.

mod analysis;
mod corpus;
mod evaluate;
mod report;
mod sweep;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::{CascadeError, DetectError};
use crate::filters::FilterError;

pub use analysis::{
    attribute_reference, attribute_table, keypoint_conditional, AttributeGroup, AttributeReference, AttributeTable, KeypointStat,
    KeypointTable, ATTRIBUTE_REFERENCE, KEYPOINT_REFERENCE, UNTAGGED,
};
pub use corpus::{load_manifest, Corpus, CorpusEntry, CorpusError, ManifestLine, RejectedEntry};
pub use evaluate::evaluate;
pub use report::{
    Cell, CorpusSummary, EvalReport, Outcome, OutcomeStatus, Provenance, ReportFormat, SeedRun, CSV_HEADER, MATCHING_RULE,
};
pub use sweep::{sweep, DetectorSpec, SweepSpec, DEFAULT_MAX_CELLS};

/// Which annotated faces of a multi-face image are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringMode {
    #[default]
    PerFace,
    /// Only the first annotated face.
    SingleFace,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringOptions {
    /// A face counts as detected when some detection has IoU strictly above this.
    pub iou_threshold: f64,
    pub mode: ScoringMode,
}

impl Default for ScoringOptions {
    fn default() -> Self {
        ScoringOptions { iou_threshold: 0.1, mode: ScoringMode::PerFace }
    }
}

impl ScoringOptions {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(0.0..1.0).contains(&self.iou_threshold) {
            return Err(EvalError::InvalidOptions(format!("iou_threshold must be in [0, 1), got {}", self.iou_threshold)));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error("empty grid: {0}")]
    EmptyGrid(String),
    #[error("sweep has {cells} runs, more than the limit of {max}")]
    TooManyCells { cells: usize, max: usize },
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Cascade(#[from] CascadeError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid scoring options: {0}")]
    InvalidOptions(String),
}

impl EvalError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        EvalError::Io { path: path.display().to_string(), source }
    }
}
