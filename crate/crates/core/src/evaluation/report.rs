use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EvalError, ScoringOptions};
use crate::filters::{FilterKind, FilterSpec, ParamValue, ROTATION_VARIANT, SWIRL_VARIANT, WARP_VARIANT};
use crate::imaging::BoundingBox;
use crate::stochastic::MASK_GENERATOR_VARIANT;

/// Fixed CSV header of [`EvalReport::to_csv`].
pub const CSV_HEADER: [&str; 8] =
    ["filter_kind", "param_json", "seed", "n_images", "n_detected", "n_skipped", "n_not_evaluated", "accuracy"];

/// Matching rule recorded in provenance.
pub const MATCHING_RULE: &str = "each ground-truth face is matched to its best-IoU detection; detections may be reused";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeStatus {
    Detected,
    Missed,
    /// The filter could not run for this face (e.g. no eye keypoints).
    Skipped,
    /// The detector failed; excluded from the denominator.
    NotEvaluated,
}

/// Result for one scored face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub image: String,
    pub face: usize,
    pub status: OutcomeStatus,
    pub detected: bool,
    pub best_iou: Option<f64>,
    pub boxes: Vec<BoundingBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// Counts for one seed of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub spec: FilterSpec,
    /// Scored faces (detected + missed); the accuracy denominator.
    pub n_images: usize,
    pub n_detected: usize,
    pub n_missed: usize,
    pub n_skipped: usize,
    pub n_not_evaluated: usize,
    /// Every face considered: scored, skipped and not evaluated.
    pub n_total: usize,
    pub accuracy: Option<f64>,
    pub outcomes: Vec<Outcome>,
}

impl SeedRun {
    pub(crate) fn from_outcomes(spec: FilterSpec, outcomes: Vec<Outcome>) -> SeedRun {
        let count = |s: OutcomeStatus| outcomes.iter().filter(|o| o.status == s).count();
        let n_detected = count(OutcomeStatus::Detected);
        let n_missed = count(OutcomeStatus::Missed);
        let n_images = n_detected + n_missed;
        SeedRun {
            seed: spec.seed,
            spec,
            n_images,
            n_detected,
            n_missed,
            n_skipped: count(OutcomeStatus::Skipped),
            n_not_evaluated: count(OutcomeStatus::NotEvaluated),
            n_total: outcomes.len(),
            accuracy: ratio(n_detected, n_images),
            outcomes,
        }
    }
}

pub(crate) fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// One grid point, pooled over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub filter_kind: FilterKind,
    pub params: BTreeMap<String, ParamValue>,
    pub n_images: usize,
    pub n_detected: usize,
    pub n_skipped: usize,
    pub n_not_evaluated: usize,
    /// Pooled `n_detected / n_images` over all seeds.
    pub accuracy: Option<f64>,
    /// Unweighted mean of the per-seed accuracies that are defined.
    pub mean_seed_accuracy: Option<f64>,
    pub reference_accuracy: Option<f64>,
    pub seeds: Vec<SeedRun>,
}

impl Cell {
    pub(crate) fn from_runs(filter_kind: FilterKind, params: BTreeMap<String, ParamValue>, seeds: Vec<SeedRun>) -> Cell {
        let sum = |f: fn(&SeedRun) -> usize| seeds.iter().map(f).sum::<usize>();
        let (n_images, n_detected) = (sum(|s| s.n_images), sum(|s| s.n_detected));
        let defined: Vec<f64> = seeds.iter().filter_map(|s| s.accuracy).collect();
        let mean_seed_accuracy = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
        let reference_accuracy = seeds.first().and_then(|s| crate::filters::reference_accuracy(&s.spec));
        Cell {
            filter_kind,
            params,
            n_images,
            n_detected,
            n_skipped: sum(|s| s.n_skipped),
            n_not_evaluated: sum(|s| s.n_not_evaluated),
            accuracy: ratio(n_detected, n_images),
            mean_seed_accuracy,
            reference_accuracy,
            seeds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub manifests: Vec<String>,
    pub n_entries: usize,
    pub n_faces: usize,
    pub n_rejected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub toolkit: String,
    pub version: String,
    pub detector: String,
    pub cascade_sha256: Option<String>,
    pub scoring: ScoringOptions,
    pub matching: String,
    pub mask_generator: String,
    pub filter_variants: BTreeMap<String, String>,
    pub corpus: CorpusSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
}

impl Provenance {
    pub(crate) fn new(detector: &dyn crate::detector::FaceDetector, scoring: ScoringOptions, corpus: CorpusSummary) -> Self {
        let filter_variants = [(FilterKind::Rotation, ROTATION_VARIANT), (FilterKind::Swirl, SWIRL_VARIANT), (FilterKind::Warp, WARP_VARIANT)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Provenance {
            toolkit: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            detector: detector.id(),
            cascade_sha256: detector.cascade_sha256(),
            scoring,
            matching: MATCHING_RULE.into(),
            mask_generator: MASK_GENERATOR_VARIANT.into(),
            filter_variants,
            corpus,
            generated_at: None,
        }
    }
}

/// Report of a single evaluation or a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub provenance: Provenance,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    /// Compact per-cell series for plotting.
    Plot,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "plot" => Ok(ReportFormat::Plot),
            other => Err(format!("unknown report format {other:?} (expected json, csv or plot)")),
        }
    }
}

#[derive(Serialize)]
struct PlotRow<'a> {
    filter_kind: FilterKind,
    params: &'a BTreeMap<String, ParamValue>,
    accuracy: Option<f64>,
    per_seed: Vec<Option<f64>>,
    reference_accuracy: Option<f64>,
}

impl EvalReport {
    /// Stamps the report with the current UTC time.
    pub fn stamp_now(&mut self) {
        self.provenance.generated_at = Some(humantime::format_rfc3339_seconds(std::time::SystemTime::now()).to_string());
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn from_json(text: &str) -> Result<EvalReport, EvalError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<EvalReport, EvalError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?;
        Self::from_json(&text)
    }

    /// One row per cell per seed, under [`CSV_HEADER`].
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        for cell in &self.cells {
            let params = serde_json::to_string(&cell.params).expect("params serialize");
            for run in &cell.seeds {
                w.write_record([
                    cell.filter_kind.to_string(),
                    params.clone(),
                    run.seed.to_string(),
                    run.n_images.to_string(),
                    run.n_detected.to_string(),
                    run.n_skipped.to_string(),
                    run.n_not_evaluated.to_string(),
                    run.accuracy.map(|a| a.to_string()).unwrap_or_default(),
                ])
                .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
    }

    pub fn to_plot_json(&self) -> String {
        let rows: Vec<PlotRow> = self
            .cells
            .iter()
            .map(|c| PlotRow {
                filter_kind: c.filter_kind,
                params: &c.params,
                accuracy: c.accuracy,
                per_seed: c.seeds.iter().map(|s| s.accuracy).collect(),
                reference_accuracy: c.reference_accuracy,
            })
            .collect();
        serde_json::to_string_pretty(&rows).expect("plot rows serialize")
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Json => self.to_json(),
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Plot => self.to_plot_json(),
        }
    }

    pub fn export(&self, format: ReportFormat, path: impl AsRef<Path>) -> Result<(), EvalError> {
        let path = path.as_ref();
        std::fs::write(path, self.render(format)).map_err(|e| EvalError::io(path, e))
    }
}
