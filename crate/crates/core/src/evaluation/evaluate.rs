use rayon::prelude::*;

use super::corpus::{Corpus, CorpusEntry};
use super::report::{Cell, CorpusSummary, EvalReport, Outcome, OutcomeStatus, Provenance, SeedRun};
use super::{EvalError, ScoringMode, ScoringOptions};
use crate::detector::{DetectError, FaceDetector};
use crate::filters::{apply, transform_box, FaceContext, FilterKind, FilterSpec};
use crate::imaging::{iou, BoundingBox, Image};

pub(crate) fn corpus_summary(corpus: &Corpus) -> CorpusSummary {
    CorpusSummary {
        manifests: corpus.manifests.clone(),
        n_entries: corpus.entries.len(),
        n_faces: corpus.n_faces(),
        n_rejected: corpus.rejected.len(),
    }
}

fn scored_faces(entry: &CorpusEntry, mode: ScoringMode) -> std::ops::Range<usize> {
    match mode {
        ScoringMode::PerFace => 0..entry.faces.len(),
        ScoringMode::SingleFace => 0..entry.faces.len().min(1),
    }
}

/// Whether the filtered image depends on which face supplies the context.
fn context_sensitive(spec: &FilterSpec) -> bool {
    spec.kind.requires_context() || (spec.kind == FilterKind::Swirl && !spec.params.contains_key("center_x"))
}

struct Filtered {
    image: Result<Image, String>,
    detections: Option<Result<Vec<BoundingBox>, DetectError>>,
}

fn run(entry: &CorpusEntry, spec: &FilterSpec, ctx: Option<&FaceContext>, detector: &dyn FaceDetector) -> Filtered {
    match apply(spec, &entry.image, ctx) {
        Err(e) => Filtered { image: Err(e.to_string()), detections: None },
        Ok(img) => {
            let detections = detector.detect(&img).map(|d| d.into_iter().map(|d| d.bbox).collect());
            Filtered { image: Ok(img), detections: Some(detections) }
        }
    }
}

fn score(
    entry: &CorpusEntry,
    face: usize,
    spec: &FilterSpec,
    ctx: Option<&FaceContext>,
    filtered: &Filtered,
    threshold: f64,
) -> Outcome {
    let base = |status, reason| Outcome {
        image: entry.id.clone(),
        face,
        status,
        detected: false,
        best_iou: None,
        boxes: Vec::new(),
        reason,
    };
    if let Err(e) = &filtered.image {
        return base(OutcomeStatus::Skipped, Some(e.clone()));
    }
    let boxes = match filtered.detections.as_ref().expect("detections follow a filtered image") {
        Err(e) => return base(OutcomeStatus::NotEvaluated, Some(format!("{}: {e}", e.kind()))),
        Ok(b) => b.clone(),
    };
    let (w, h) = (entry.image.width(), entry.image.height());
    let truth = match transform_box(spec, &entry.faces[face].bbox, w, h, ctx) {
        Ok(t) => t,
        Err(e) => return base(OutcomeStatus::Skipped, Some(e.to_string())),
    };
    let best = boxes.iter().map(|b| iou(b, &truth)).fold(0.0, f64::max);
    let detected = best > threshold;
    Outcome {
        status: if detected { OutcomeStatus::Detected } else { OutcomeStatus::Missed },
        detected,
        best_iou: Some(best),
        boxes,
        ..base(OutcomeStatus::Missed, None)
    }
}

/// Filters, detects and scores every selected face of one entry.
pub(crate) fn score_entry(entry: &CorpusEntry, spec: &FilterSpec, detector: &dyn FaceDetector, opts: &ScoringOptions) -> Vec<Outcome> {
    let faces = scored_faces(entry, opts.mode);
    if faces.is_empty() {
        return Vec::new();
    }
    let contexts: Vec<Result<FaceContext, String>> =
        entry.faces.iter().map(|f| FaceContext::from_annotation(f).map_err(|e| e.to_string())).collect();
    let ctx_of = |i: usize| contexts[i].as_ref().ok();
    let needs_ctx = spec.kind.requires_context();

    if !context_sensitive(spec) {
        let ctx = ctx_of(0);
        let filtered = run(entry, spec, ctx, detector);
        return faces.map(|i| score(entry, i, spec, ctx, &filtered, opts.iou_threshold)).collect();
    }
    faces
        .map(|i| {
            let source = match opts.mode {
                ScoringMode::SingleFace => 0,
                ScoringMode::PerFace => i,
            };
            match (&contexts[source], needs_ctx) {
                (Err(reason), true) => Outcome {
                    image: entry.id.clone(),
                    face: i,
                    status: OutcomeStatus::Skipped,
                    detected: false,
                    best_iou: None,
                    boxes: Vec::new(),
                    reason: Some(format!("no face context: {reason}")),
                },
                _ => {
                    let ctx = ctx_of(source);
                    let filtered = run(entry, spec, ctx, detector);
                    score(entry, i, spec, ctx, &filtered, opts.iou_threshold)
                }
            }
        })
        .collect()
}

/// Runs one filter spec over the corpus. Entries are processed in parallel and
/// collected in manifest order.
pub(crate) fn run_spec(corpus: &Corpus, spec: &FilterSpec, detector: &dyn FaceDetector, opts: &ScoringOptions) -> SeedRun {
    let outcomes: Vec<Vec<Outcome>> = corpus.entries.par_iter().map(|e| score_entry(e, spec, detector, opts)).collect();
    SeedRun::from_outcomes(spec.clone(), outcomes.into_iter().flatten().collect())
}

/// Single-cell evaluation of `spec` over `corpus`.
pub fn evaluate(corpus: &Corpus, spec: &FilterSpec, detector: &dyn FaceDetector, opts: &ScoringOptions) -> Result<EvalReport, EvalError> {
    opts.validate()?;
    spec.resolve()?;
    let run = run_spec(corpus, spec, detector, opts);
    Ok(EvalReport {
        provenance: Provenance::new(detector, *opts, corpus_summary(corpus)),
        cells: vec![Cell::from_runs(spec.kind, spec.params.clone(), vec![run])],
    })
}
