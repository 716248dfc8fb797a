//! Detection statistics on unfiltered images, grouped by tag or by occluded keypoint.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::evaluate::{corpus_summary, score_entry};
use super::report::{ratio, Outcome, OutcomeStatus, Provenance};
use super::{Corpus, EvalError, ScoringMode, ScoringOptions};
use crate::detector::FaceDetector;
use crate::filters::FilterSpec;

/// Group label for faces lacking the requested tag.
pub const UNTAGGED: &str = "untagged";

/// A published detection probability for an occlusion condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeReference {
    pub dataset: String,
    pub condition: String,
    pub n: usize,
    pub probability: f64,
}

/// `(dataset, condition, n, probability)` rows of the published occlusion table.
pub const ATTRIBUTE_REFERENCE: [(&str, &str, usize, f64); 7] = [
    ("ARFace", "neutral", 417, 0.995),
    ("ARFace", "scarves", 417, 0.880),
    ("ARFace", "glasses", 417, 0.964),
    ("UMB-DB", "neutral", 883, 0.998),
    ("UMB-DB", "scarf", 151, 0.570),
    ("UMB-DB", "occluding haircut", 33, 0.909),
    ("UMB-DB", "hat", 183, 0.945),
];

pub fn attribute_reference() -> Vec<AttributeReference> {
    ATTRIBUTE_REFERENCE
        .iter()
        .map(|&(d, c, n, p)| AttributeReference { dataset: d.into(), condition: c.into(), n, probability: p })
        .collect()
}

/// Published detection probability given an occluded keypoint.
pub const KEYPOINT_REFERENCE: [(&str, f64); 1] = [("nose_tip", 0.619)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeGroup {
    pub value: String,
    /// Faces in the group, including those not evaluated.
    pub n: usize,
    pub n_detected: usize,
    pub n_not_evaluated: usize,
    /// `n_detected / (n - n_not_evaluated)`.
    pub probability: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeTable {
    pub tag_key: String,
    pub groups: Vec<AttributeGroup>,
    pub reference: Vec<AttributeReference>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointStat {
    pub n_occluded: usize,
    pub n_detected: usize,
    pub n_not_evaluated: usize,
    /// `P(detected | occluded)`; absent when no evaluated face has the keypoint occluded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probability: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_probability: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointTable {
    pub keypoints: BTreeMap<String, KeypointStat>,
    pub provenance: Provenance,
}

/// Per-face outcomes on the unfiltered corpus, in manifest order, paired with entry indices.
fn unfiltered(corpus: &Corpus, detector: &dyn FaceDetector, opts: &ScoringOptions) -> Vec<(usize, Outcome)> {
    let identity = FilterSpec::identity();
    let per_entry: Vec<Vec<Outcome>> =
        corpus.entries.par_iter().map(|e| score_entry(e, &identity, detector, opts)).collect();
    per_entry.into_iter().enumerate().flat_map(|(i, v)| v.into_iter().map(move |o| (i, o))).collect()
}

fn per_face(opts: &ScoringOptions) -> ScoringOptions {
    ScoringOptions { mode: ScoringMode::PerFace, ..*opts }
}

/// Detection probability on unfiltered images, grouped by the value of `tag_key`
/// (a face attribute, else an entry tag). Group sizes sum to the number of faces.
pub fn attribute_table(corpus: &Corpus, detector: &dyn FaceDetector, tag_key: &str, opts: &ScoringOptions) -> Result<AttributeTable, EvalError> {
    opts.validate()?;
    let opts = per_face(opts);
    let mut groups: BTreeMap<String, AttributeGroup> = BTreeMap::new();
    for (ei, o) in unfiltered(corpus, detector, &opts) {
        let value = corpus.entries[ei].tag_value(o.face, tag_key).unwrap_or_else(|| UNTAGGED.to_string());
        let g = groups.entry(value.clone()).or_insert(AttributeGroup { value, n: 0, n_detected: 0, n_not_evaluated: 0, probability: None });
        g.n += 1;
        match o.status {
            OutcomeStatus::Detected => g.n_detected += 1,
            OutcomeStatus::NotEvaluated | OutcomeStatus::Skipped => g.n_not_evaluated += 1,
            OutcomeStatus::Missed => {}
        }
    }
    let groups = groups
        .into_values()
        .map(|mut g| {
            g.probability = ratio(g.n_detected, g.n - g.n_not_evaluated);
            g
        })
        .collect();
    Ok(AttributeTable {
        tag_key: tag_key.to_string(),
        groups,
        reference: attribute_reference(),
        provenance: Provenance::new(detector, opts, corpus_summary(corpus)),
    })
}

/// For each keypoint name, the detection rate over faces where it is occluded.
/// Faces without that keypoint do not count toward it.
pub fn keypoint_conditional(corpus: &Corpus, detector: &dyn FaceDetector, opts: &ScoringOptions) -> Result<KeypointTable, EvalError> {
    opts.validate()?;
    let opts = per_face(opts);
    let mut table: BTreeMap<String, KeypointStat> = BTreeMap::new();
    for (ei, o) in unfiltered(corpus, detector, &opts) {
        for k in &corpus.entries[ei].faces[o.face].keypoints {
            let stat = table.entry(k.name.clone()).or_insert(KeypointStat {
                n_occluded: 0,
                n_detected: 0,
                n_not_evaluated: 0,
                probability: None,
                reference_probability: KEYPOINT_REFERENCE.iter().find(|(n, _)| *n == k.name).map(|r| r.1),
            });
            if !k.occluded {
                continue;
            }
            stat.n_occluded += 1;
            match o.status {
                OutcomeStatus::Detected => stat.n_detected += 1,
                OutcomeStatus::NotEvaluated | OutcomeStatus::Skipped => stat.n_not_evaluated += 1,
                OutcomeStatus::Missed => {}
            }
        }
    }
    for stat in table.values_mut() {
        stat.probability = ratio(stat.n_detected, stat.n_occluded - stat.n_not_evaluated);
    }
    Ok(KeypointTable { keypoints: table, provenance: Provenance::new(detector, opts, corpus_summary(corpus)) })
}
