use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{load_image, FaceAnnotation, Image};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read manifest {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// One manifest line as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestLine {
    pub image: String,
    #[serde(default)]
    pub faces: Vec<FaceAnnotation>,
    #[serde(default)]
    pub tags: BTreeMap<String, serde_json::Value>,
}

/// A validated corpus image with its annotations.
#[derive(Debug, Clone)]
pub struct CorpusEntry {
    /// The manifest's `image` field, used as the entry id in reports.
    pub id: String,
    pub path: PathBuf,
    pub faces: Vec<FaceAnnotation>,
    pub tags: BTreeMap<String, serde_json::Value>,
    pub image: Arc<Image>,
}

impl CorpusEntry {
    /// Value of `key` for face `face`: the face attribute if present, else the entry tag.
    pub fn tag_value(&self, face: usize, key: &str) -> Option<String> {
        if let Some(v) = self.faces.get(face).and_then(|f| f.attributes.get(key)) {
            return Some(v.to_string());
        }
        self.tags.get(key).map(|v| match v {
            serde_json::Value::String(s) => s.clone(),
            other => other.to_string(),
        })
    }
}

/// A manifest line that failed validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedEntry {
    pub manifest: String,
    pub line: usize,
    pub image: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub manifests: Vec<String>,
    pub entries: Vec<CorpusEntry>,
    pub rejected: Vec<RejectedEntry>,
}

impl Corpus {
    /// Loads and concatenates several manifests, in order.
    pub fn load<P: AsRef<Path>>(manifests: &[P]) -> Result<Corpus, CorpusError> {
        let mut corpus = Corpus::default();
        for m in manifests {
            corpus.extend(load_manifest(m)?);
        }
        Ok(corpus)
    }

    pub fn extend(&mut self, other: Corpus) {
        self.manifests.extend(other.manifests);
        self.entries.extend(other.entries);
        self.rejected.extend(other.rejected);
    }

    pub fn n_faces(&self) -> usize {
        self.entries.iter().map(|e| e.faces.len()).sum()
    }

    pub fn from_entries(entries: Vec<CorpusEntry>) -> Corpus {
        Corpus { manifests: Vec::new(), entries, rejected: Vec::new() }
    }
}

fn validate_line(line: &ManifestLine, dir: &Path) -> Result<CorpusEntry, String> {
    let path = dir.join(&line.image);
    let image = load_image(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let (w, h) = (image.width() as f64, image.height() as f64);
    for (i, face) in line.faces.iter().enumerate() {
        face.validate().map_err(|e| format!("face {i}: {e}"))?;
        let b = &face.bbox;
        if b.clip(w, h).is_none() {
            return Err(format!("face {i}: box {} {} {} {} lies outside the {w}x{h} image", b.x, b.y, b.w, b.h));
        }
    }
    Ok(CorpusEntry { id: line.image.clone(), path, faces: line.faces.clone(), tags: line.tags.clone(), image: Arc::new(image) })
}

/// Reads a JSONL manifest. Image paths are relative to the manifest's directory.
/// Invalid lines are collected in [`Corpus::rejected`] and loading continues.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let manifest = path.display().to_string();
    let mut corpus = Corpus { manifests: vec![manifest.clone()], ..Default::default() };
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let reject = |image: Option<String>, reason: String| RejectedEntry { manifest: manifest.clone(), line: i + 1, image, reason };
        match serde_json::from_str::<ManifestLine>(raw) {
            Err(e) => corpus.rejected.push(reject(None, format!("malformed JSON: {e}"))),
            Ok(line) => match validate_line(&line, dir) {
                Ok(entry) => corpus.entries.push(entry),
                Err(reason) => corpus.rejected.push(reject(Some(line.image), reason)),
            },
        }
    }
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::save_image;

    fn write_image(dir: &Path, name: &str) {
        save_image(&Image::filled(20, 10, 1, 9).unwrap(), dir.join(name)).unwrap();
    }

    #[test]
    fn empty_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("m.jsonl");
        std::fs::write(&m, "").unwrap();
        let c = load_manifest(&m).unwrap();
        assert!(c.entries.is_empty() && c.rejected.is_empty());
        assert_eq!(c.n_faces(), 0);
    }

    #[test]
    fn bad_lines_are_rejected_and_loading_continues() {
        let dir = tempfile::tempdir().unwrap();
        write_image(dir.path(), "a.png");
        let m = dir.path().join("m.jsonl");
        std::fs::write(
            &m,
            concat!(
                r#"{"image": "missing.png"}"#, "\n",
                "{not json\n",
                "\n",
                r#"{"image": "a.png", "faces": [{"box": [100, 100, 5, 5]}]}"#, "\n",
                r#"{"image": "a.png", "faces": [{"box": [1, 1, 0, 5]}]}"#, "\n",
                r#"{"image": "a.png", "faces": [{"box": [15, 5, 10, 10]}], "tags": {"k": "v"}}"#, "\n",
            ),
        )
        .unwrap();
        let c = load_manifest(&m).unwrap();
        assert_eq!(c.entries.len(), 1);
        assert_eq!(c.entries[0].tags["k"], "v");
        let lines: Vec<usize> = c.rejected.iter().map(|r| r.line).collect();
        assert_eq!(lines, vec![1, 2, 4, 5]);
        assert!(c.rejected[0].reason.contains("missing.png"));
        assert!(c.rejected[2].reason.contains("outside"));
    }

    #[test]
    fn missing_manifest_is_fatal() {
        assert!(load_manifest("/nonexistent/m.jsonl").is_err());
    }

    #[test]
    fn tag_lookup_prefers_face_attributes() {
        let mut face = FaceAnnotation::new(crate::imaging::BoundingBox { x: 0.0, y: 0.0, w: 1.0, h: 1.0 });
        face.attributes.insert("hat".into(), true);
        let entry = CorpusEntry {
            id: "x".into(),
            path: "x".into(),
            faces: vec![face],
            tags: [("hat".to_string(), serde_json::json!(false)), ("source".to_string(), serde_json::json!("s"))].into(),
            image: Arc::new(Image::filled(1, 1, 1, 0).unwrap()),
        };
        assert_eq!(entry.tag_value(0, "hat").as_deref(), Some("true"));
        assert_eq!(entry.tag_value(0, "source").as_deref(), Some("s"));
        assert_eq!(entry.tag_value(0, "nope"), None);
    }
}
