//! Readers for the two XML cascade layouts: the `cascade` element with a
//! shared feature table, and the older `opencv-haar-classifier` element with
//! features inlined in each tree.

use roxmltree::{Document, Node};

use super::cascade::{Cascade, CascadeError, Stage, WeakClassifier, WeightedRect};

fn malformed(msg: impl Into<String>) -> CascadeError {
    CascadeError::Malformed(msg.into())
}

fn elements<'a, 'input>(node: Node<'a, 'input>) -> impl Iterator<Item = Node<'a, 'input>> {
    node.children().filter(|n| n.is_element())
}

fn child<'a, 'input>(node: Node<'a, 'input>, name: &str) -> Option<Node<'a, 'input>> {
    elements(node).find(|n| n.has_tag_name(name))
}

fn req_child<'a, 'input>(node: Node<'a, 'input>, name: &str, ctx: &str) -> Result<Node<'a, 'input>, CascadeError> {
    child(node, name).ok_or_else(|| malformed(format!("{ctx}: missing <{name}>")))
}

fn text_of(node: Node<'_, '_>) -> String {
    node.descendants().filter(|n| n.is_text()).filter_map(|n| n.text()).collect::<Vec<_>>().join(" ")
}

fn numbers(node: Node<'_, '_>, ctx: &str) -> Result<Vec<f64>, CascadeError> {
    text_of(node)
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| malformed(format!("{ctx}: bad number {t:?}"))))
        .collect()
}

fn scalar(node: Node<'_, '_>, name: &str, ctx: &str) -> Result<f64, CascadeError> {
    let v = numbers(req_child(node, name, ctx)?, &format!("{ctx} <{name}>"))?;
    match v.as_slice() {
        [x] => Ok(*x),
        _ => Err(malformed(format!("{ctx}: <{name}> must hold one number"))),
    }
}

fn dimension(v: f64, what: &str) -> Result<u32, CascadeError> {
    if v.fract() == 0.0 && v >= 1.0 && v <= u32::MAX as f64 {
        Ok(v as u32)
    } else {
        Err(malformed(format!("{what} {v} is not a positive integer")))
    }
}

fn rect(values: &[f64], ctx: &str) -> Result<WeightedRect, CascadeError> {
    let arr: [f64; 5] = values.try_into().map_err(|_| malformed(format!("{ctx}: rectangle needs 5 numbers")))?;
    WeightedRect::try_from(arr).map_err(|e| malformed(format!("{ctx}: {e}")))
}

fn is_tilted(feature: Node<'_, '_>, ctx: &str) -> Result<bool, CascadeError> {
    match child(feature, "tilted") {
        None => Ok(false),
        Some(t) => Ok(numbers(t, ctx)?.iter().any(|&v| v != 0.0)),
    }
}

fn feature_rects(feature: Node<'_, '_>, ctx: &str) -> Result<Vec<WeightedRect>, CascadeError> {
    if is_tilted(feature, ctx)? {
        return Err(CascadeError::Unsupported("tilted features".into()));
    }
    let rects = req_child(feature, "rects", ctx)?;
    elements(rects).map(|r| rect(&numbers(r, ctx)?, ctx)).collect()
}

pub(super) fn parse(text: &str) -> Result<Cascade, CascadeError> {
    let doc = Document::parse(text).map_err(|e| CascadeError::Xml(e.to_string()))?;
    let root = doc.root_element();
    let top = if root.has_tag_name("opencv_storage") {
        elements(root).next().ok_or_else(|| malformed("empty <opencv_storage>"))?
    } else {
        root
    };
    match top.attribute("type_id") {
        Some("opencv-haar-classifier") => parse_legacy(top),
        _ if top.has_tag_name("cascade") => parse_current(top),
        Some(other) => Err(CascadeError::Unsupported(format!("cascade type {other:?}"))),
        None => Err(malformed(format!("unrecognized root element <{}>", top.tag_name().name()))),
    }
}

fn parse_current(top: Node<'_, '_>) -> Result<Cascade, CascadeError> {
    let ctx = "cascade";
    let stage_type = text_of(req_child(top, "stageType", ctx)?);
    if stage_type.trim() != "BOOST" {
        return Err(CascadeError::Unsupported(format!("stage type {:?}", stage_type.trim())));
    }
    let feature_type = text_of(req_child(top, "featureType", ctx)?);
    if feature_type.trim() != "HAAR" {
        return Err(CascadeError::Unsupported(format!("feature type {:?}", feature_type.trim())));
    }
    let window_w = dimension(scalar(top, "width", ctx)?, "window width")?;
    let window_h = dimension(scalar(top, "height", ctx)?, "window height")?;

    let features = req_child(top, "features", ctx)?;
    let feature_table: Vec<Vec<WeightedRect>> = elements(features)
        .enumerate()
        .map(|(i, f)| feature_rects(f, &format!("feature {i}")))
        .collect::<Result<_, _>>()?;

    let mut stages = Vec::new();
    for (si, st) in elements(req_child(top, "stages", ctx)?).enumerate() {
        let sctx = format!("stage {si}");
        let threshold = scalar(st, "stageThreshold", &sctx)?;
        let mut classifiers = Vec::new();
        for (ci, wc) in elements(req_child(st, "weakClassifiers", &sctx)?).enumerate() {
            let cctx = format!("stage {si}, classifier {ci}");
            let nodes = numbers(req_child(wc, "internalNodes", &cctx)?, &cctx)?;
            let leaves = numbers(req_child(wc, "leafValues", &cctx)?, &cctx)?;
            let (left, right, idx, thr) = match nodes.as_slice() {
                &[l, r, idx, thr] if l <= 0.0 && r <= 0.0 => (l, r, idx, thr),
                _ => return Err(CascadeError::NonStump { stage: si, classifier: ci }),
            };
            if leaves.len() != 2 || left != 0.0 || right != -1.0 {
                return Err(CascadeError::NonStump { stage: si, classifier: ci });
            }
            if idx.fract() != 0.0 || idx < 0.0 {
                return Err(malformed(format!("{cctx}: bad feature index {idx}")));
            }
            let rects = feature_table
                .get(idx as usize)
                .ok_or_else(|| malformed(format!("{cctx}: feature index {idx} out of range")))?
                .clone();
            classifiers.push(WeakClassifier { rects, threshold: thr, left: leaves[0], right: leaves[1] });
        }
        stages.push(Stage { threshold, classifiers });
    }
    Ok(Cascade { window_w, window_h, stages })
}

fn parse_legacy(top: Node<'_, '_>) -> Result<Cascade, CascadeError> {
    let ctx = "classifier";
    let size = numbers(req_child(top, "size", ctx)?, ctx)?;
    let [w, h] = size.as_slice() else {
        return Err(malformed("<size> must hold two numbers"));
    };
    let window_w = dimension(*w, "window width")?;
    let window_h = dimension(*h, "window height")?;

    let mut stages = Vec::new();
    for (si, st) in elements(req_child(top, "stages", ctx)?).enumerate() {
        let sctx = format!("stage {si}");
        let threshold = scalar(st, "stage_threshold", &sctx)?;
        let mut classifiers = Vec::new();
        for (ci, tree) in elements(req_child(st, "trees", &sctx)?).enumerate() {
            let cctx = format!("stage {si}, classifier {ci}");
            let mut nodes = elements(tree);
            let node = nodes.next().ok_or_else(|| malformed(format!("{cctx}: empty tree")))?;
            if nodes.next().is_some() || child(node, "left_node").is_some() || child(node, "right_node").is_some() {
                return Err(CascadeError::NonStump { stage: si, classifier: ci });
            }
            let rects = feature_rects(req_child(node, "feature", &cctx)?, &cctx)?;
            classifiers.push(WeakClassifier {
                rects,
                threshold: scalar(node, "threshold", &cctx)?,
                left: scalar(node, "left_val", &cctx)?,
                right: scalar(node, "right_val", &cctx)?,
            });
        }
        stages.push(Stage { threshold, classifiers });
    }
    Ok(Cascade { window_w, window_h, stages })
}
