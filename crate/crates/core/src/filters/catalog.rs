//! Static parameter schemas, default sweep grids, and reference accuracies.

use std::collections::BTreeMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{FilterError, FilterKind, FilterSpec, ParamValue};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ParamType {
    Real {
        min: f64,
        max: f64,
        /// When set, `min` itself is not allowed.
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        min_exclusive: bool,
    },
    Int { min: i64, max: i64 },
    Enum { choices: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSchema {
    pub name: String,
    #[serde(flatten)]
    pub ty: ParamType,
    /// `None` marks an optional parameter with no default.
    pub default: Option<ParamValue>,
    pub unit: String,
}

/// Reference accuracy under the strongest setting, as reported for the
/// third-party detector the toolkit stands in for. Metadata only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReferenceAccuracy {
    Single(f64),
    ByColor { black: f64, white: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSchema {
    pub kind: FilterKind,
    pub requires_context: bool,
    pub params: Vec<ParamSchema>,
    pub default_grid: IndexMap<String, Vec<ParamValue>>,
    pub table1_reference_accuracy: Option<ReferenceAccuracy>,
}

fn real(name: &str, min: f64, max: f64, default: Option<f64>, unit: &str) -> ParamSchema {
    ParamSchema {
        name: name.into(),
        ty: ParamType::Real { min, max, min_exclusive: false },
        default: default.map(ParamValue::Real),
        unit: unit.into(),
    }
}

fn positive(name: &str, max: f64, default: f64, unit: &str) -> ParamSchema {
    ParamSchema {
        name: name.into(),
        ty: ParamType::Real { min: 0.0, max, min_exclusive: true },
        default: Some(ParamValue::Real(default)),
        unit: unit.into(),
    }
}

fn choice(name: &str, choices: &[&str], default: &str) -> ParamSchema {
    ParamSchema {
        name: name.into(),
        ty: ParamType::Enum { choices: choices.iter().map(|c| c.to_string()).collect() },
        default: Some(ParamValue::Text(default.into())),
        unit: String::new(),
    }
}

fn params(kind: FilterKind) -> Vec<ParamSchema> {
    match kind {
        FilterKind::Identity => vec![],
        FilterKind::Noise => vec![real("sigma", 0.0, 1000.0, Some(50.0), "intensity steps")],
        FilterKind::Blur => vec![real("sigma", 0.0, 100.0, Some(4.0), "pixels")],
        FilterKind::BlurPeriocular => vec![real("sigma", 0.0, 100.0, Some(4.0), "pixels")],
        FilterKind::Darken => vec![real("factor", 0.0, 1.0, Some(0.1), "ratio")],
        FilterKind::Censor => {
            vec![positive("thickness", 10.0, 0.5, "fraction of iod"), choice("color", &["white", "black"], "white")]
        }
        FilterKind::Jpeg => vec![ParamSchema {
            name: "quality".into(),
            ty: ParamType::Int { min: 1, max: 100 },
            default: Some(ParamValue::Int(10)),
            unit: "quality".into(),
        }],
        FilterKind::Leopard => vec![
            real("coverage", 0.0, 1.0, Some(0.4), "fraction of face box"),
            choice("scale", &["big", "med", "small"], "small"),
            choice("softness", &["clear", "blurry"], "clear"),
        ],
        FilterKind::Rotation => vec![real("degrees", -3600.0, 3600.0, Some(45.0), "degrees")],
        FilterKind::Swirl => vec![
            positive("radius", 1e5, 60.0, "pixels"),
            real("strength", -100.0, 100.0, Some(4.0), "radians"),
            real("center_x", -1e6, 1e6, None, "pixels"),
            real("center_y", -1e6, 1e6, None, "pixels"),
        ],
        FilterKind::Warp => vec![real("amplitude", 0.0, 1000.0, Some(4.0), "pixels"), positive("cell", 1e5, 32.0, "pixels")],
    }
}

fn reals(values: &[f64]) -> Vec<ParamValue> {
    values.iter().map(|&v| ParamValue::Real(v)).collect()
}

fn texts(values: &[&str]) -> Vec<ParamValue> {
    values.iter().map(|&v| ParamValue::Text(v.into())).collect()
}

/// Default sweep grid for `kind`, in sweep order.
pub fn default_grid(kind: FilterKind) -> IndexMap<String, Vec<ParamValue>> {
    let mut g = IndexMap::new();
    match kind {
        FilterKind::Identity => {}
        FilterKind::Noise => {
            g.insert("sigma".into(), reals(&[0.0, 10.0, 20.0, 30.0, 40.0, 50.0]));
        }
        FilterKind::Blur => {
            g.insert("sigma".into(), reals(&[0.0, 1.0, 2.0, 4.0, 8.0]));
        }
        FilterKind::BlurPeriocular => {
            g.insert("sigma".into(), reals(&[0.0, 2.0, 4.0, 8.0, 16.0]));
        }
        FilterKind::Darken => {
            g.insert("factor".into(), reals(&[1.0, 0.5, 0.25, 0.1, 0.05]));
        }
        FilterKind::Censor => {
            g.insert("thickness".into(), reals(&[0.1, 0.2, 0.3, 0.5]));
            g.insert("color".into(), texts(&["white", "black"]));
        }
        FilterKind::Jpeg => {
            g.insert("quality".into(), [100, 75, 50, 25, 10, 5].iter().map(|&q| ParamValue::Int(q)).collect());
        }
        FilterKind::Leopard => {
            g.insert("coverage".into(), reals(&[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]));
            g.insert("scale".into(), texts(&["big", "med", "small"]));
            g.insert("softness".into(), texts(&["clear", "blurry"]));
        }
        FilterKind::Rotation => {
            g.insert("degrees".into(), reals(&[0.0, 15.0, 30.0, 45.0, 90.0, 180.0]));
        }
        FilterKind::Swirl => {
            g.insert("strength".into(), reals(&[0.0, 2.0, 4.0, 8.0]));
        }
        FilterKind::Warp => {
            g.insert("amplitude".into(), reals(&[0.0, 2.0, 4.0, 8.0, 16.0]));
        }
    }
    g
}

fn reference(kind: FilterKind) -> Option<ReferenceAccuracy> {
    use ReferenceAccuracy::Single;
    Some(match kind {
        FilterKind::Noise => Single(0.22),
        FilterKind::Blur => Single(0.37),
        FilterKind::BlurPeriocular => Single(0.30),
        FilterKind::Darken => Single(0.94),
        FilterKind::Censor => ReferenceAccuracy::ByColor { black: 0.21, white: 0.02 },
        FilterKind::Jpeg => Single(0.17),
        FilterKind::Leopard => Single(0.01),
        FilterKind::Rotation => Single(0.01),
        FilterKind::Swirl => Single(0.34),
        FilterKind::Warp => Single(0.01),
        FilterKind::Identity => return None,
    })
}

pub fn schema(kind: FilterKind) -> FilterSchema {
    FilterSchema {
        kind,
        requires_context: kind.requires_context(),
        params: params(kind),
        default_grid: default_grid(kind),
        table1_reference_accuracy: reference(kind),
    }
}

/// Schemas for all eleven kinds.
pub fn catalog() -> Vec<FilterSchema> {
    FilterKind::ALL.into_iter().map(schema).collect()
}

/// Reference accuracy applicable to `spec` (censor resolves by color).
pub fn reference_accuracy(spec: &FilterSpec) -> Option<f64> {
    match reference(spec.kind)? {
        ReferenceAccuracy::Single(v) => Some(v),
        ReferenceAccuracy::ByColor { black, white } => {
            let color = spec.params.get("color").and_then(|v| match v {
                ParamValue::Text(s) => Some(s.as_str()),
                _ => None,
            });
            match color.unwrap_or("white") {
                "black" => Some(black),
                "white" => Some(white),
                _ => None,
            }
        }
    }
}

/// Parameters of one spec, validated and merged with defaults.
pub(crate) struct ResolvedParams {
    values: BTreeMap<String, ParamValue>,
    kind: FilterKind,
}

impl ResolvedParams {
    pub(crate) fn new(spec: &FilterSpec) -> Result<Self, FilterError> {
        let schemas = params(spec.kind);
        let invalid = |name: &str, reason: String| FilterError::InvalidParam {
            kind: spec.kind,
            name: name.to_owned(),
            reason,
        };
        for name in spec.params.keys() {
            if !schemas.iter().any(|s| &s.name == name) {
                return Err(FilterError::UnknownParam { kind: spec.kind, name: name.clone() });
            }
        }
        let mut values = BTreeMap::new();
        for s in &schemas {
            let Some(raw) = spec.params.get(&s.name).or(s.default.as_ref()) else {
                continue;
            };
            let v = match (&s.ty, raw) {
                (ParamType::Real { min, max, min_exclusive }, v) => {
                    let x = v.as_f64().ok_or_else(|| invalid(&s.name, "expected a number".into()))?;
                    let low_ok = if *min_exclusive { x > *min } else { x >= *min };
                    if !x.is_finite() || !low_ok || x > *max {
                        let open = if *min_exclusive { "(" } else { "[" };
                        return Err(invalid(&s.name, format!("{x} outside {open}{min}, {max}]")));
                    }
                    ParamValue::Real(x)
                }
                (ParamType::Int { min, max }, v) => {
                    let i = match *v {
                        ParamValue::Int(i) => i,
                        ParamValue::Real(r) if r.fract() == 0.0 && r.abs() < 1e15 => r as i64,
                        _ => return Err(invalid(&s.name, "expected an integer".into())),
                    };
                    if i < *min || i > *max {
                        return Err(invalid(&s.name, format!("{i} outside [{min}, {max}]")));
                    }
                    ParamValue::Int(i)
                }
                (ParamType::Enum { choices }, ParamValue::Text(t)) => {
                    if !choices.contains(t) {
                        return Err(invalid(&s.name, format!("{t:?} not one of {}", choices.join("|"))));
                    }
                    ParamValue::Text(t.clone())
                }
                (ParamType::Enum { choices }, _) => {
                    return Err(invalid(&s.name, format!("expected one of {}", choices.join("|"))))
                }
            };
            values.insert(s.name.clone(), v);
        }
        Ok(ResolvedParams { values, kind: spec.kind })
    }

    pub(crate) fn real(&self, name: &str) -> f64 {
        self.opt_real(name).unwrap_or_else(|| panic!("schema default missing for {name}"))
    }

    pub(crate) fn opt_real(&self, name: &str) -> Option<f64> {
        self.values.get(name).and_then(ParamValue::as_f64)
    }

    pub(crate) fn int(&self, name: &str) -> i64 {
        match self.values.get(name) {
            Some(ParamValue::Int(i)) => *i,
            _ => panic!("schema default missing for {name}"),
        }
    }

    pub(crate) fn choice<T: std::str::FromStr>(&self, name: &str) -> Result<T, FilterError> {
        let text = match self.values.get(name) {
            Some(ParamValue::Text(t)) => t,
            _ => panic!("schema default missing for {name}"),
        };
        text.parse().map_err(|_| FilterError::InvalidParam {
            kind: self.kind,
            name: name.into(),
            reason: format!("unrecognized value {text:?}"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_lists_all_kinds() {
        let c = catalog();
        assert_eq!(c.len(), 11);
        let kinds: Vec<_> = c.iter().map(|s| s.kind).collect();
        assert_eq!(kinds, FilterKind::ALL.to_vec());
    }

    #[test]
    fn defaults_resolve_for_every_kind() {
        for k in FilterKind::ALL {
            FilterSpec::new(k).resolve().unwrap_or_else(|e| panic!("{k}: {e}"));
        }
    }

    #[test]
    fn default_grid_points_validate() {
        for k in FilterKind::ALL {
            for (name, values) in default_grid(k) {
                for v in values {
                    let spec = FilterSpec::new(k).with_param(&name, v.clone());
                    assert!(spec.resolve().is_ok(), "{k} {name}={v}");
                }
            }
        }
    }

    #[test]
    fn reference_values() {
        let noise = FilterSpec::new(FilterKind::Noise);
        assert_eq!(reference_accuracy(&noise), Some(0.22));
        let white = FilterSpec::new(FilterKind::Censor).with_param("color", "white");
        assert_eq!(reference_accuracy(&white), Some(0.02));
        let black = FilterSpec::new(FilterKind::Censor).with_param("color", "black");
        assert_eq!(reference_accuracy(&black), Some(0.21));
        assert_eq!(reference_accuracy(&FilterSpec::identity()), None);
        assert_eq!(reference_accuracy(&FilterSpec::new(FilterKind::Leopard)), Some(0.01));
    }

    #[test]
    fn default_grid_shapes() {
        assert_eq!(default_grid(FilterKind::Noise)["sigma"].len(), 6);
        let leopard = default_grid(FilterKind::Leopard);
        let cells: usize = leopard.values().map(Vec::len).product();
        assert_eq!(cells, 9 * 3 * 2);
        assert_eq!(default_grid(FilterKind::Darken)["factor"], reals(&[1.0, 0.5, 0.25, 0.1, 0.05]));
    }

    #[test]
    fn schema_serializes_flat() {
        let v = serde_json::to_value(schema(FilterKind::Censor)).unwrap();
        assert_eq!(v["kind"], "censor");
        assert_eq!(v["params"][0]["name"], "thickness");
        assert_eq!(v["params"][0]["type"], "real");
        assert_eq!(v["params"][1]["choices"][1], "black");
        assert_eq!(v["table1_reference_accuracy"]["white"], 0.02);
    }
}
