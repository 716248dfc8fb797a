use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::evaluate::{corpus_summary, run_spec};
use super::report::{Cell, EvalReport, Provenance};
use super::{Corpus, EvalError, ScoringOptions};
use crate::detector::{BuiltinDetector, Cascade, DetectorConfig, ExternalConfig, ExternalDetector, FaceDetector, BUNDLED_NAME};
use crate::filters::{default_grid, schema, FilterKind, FilterSpec, ParamValue};

pub const DEFAULT_MAX_CELLS: usize = 10_000;

/// Which detector a sweep runs against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DetectorSpec {
    Builtin {
        #[serde(default)]
        config: DetectorConfig,
        /// Cascade file (XML or JSON); the vendored cascade when absent.
        #[serde(default)]
        cascade: Option<PathBuf>,
    },
    External(ExternalConfig),
}

impl Default for DetectorSpec {
    fn default() -> Self {
        DetectorSpec::Builtin { config: DetectorConfig::default(), cascade: None }
    }
}

impl DetectorSpec {
    /// Instantiates the detector; relative cascade paths resolve against `base`.
    pub fn build(&self, base: Option<&Path>) -> Result<Arc<dyn FaceDetector>, EvalError> {
        Ok(match self {
            DetectorSpec::Builtin { config, cascade: None } => Arc::new(BuiltinDetector::bundled(*config)?),
            DetectorSpec::Builtin { config, cascade: Some(path) } => {
                let path = match base {
                    Some(b) if path.is_relative() => b.join(path),
                    _ => path.clone(),
                };
                let cascade = Cascade::load(&path)?;
                let name = path.file_stem().map_or(BUNDLED_NAME.into(), |s| s.to_string_lossy().into_owned());
                Arc::new(BuiltinDetector::new(Arc::new(cascade), *config, name)?)
            }
            DetectorSpec::External(cfg) => Arc::new(ExternalDetector::new(cfg.clone())?),
        })
    }
}

/// Parameter sweep over one filter kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub filter: FilterKind,
    /// Parameter values to cross; the filter's default grid when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<IndexMap<String, Vec<ParamValue>>>,
    /// Parameters held fixed in every cell.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub fixed: BTreeMap<String, ParamValue>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub detector: DetectorSpec,
    /// Manifests to load, relative to the sweep file.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub corpus: Vec<PathBuf>,
    #[serde(default)]
    pub scoring: ScoringOptions,
    #[serde(default = "default_max_cells")]
    pub max_cells: usize,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_max_cells() -> usize {
    DEFAULT_MAX_CELLS
}

impl SweepSpec {
    pub fn new(filter: FilterKind) -> Self {
        SweepSpec {
            filter,
            grid: None,
            fixed: BTreeMap::new(),
            seeds: default_seeds(),
            detector: DetectorSpec::default(),
            corpus: Vec::new(),
            scoring: ScoringOptions::default(),
            max_cells: DEFAULT_MAX_CELLS,
        }
    }

    pub fn with_grid(mut self, grid: IndexMap<String, Vec<ParamValue>>) -> Self {
        self.grid = Some(grid);
        self
    }

    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Grid points in definition order: the first parameter varies slowest.
    pub fn grid_points(&self) -> Result<Vec<BTreeMap<String, ParamValue>>, EvalError> {
        let grid = match &self.grid {
            Some(g) => g.clone(),
            None => default_grid(self.filter),
        };
        if grid.is_empty() && !(self.grid.is_none() && schema(self.filter).params.is_empty()) {
            return Err(EvalError::EmptyGrid("the grid has no parameters".into()));
        }
        if let Some((name, _)) = grid.iter().find(|(_, v)| v.is_empty()) {
            return Err(EvalError::EmptyGrid(format!("parameter {name:?} has no values")));
        }
        if self.seeds.is_empty() {
            return Err(EvalError::EmptyGrid("no seeds".into()));
        }
        let cells = grid.values().try_fold(1usize, |acc, v| acc.checked_mul(v.len())).unwrap_or(usize::MAX);
        let total = cells.saturating_mul(self.seeds.len());
        if total > self.max_cells {
            return Err(EvalError::TooManyCells { cells: total, max: self.max_cells });
        }
        let mut points = vec![self.fixed.clone()];
        for (name, values) in &grid {
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut q = p.clone();
                        q.insert(name.clone(), v.clone());
                        q
                    })
                })
                .collect();
        }
        Ok(points)
    }

    /// Every spec the sweep will run, validated up front.
    pub fn specs(&self) -> Result<Vec<Vec<FilterSpec>>, EvalError> {
        self.grid_points()?
            .into_iter()
            .map(|params| {
                self.seeds
                    .iter()
                    .map(|&seed| {
                        let spec = FilterSpec { kind: self.filter, seed, params: params.clone() };
                        spec.resolve()?;
                        Ok(spec)
                    })
                    .collect()
            })
            .collect()
    }
}

/// Runs every grid point and seed; cells follow the grid definition order.
pub fn sweep(corpus: &Corpus, spec: &SweepSpec, detector: &dyn FaceDetector) -> Result<EvalReport, EvalError> {
    spec.scoring.validate()?;
    let specs = spec.specs()?;
    let cells = specs
        .into_iter()
        .map(|runs| {
            let params = runs[0].params.clone();
            let results = runs.iter().map(|s| run_spec(corpus, s, detector, &spec.scoring)).collect();
            Cell::from_runs(spec.filter, params, results)
        })
        .collect();
    Ok(EvalReport { provenance: Provenance::new(detector, spec.scoring, corpus_summary(corpus)), cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_order_is_odometer() {
        let mut grid = IndexMap::new();
        grid.insert("thickness".to_string(), vec![ParamValue::Real(0.1), ParamValue::Real(0.2)]);
        grid.insert("color".to_string(), vec![ParamValue::from("white"), ParamValue::from("black")]);
        let s = SweepSpec::new(FilterKind::Censor).with_grid(grid);
        let pts = s.grid_points().unwrap();
        let labels: Vec<String> = pts.iter().map(|p| format!("{}-{}", p["thickness"], p["color"])).collect();
        assert_eq!(labels, ["0.1-white", "0.1-black", "0.2-white", "0.2-black"]);
    }

    #[test]
    fn empty_grids_are_rejected() {
        let s = SweepSpec::new(FilterKind::Noise).with_grid(IndexMap::new());
        assert!(s.grid_points().unwrap_err().to_string().contains("empty grid"));
        let mut grid = IndexMap::new();
        grid.insert("sigma".to_string(), vec![]);
        let s = SweepSpec::new(FilterKind::Noise).with_grid(grid);
        assert!(matches!(s.grid_points(), Err(EvalError::EmptyGrid(_))));
        let s = SweepSpec { seeds: vec![], ..SweepSpec::new(FilterKind::Noise) };
        assert!(matches!(s.grid_points(), Err(EvalError::EmptyGrid(_))));
    }

    #[test]
    fn identity_default_grid_is_one_cell() {
        assert_eq!(SweepSpec::new(FilterKind::Identity).grid_points().unwrap().len(), 1);
    }

    #[test]
    fn cell_cap() {
        let s = SweepSpec { max_cells: 10, seeds: vec![1, 2], ..SweepSpec::new(FilterKind::Noise) };
        assert!(matches!(s.grid_points(), Err(EvalError::TooManyCells { cells: 12, max: 10 })));
    }

    #[test]
    fn invalid_values_fail_before_running() {
        let mut grid = IndexMap::new();
        grid.insert("sigma".to_string(), vec![ParamValue::Real(4.0), ParamValue::Real(-1.0)]);
        let s = SweepSpec::new(FilterKind::Blur).with_grid(grid);
        assert!(matches!(s.specs(), Err(EvalError::Filter(_))));
    }

    #[test]
    fn sweep_json_round_trip() {
        let text = r#"{"filter": "noise", "grid": {"sigma": [0, 50]}, "seeds": [1, 2],
            "detector": {"kind": "builtin", "config": {"min_neighbors": 2}}}"#;
        let s = SweepSpec::from_json(text).unwrap();
        assert_eq!(s.grid.as_ref().unwrap()["sigma"], vec![ParamValue::Int(0), ParamValue::Int(50)]);
        assert_eq!(s.detector, DetectorSpec::Builtin { config: DetectorConfig { min_neighbors: 2, ..Default::default() }, cascade: None });
        assert_eq!(SweepSpec::from_json(&serde_json::to_string(&s).unwrap()).unwrap(), s);
        let ext = r#"{"filter": "blur", "detector": {"kind": "external", "endpoint": {"kind": "http", "url": "http://h/"}, "concurrency": 4}}"#;
        match SweepSpec::from_json(ext).unwrap().detector {
            DetectorSpec::External(c) => assert_eq!(c.concurrency, 4),
            other => panic!("{other:?}"),
        }
        assert!(SweepSpec::from_json(r#"{"filter": "blur", "gird": {}}"#).is_err());
    }
}
