//! Python bindings: catalog, streaming features, labeling, simulation,
//! forest training and evaluation arithmetic.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use memfail::celog::{CeRecord, DimmId};
use memfail::evalharness::{self, BaselineInput, ConfusionCounts};
use memfail::fengine::{self, Mode, WindowConfig};
use memfail::forest::{self, Classifier, ForestParams, TrainedForest};
use memfail::labeling;
use memfail::simgen::{self, FleetConfig};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn dimm_id(s: &str) -> PyResult<DimmId> {
    DimmId::new(s).map_err(value_err)
}

/// `(name, taxonomy, scope, kind)` for every feature, in vector order.
#[pyfunction]
fn catalog() -> Vec<(String, String, String, String)> {
    fengine::catalog()
        .iter()
        .map(|s| {
            let kind = match s.kind {
                fengine::ValueKind::Count => "count",
                fengine::ValueKind::Real => "real",
            };
            (s.name.to_string(), s.taxonomy.to_string(), s.scope.as_str().to_string(), kind.to_string())
        })
        .collect()
}

#[pyfunction]
fn catalog_version() -> &'static str {
    fengine::CATALOG_VERSION
}

/// Incremental feature state of one DIMM.
#[pyclass(name = "DimmState")]
struct PyDimmState {
    inner: fengine::DimmState,
}

#[pymethods]
impl PyDimmState {
    #[new]
    #[pyo3(signature = (dimm, window_hours, mode = "overall"))]
    fn new(dimm: &str, window_hours: f64, mode: &str) -> PyResult<Self> {
        let mode: Mode = mode.parse().map_err(value_err)?;
        let cfg = WindowConfig::new(window_hours, mode).map_err(value_err)?;
        let inner = fengine::DimmState::new(dimm_id(dimm)?, cfg).map_err(value_err)?;
        Ok(PyDimmState { inner })
    }

    #[pyo3(signature = (ts, error_type, bank, row, col))]
    fn ingest(&mut self, ts: i64, error_type: &str, bank: u32, row: u32, col: u32) -> PyResult<()> {
        let rec = CeRecord {
            ts,
            dimm: self.inner.dimm().clone(),
            error_type: error_type.to_string(),
            rank: None,
            bank: Some(bank),
            row: Some(row),
            col: Some(col),
        };
        self.inner.ingest(&rec).map_err(value_err)
    }

    fn advance_to(&mut self, ts: i64) -> PyResult<()> {
        self.inner.advance_to(ts).map_err(value_err)
    }

    fn snapshot(&self) -> PyResult<Vec<f64>> {
        Ok(self.inner.snapshot().map_err(value_err)?.values().to_vec())
    }
}

#[pyfunction]
fn largest_gap_split(timestamps: Vec<i64>) -> PyResult<usize> {
    labeling::largest_gap_split(&timestamps).map_err(value_err)
}

type PyRecord = (i64, String, String, Option<u32>, Option<u32>, Option<u32>);

/// Returns `(records, failures)`; records are
/// `(ts, dimm, type, bank, row, col)` tuples in time order.
#[pyfunction]
#[pyo3(signature = (n_normal = 2000, n_failing = 60, duration_hours = 4320.0, seed = 7, benign_burst_fraction = 0.0))]
fn simulate(
    n_normal: usize,
    n_failing: usize,
    duration_hours: f64,
    seed: u64,
    benign_burst_fraction: f64,
) -> PyResult<(Vec<PyRecord>, Vec<(String, i64)>)> {
    let cfg = FleetConfig { n_normal, n_failing, duration_hours, seed, benign_burst_fraction, ..Default::default() };
    let fleet = simgen::generate(&cfg).map_err(value_err)?;
    let records = fleet
        .records
        .into_iter()
        .map(|r| (r.ts, r.dimm.to_string(), r.error_type, r.bank, r.row, r.col))
        .collect();
    let failures = fleet.failures.into_iter().map(|f| (f.dimm.to_string(), f.failure_time)).collect();
    Ok((records, failures))
}

#[pyclass(name = "Forest")]
struct PyForest {
    inner: TrainedForest,
}

#[pymethods]
impl PyForest {
    #[staticmethod]
    #[pyo3(signature = (rows, labels, n_trees = 100, seed = 0, max_depth = None, min_samples_split = 2, features_per_split = None))]
    fn train(
        py: Python<'_>,
        rows: Vec<Vec<f64>>,
        labels: Vec<u8>,
        n_trees: usize,
        seed: u64,
        max_depth: Option<usize>,
        min_samples_split: usize,
        features_per_split: Option<usize>,
    ) -> PyResult<Self> {
        let params = ForestParams { n_trees, max_depth, min_samples_split, features_per_split, seed };
        let version = if rows.first().is_some_and(|r| r.len() == fengine::FEATURE_COUNT) {
            fengine::CATALOG_VERSION
        } else {
            "custom"
        };
        let inner = py.detach(|| {
            let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
            forest::train_matrix(&refs, &labels, &params, version)
        });
        Ok(PyForest { inner: inner.map_err(value_err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyForest { inner: TrainedForest::from_json(text).map_err(value_err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(value_err)
    }

    fn predict_proba(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.predict_proba(&x).map_err(value_err)
    }

    fn feature_importance(&self) -> Vec<f64> {
        self.inner.feature_importance()
    }

    #[getter]
    fn n_features(&self) -> usize {
        self.inner.n_features
    }

    #[getter]
    fn n_trees(&self) -> usize {
        self.inner.trees.len()
    }
}

/// `(precision, recall, precision_undefined, recall_undefined)`.
#[pyfunction]
#[pyo3(signature = (tp, fp, fn_, tn))]
fn metrics(tp: u64, fp: u64, fn_: u64, tn: u64) -> (f64, f64, bool, bool) {
    let m = evalharness::metrics(&ConfusionCounts { tp, fp, fn_, tn });
    (m.precision, m.recall, m.precision_undefined, m.recall_undefined)
}

#[pyfunction]
fn error_rate_normal(flags: Vec<bool>) -> PyResult<f64> {
    evalharness::error_rate_normal(&flags).map_err(value_err)
}

#[pyfunction]
fn relative_improvement(a: f64, b: f64) -> PyResult<f64> {
    evalharness::relative_improvement(a, b).map_err(value_err)
}

/// Sweep rows `(threshold, precision, recall, error_rate)` for DIMMs given
/// as `(failed, timestamps)`.
#[pyfunction]
fn threshold_baseline(dimms: Vec<(bool, Vec<i64>)>, window_hours: f64) -> PyResult<Vec<(f64, f64, f64, f64)>> {
    let inputs = dimms
        .into_iter()
        .enumerate()
        .map(|(i, (failed, mut timestamps))| {
            timestamps.sort_unstable();
            Ok(BaselineInput { dimm: dimm_id(&format!("d{i}"))?, failed, timestamps })
        })
        .collect::<PyResult<Vec<_>>>()?;
    let sweep = evalharness::threshold_baseline(&inputs, window_hours).map_err(value_err)?;
    Ok(sweep.sweep.iter().map(|p| (p.threshold, p.precision, p.recall, p.error_rate)).collect())
}

#[pymodule]
#[pyo3(name = "memfail")]
fn memfail_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(catalog, m)?)?;
    m.add_function(wrap_pyfunction!(catalog_version, m)?)?;
    m.add_function(wrap_pyfunction!(largest_gap_split, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(error_rate_normal, m)?)?;
    m.add_function(wrap_pyfunction!(relative_improvement, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_baseline, m)?)?;
    m.add_class::<PyDimmState>()?;
    m.add_class::<PyForest>()?;
    Ok(())
}
