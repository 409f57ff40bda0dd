//! Python bindings. Grids cross the boundary as lists of row lists.

use ndarray::Array2;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use radiofill::baselines::{mbi_reconstruct, rbf_reconstruct, RbfConfig};
use radiofill::estimators::{build_estimator, EstimatorConfig, Method};
use radiofill::metrics;
use radiofill::scenegen::{self, Layout, SceneSpec};
use radiofill::{init_region_state, ObstacleMap, PriorityConfig, PriorityMode, RegionState};

type Rows = Vec<Vec<f64>>;

fn to_array(rows: Rows) -> Result<Array2<f64>, String> {
    let height = rows.len();
    let width = rows.first().map_or(0, Vec::len);
    if height == 0 || width == 0 {
        return Err("grid must have at least one row and one column".into());
    }
    if let Some(i) = rows.iter().position(|r| r.len() != width) {
        return Err(format!("row {i} has {} values, expected {width}", rows[i].len()));
    }
    Array2::from_shape_vec((height, width), rows.into_iter().flatten().collect()).map_err(|e| e.to_string())
}

fn to_flags(rows: Rows) -> Result<Array2<bool>, String> {
    let a = to_array(rows)?;
    if let Some(v) = a.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(format!("flag grids hold 0 or 1, found {v}"));
    }
    Ok(a.mapv(|v| v == 1.0))
}

fn from_array(a: &Array2<f64>) -> Rows {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn py_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(frozen, skip_from_py_object, name = "Rect")]
#[derive(Clone, Copy)]
struct PyRect {
    inner: radiofill::Rect,
}

#[pymethods]
impl PyRect {
    #[new]
    fn new(top: usize, left: usize, height: usize, width: usize) -> Self {
        Self {
            inner: radiofill::Rect::new(top, left, height, width),
        }
    }

    #[getter]
    fn top(&self) -> usize {
        self.inner.top
    }

    #[getter]
    fn left(&self) -> usize {
        self.inner.left
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width
    }

    fn area(&self) -> usize {
        self.inner.area()
    }

    fn __repr__(&self) -> String {
        let r = self.inner;
        format!("Rect({}, {}, {}, {})", r.top, r.left, r.height, r.width)
    }
}

#[pyclass(frozen, skip_from_py_object, name = "Transmitter")]
#[derive(Clone, Copy)]
struct PyTransmitter {
    inner: radiofill::Transmitter,
}

#[pymethods]
impl PyTransmitter {
    #[new]
    fn new(row: f64, col: f64) -> PyResult<Self> {
        if !row.is_finite() || !col.is_finite() {
            return Err(py_err("transmitter position must be finite"));
        }
        Ok(Self {
            inner: radiofill::Transmitter::new(row, col),
        })
    }

    #[getter]
    fn row(&self) -> f64 {
        self.inner.row
    }

    #[getter]
    fn col(&self) -> f64 {
        self.inner.col
    }

    fn __repr__(&self) -> String {
        format!("Transmitter({}, {})", self.inner.row, self.inner.col)
    }
}

/// A normalized radio map and the range it was normalized from.
#[pyclass(frozen, name = "RadioMap")]
struct PyRadioMap {
    inner: radiofill::RadioMap,
}

#[pymethods]
impl PyRadioMap {
    /// Normalizes a grid of powers to [0, 1].
    #[staticmethod]
    fn normalize(raw: Rows) -> PyResult<Self> {
        let a = to_array(raw).map_err(py_err)?;
        Ok(Self {
            inner: radiofill::normalize(&a).map_err(py_err)?,
        })
    }

    #[getter]
    fn values(&self) -> Rows {
        from_array(&self.inner.values)
    }

    #[getter]
    fn norm_min(&self) -> f64 {
        self.inner.norm_min
    }

    #[getter]
    fn norm_max(&self) -> f64 {
        self.inner.norm_max
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.inner.shape()
    }

    fn to_raw(&self) -> Rows {
        from_array(&radiofill::denormalize(&self.inner))
    }
}

fn region(map: &radiofill::RadioMap, rect: Option<PyRef<'_, PyRect>>, mask: Option<Rows>) -> PyResult<RegionState> {
    match (rect, mask) {
        (Some(r), None) => init_region_state(map, r.inner).map_err(py_err),
        (None, Some(m)) => {
            let m = to_flags(m).map_err(py_err)?;
            if m.dim() != map.shape() {
                return Err(py_err(format!("mask is {:?} but the map is {:?}", m.dim(), map.shape())));
            }
            RegionState::from_mask(&m).map_err(py_err)
        }
        _ => Err(py_err("give exactly one of rect or mask")),
    }
}

/// Fills the restricted cells. Returns the reconstructed map and the fill
/// order as `(row, col, priority)` tuples.
#[pyfunction]
#[pyo3(signature = (map, txs, rect=None, mask=None, obstacles=None, method="epc", priority="full",
    patch_size=15, beta=2.0, lambda_=0.01, dict_size=500, train_patches=2000, ksvd_iters=15, seed=0, clamp=true))]
#[allow(clippy::too_many_arguments)]
fn reconstruct(
    py: Python<'_>,
    map: PyRef<'_, PyRadioMap>,
    txs: Vec<PyRef<'_, PyTransmitter>>,
    rect: Option<PyRef<'_, PyRect>>,
    mask: Option<Rows>,
    obstacles: Option<Rows>,
    method: &str,
    priority: &str,
    patch_size: usize,
    beta: f64,
    lambda_: f64,
    dict_size: usize,
    train_patches: usize,
    ksvd_iters: usize,
    seed: u64,
    clamp: bool,
) -> PyResult<(PyRadioMap, Vec<(usize, usize, f64)>)> {
    let map = &map.inner;
    let mut state = region(map, rect, mask)?;
    let obstacles = match obstacles {
        Some(o) => ObstacleMap {
            cells: to_flags(o).map_err(py_err)?,
        },
        None => ObstacleMap::empty(map.rows(), map.cols()),
    };
    let txs: Vec<radiofill::Transmitter> = txs.iter().map(|t| t.inner).collect();
    let method = match method {
        "epc" => Method::Epc,
        "epd" => Method::Epd,
        other => return Err(py_err(format!("unknown method {other:?}, expected epc or epd"))),
    };
    let mode = match priority {
        "full" => PriorityMode::Full,
        "texture" => PriorityMode::TextureOnly,
        other => return Err(py_err(format!("unknown priority {other:?}, expected full or texture"))),
    };
    let pcfg = PriorityConfig {
        patch_size,
        beta,
        mode,
        ..PriorityConfig::default()
    };
    let ecfg = EstimatorConfig {
        method,
        lambda: lambda_,
        dict_size,
        train_patches,
        ksvd_iters,
        rng_seed: seed,
        clamp_output: clamp,
        ..EstimatorConfig::default()
    };
    let (out, report) = py
        .detach(|| {
            let est = build_estimator(&ecfg, map, &state, patch_size, None)?;
            radiofill::reconstruct(map, &mut state, &obstacles, &txs, &pcfg, est.as_ref())
        })
        .map_err(py_err)?;
    let order = report
        .fill_order
        .iter()
        .map(|s| (s.center.row, s.center.col, s.priority))
        .collect();
    Ok((PyRadioMap { inner: out }, order))
}

/// Radial-basis interpolation baseline.
#[pyfunction]
#[pyo3(signature = (map, rect=None, mask=None))]
fn rbf(map: PyRef<'_, PyRadioMap>, rect: Option<PyRef<'_, PyRect>>, mask: Option<Rows>) -> PyResult<PyRadioMap> {
    let state = region(&map.inner, rect, mask)?;
    let out = rbf_reconstruct(&map.inner, &state, &RbfConfig::default()).map_err(py_err)?;
    Ok(PyRadioMap { inner: out })
}

/// Log-distance fit baseline. Returns the map and the fitted exponent.
#[pyfunction]
#[pyo3(signature = (map, tx, rect=None, mask=None))]
fn mbi(
    map: PyRef<'_, PyRadioMap>,
    tx: PyRef<'_, PyTransmitter>,
    rect: Option<PyRef<'_, PyRect>>,
    mask: Option<Rows>,
) -> PyResult<(PyRadioMap, f64)> {
    let state = region(&map.inner, rect, mask)?;
    let (out, fit) = mbi_reconstruct(&map.inner, &state, &tx.inner).map_err(py_err)?;
    Ok((PyRadioMap { inner: out }, fit.gamma))
}

#[pyfunction]
fn mse(truth: Rows, estimate: Rows, rect: PyRef<'_, PyRect>) -> PyResult<f64> {
    let t = to_array(truth).map_err(py_err)?;
    let e = to_array(estimate).map_err(py_err)?;
    metrics::mse(&t, &e, &rect.inner).map_err(py_err)
}

#[pyfunction]
fn ne(truth: Rows, estimate: Rows, rect: PyRef<'_, PyRect>) -> PyResult<f64> {
    let t = to_array(truth).map_err(py_err)?;
    let e = to_array(estimate).map_err(py_err)?;
    metrics::ne(&t, &e, &rect.inner).map_err(py_err)
}

/// Synthetic scene. Returns `(map, obstacles, tx)`.
#[pyfunction]
#[pyo3(signature = (rows=120, cols=160, tx=(-40.0, 80.0), layout="vertical_stripes", seed=0,
    pathloss_exponent=2.0, attenuation=0.3, shadow_amplitude=0.3, correlation_length=12.0))]
#[allow(clippy::too_many_arguments)]
fn generate_scene(
    rows: usize,
    cols: usize,
    tx: (f64, f64),
    layout: &str,
    seed: u64,
    pathloss_exponent: f64,
    attenuation: f64,
    shadow_amplitude: f64,
    correlation_length: f64,
) -> PyResult<(PyRadioMap, Vec<Vec<u8>>, PyTransmitter)> {
    let layout = match layout {
        "empty" => Layout::Empty,
        "vertical_stripes" => Layout::VerticalStripes,
        "city_blocks" => Layout::CityBlocks,
        other => return Err(py_err(format!("unknown layout {other:?}"))),
    };
    let scene = scenegen::generate(&SceneSpec {
        rows,
        cols,
        tx,
        layout,
        seed,
        pathloss_exponent,
        attenuation,
        shadow_amplitude,
        correlation_length,
        ..SceneSpec::default()
    })
    .map_err(py_err)?;
    let obstacles = scene
        .obstacles
        .cells
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|&b| b as u8).collect())
        .collect();
    Ok((PyRadioMap { inner: scene.map }, obstacles, PyTransmitter { inner: scene.tx }))
}

#[pymodule]
#[pyo3(name = "radiofill")]
fn radiofill_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRect>()?;
    m.add_class::<PyTransmitter>()?;
    m.add_class::<PyRadioMap>()?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(rbf, m)?)?;
    m.add_function(wrap_pyfunction!(mbi, m)?)?;
    m.add_function(wrap_pyfunction!(mse, m)?)?;
    m.add_function(wrap_pyfunction!(ne, m)?)?;
    m.add_function(wrap_pyfunction!(generate_scene, m)?)?;
    Ok(())
}
