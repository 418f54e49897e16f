//! Python bindings: `import gpart`.

use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use gpart_core::adapters::{self, Adapter, GPartMode};
use gpart_core::geometry::{self, ProbeMap};
use gpart_core::weightspace::ModelManifest;
use gpart_core::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::Numeric(_) => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn manifest_from(
    shapes: Vec<(usize, usize)>,
    names: Option<Vec<String>>,
) -> PyResult<ModelManifest> {
    match names {
        None => gpart_core::weightspace::build_manifest(&shapes),
        Some(names) => {
            if names.len() != shapes.len() {
                return Err(PyValueError::new_err("names and shapes differ in length"));
            }
            let named: Vec<_> = names
                .into_iter()
                .zip(shapes)
                .map(|(n, (r, c))| (n, r, c))
                .collect();
            ModelManifest::from_named(&named)
        }
    }
    .map_err(to_py)
}

/// Ordered list of named weight matrices.
#[pyclass(name = "Manifest", frozen)]
struct PyManifest {
    inner: ModelManifest,
}

#[pymethods]
impl PyManifest {
    #[new]
    #[pyo3(signature = (shapes, names=None))]
    fn new(shapes: Vec<(usize, usize)>, names: Option<Vec<String>>) -> PyResult<Self> {
        Ok(Self {
            inner: manifest_from(shapes, names)?,
        })
    }

    #[getter]
    fn total(&self) -> usize {
        self.inner.total()
    }

    /// `[(name, rows, cols, offset), ...]`
    fn layers(&self) -> Vec<(String, usize, usize, usize)> {
        self.inner
            .layers()
            .iter()
            .map(|l| (l.name.clone(), l.rows, l.cols, l.offset))
            .collect()
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn __repr__(&self) -> String {
        format!(
            "Manifest(layers={}, total={})",
            self.inner.layers().len(),
            self.inner.total()
        )
    }
}

/// Balanced random partition of `total` coordinates into `dim` groups.
#[pyclass(name = "PartitionMap", frozen)]
struct PyPartitionMap {
    inner: gpart_core::PartitionMap,
}

#[pymethods]
impl PyPartitionMap {
    #[new]
    fn new(seed: u64, total: usize, dim: usize) -> PyResult<Self> {
        Ok(Self {
            inner: gpart_core::PartitionMap::build(seed, total, dim).map_err(to_py)?,
        })
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed()
    }

    #[getter]
    fn total(&self) -> usize {
        self.inner.total()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn assignment(&self) -> Vec<u32> {
        self.inner.assignment().to_vec()
    }

    fn group_sizes(&self) -> Vec<usize> {
        self.inner.group_sizes().to_vec()
    }

    fn project(&self, theta: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.project(&theta).map_err(to_py)?.into_inner())
    }

    fn pullback(&self, grad: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.pullback(&grad).map_err(to_py)?.into_inner())
    }

    /// Dense `total x dim` matrix as nested lists (size-guarded).
    fn materialize(&self) -> PyResult<Vec<Vec<f64>>> {
        let p = self.inner.materialize().map_err(to_py)?;
        Ok(p.row_iter().map(|r| r.iter().copied().collect()).collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "PartitionMap(seed={}, total={}, dim={})",
            self.inner.seed(),
            self.inner.total(),
            self.inner.dim()
        )
    }
}

#[pyclass(name = "GPartAdapter")]
struct PyGPartAdapter {
    inner: adapters::GPartAdapter,
}

#[pymethods]
impl PyGPartAdapter {
    #[new]
    #[pyo3(signature = (seed, total, dim, isometric=true))]
    fn new(seed: u64, total: usize, dim: usize, isometric: bool) -> PyResult<Self> {
        let mode = if isometric {
            GPartMode::Isometric
        } else {
            GPartMode::NonIsometric
        };
        Ok(Self {
            inner: adapters::GPartAdapter::build(seed, total, dim, mode).map_err(to_py)?,
        })
    }

    #[getter]
    fn theta(&self) -> Vec<f64> {
        self.inner.params().to_vec()
    }

    #[setter]
    fn set_theta(&mut self, theta: Vec<f64>) -> PyResult<()> {
        self.inner.set_params(&theta).map_err(to_py)
    }

    #[getter]
    fn isometric(&self) -> bool {
        self.inner.mode() == GPartMode::Isometric
    }

    fn partition(&self) -> PyPartitionMap {
        PyPartitionMap {
            inner: self.inner.partition().clone(),
        }
    }

    fn count_trainable(&self) -> usize {
        self.inner.count_trainable()
    }

    fn delta(&self) -> Vec<f64> {
        self.inner.delta().into_inner()
    }

    fn pullback_grad(&self, grad: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.pullback_grad(&grad).map_err(to_py)
    }

    fn merge(&self, w0: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.merge(&w0).map_err(to_py)?.into_inner())
    }

    /// `(‖θ‖², ‖Δw‖², ratio)`
    fn weight_decay_audit(&self) -> (f64, f64, f64) {
        let a = geometry::weight_decay_audit(&self.inner);
        (a.theta_sq, a.delta_sq, a.ratio)
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &adapters::encode_checkpoint(&self.inner))
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        Ok(Self {
            inner: adapters::decode_checkpoint(data).map_err(to_py)?,
        })
    }

    fn save(&self, path: std::path::PathBuf) -> PyResult<()> {
        adapters::save_checkpoint(&self.inner, path).map_err(to_py)
    }

    /// Loads a checkpoint and checks its `total` against `manifest`.
    #[staticmethod]
    fn load(path: std::path::PathBuf, manifest: &PyManifest) -> PyResult<Self> {
        Ok(Self {
            inner: adapters::load_checkpoint(path, &manifest.inner).map_err(to_py)?,
        })
    }
}

#[pyclass(name = "LoraAdapter")]
struct PyLoraAdapter {
    inner: adapters::LoraAdapter,
}

#[pymethods]
impl PyLoraAdapter {
    #[new]
    fn new(manifest: &PyManifest, rank: usize, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: adapters::LoraAdapter::new(manifest.inner.clone(), rank, seed).map_err(to_py)?,
        })
    }

    #[getter]
    fn params(&self) -> Vec<f64> {
        self.inner.params().to_vec()
    }

    #[setter]
    fn set_params(&mut self, params: Vec<f64>) -> PyResult<()> {
        self.inner.set_params(&params).map_err(to_py)
    }

    #[getter]
    fn rank(&self) -> usize {
        self.inner.rank()
    }

    fn count_trainable(&self) -> usize {
        self.inner.count_trainable()
    }

    fn delta(&self) -> Vec<f64> {
        self.inner.delta().into_inner()
    }

    fn pullback_grad(&self, grad: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.pullback_grad(&grad).map_err(to_py)
    }

    fn merge(&self, w0: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.merge(&w0).map_err(to_py)?.into_inner())
    }
}

/// Max/min distance ratio of the LoRA map `(B, A) -> BA` on one `rows x cols` layer.
#[pyfunction]
#[pyo3(signature = (rows, cols, rank, pairs=200, seed=0))]
fn lora_distortion(
    rows: usize,
    cols: usize,
    rank: usize,
    pairs: usize,
    seed: u64,
) -> PyResult<f64> {
    let manifest = gpart_core::weightspace::build_manifest(&[(rows, cols)]).map_err(to_py)?;
    let rep = geometry::distortion_probe(&ProbeMap::Lora { manifest, rank }, pairs, seed)
        .map_err(to_py)?;
    Ok(rep.spread)
}

/// Same ratio for the GPart projection; 1 up to rounding when isometric.
#[pyfunction]
#[pyo3(signature = (partition, pairs=200, seed=0, isometric=true))]
fn gpart_distortion(
    partition: &PyPartitionMap,
    pairs: usize,
    seed: u64,
    isometric: bool,
) -> PyResult<f64> {
    let pm = partition.inner.clone();
    let map = if isometric {
        ProbeMap::GPartIso(pm)
    } else {
        ProbeMap::GPartNonIso(pm)
    };
    Ok(geometry::distortion_probe(&map, pairs, seed)
        .map_err(to_py)?
        .spread)
}

/// Runs the property suite; returns `[(name, passed, detail), ...]`.
#[pyfunction]
#[pyo3(signature = (filter=None))]
fn verify(py: Python<'_>, filter: Option<String>) -> Vec<(String, bool, String)> {
    let hooks = gpart_core::verify::Hooks::default();
    py.detach(|| gpart_core::verify::run_suite(filter.as_deref(), &hooks))
        .into_iter()
        .map(|o| (o.name.to_string(), o.passed, o.detail))
        .collect()
}

#[pyfunction]
fn property_names() -> Vec<&'static str> {
    gpart_core::verify::property_names()
}

#[pymodule]
fn gpart(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyManifest>()?;
    m.add_class::<PyPartitionMap>()?;
    m.add_class::<PyGPartAdapter>()?;
    m.add_class::<PyLoraAdapter>()?;
    m.add_function(wrap_pyfunction!(lora_distortion, m)?)?;
    m.add_function(wrap_pyfunction!(gpart_distortion, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(property_names, m)?)?;
    Ok(())
}
