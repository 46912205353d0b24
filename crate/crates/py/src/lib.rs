//! Python bindings for `tdinv`.
//!
//! Images and measurements cross the boundary as NumPy arrays (`float64`
//! unless noted). Long-running calls release the interpreter lock.

use ndarray::{Array2, ArrayD, IxDyn};
use numpy::{
    IntoPyArray, PyArray2, PyArrayDyn, PyArrayMethods, PyReadonlyArray2, PyReadonlyArrayDyn, PyUntypedArrayMethods,
};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tdinv::inversion::{InversionConfig, Truth};
use tdinv::noise::{NoiseKind, NoiseSpec};
use tdinv::phantom::{Family, GlyphStore};
use tdinv::scenario::Measurement;
use tdinv::store::tensor::{Tensor, TensorData};
use tdinv::Error;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io { .. } => PyOSError::new_err(err.to_string()),
        Error::InvalidInput(_) | Error::ShapeMismatch { .. } | Error::PlacementFailed { .. } => {
            PyValueError::new_err(err.to_string())
        }
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

fn owned(a: &PyReadonlyArray2<'_, f64>) -> Array2<f64> {
    a.as_array().to_owned()
}

fn json_to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Measurement geometry, grid and pulse.
#[pyclass(name = "Scenario", module = "tdinv_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: tdinv::scenario::Scenario,
}

#[pymethods]
impl PyScenario {
    /// The canonical 301x301 scenario.
    #[new]
    fn new() -> Self {
        PyScenario { inner: tdinv::scenario::default_scenario() }
    }

    /// Same physical setup with cells and time steps refined by `factor`.
    #[staticmethod]
    fn refined(factor: usize) -> PyResult<Self> {
        Ok(PyScenario { inner: tdinv::scenario::Scenario::with_refinement(factor).map_err(to_py)? })
    }

    #[getter]
    fn n_receivers(&self) -> usize {
        self.inner.n_receivers
    }

    #[getter]
    fn n_samples(&self) -> usize {
        self.inner.n_samples
    }

    #[getter]
    fn sample_dt(&self) -> f64 {
        self.inner.sample_dt
    }

    #[getter]
    fn imaging_cells(&self) -> usize {
        self.inner.imaging_cells
    }

    #[getter]
    fn grid_shape(&self) -> (usize, usize) {
        (self.inner.grid.nx, self.inner.grid.ny)
    }

    #[getter]
    fn dx(&self) -> f64 {
        self.inner.grid.dx
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.grid.dt
    }

    #[getter]
    fn receivers(&self) -> Vec<(usize, usize)> {
        self.inner.receivers.clone()
    }

    #[getter]
    fn transmitter(&self) -> (usize, usize) {
        self.inner.transmitter
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py)
    }

    /// Total receiver field (receivers x samples) for the given images.
    #[pyo3(signature = (eps, sigma=None))]
    fn simulate<'py>(
        &self,
        py: Python<'py>,
        eps: PyReadonlyArray2<'py, f64>,
        sigma: Option<PyReadonlyArray2<'py, f64>>,
    ) -> PyResult<Bound<'py, PyArray2<f64>>> {
        let (eps, sigma) = (owned(&eps), sigma.as_ref().map(owned));
        let m = py.detach(|| self.inner.simulate_image(&eps, sigma.as_ref())).map_err(to_py)?;
        Ok(m.values.into_pyarray(py))
    }

    /// Field of the empty domain.
    fn incident<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyArray2<f64>>> {
        let m = py.detach(|| self.inner.incident()).map_err(to_py)?;
        Ok(m.values.into_pyarray(py))
    }

    /// Scattered field: total minus incident. This is what datasets store.
    #[pyo3(signature = (eps, sigma=None))]
    fn scattered<'py>(
        &self,
        py: Python<'py>,
        eps: PyReadonlyArray2<'py, f64>,
        sigma: Option<PyReadonlyArray2<'py, f64>>,
    ) -> PyResult<Bound<'py, PyArray2<f64>>> {
        let (eps, sigma) = (owned(&eps), sigma.as_ref().map(owned));
        let m = py
            .detach(|| self.inner.simulate_image(&eps, sigma.as_ref())?.minus(&self.inner.incident()?))
            .map_err(to_py)?;
        Ok(m.values.into_pyarray(py))
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(grid={}x{}, receivers={}, samples={})",
            self.inner.grid.nx, self.inner.grid.ny, self.inner.n_receivers, self.inner.n_samples
        )
    }
}

type PhantomArrays<'py> = (Bound<'py, PyArray2<f64>>, Bound<'py, PyArray2<f64>>, Bound<'py, PyAny>);

/// `(eps, sigma, meta)` for a phantom family `A`-`F` or `austria`.
#[pyfunction]
#[pyo3(signature = (family, seed, emnist=None))]
fn generate_phantom<'py>(
    py: Python<'py>,
    family: &str,
    seed: u64,
    emnist: Option<std::path::PathBuf>,
) -> PyResult<PhantomArrays<'py>> {
    let family: Family = family.parse().map_err(to_py)?;
    let glyphs = emnist.map(GlyphStore::load).transpose().map_err(to_py)?;
    let p = tdinv::phantom::generate(family, seed, glyphs.as_ref()).map_err(to_py)?;
    let meta = json_to_py(py, &p.meta)?;
    Ok((p.eps.into_pyarray(py), p.sigma.into_pyarray(py), meta))
}

/// `(noisy, meta)` with noise of `kind` scaled to `snr_db`.
#[pyfunction]
#[pyo3(signature = (clean, kind, snr_db, seed, sample_dt=1e-10))]
fn add_noise<'py>(
    py: Python<'py>,
    clean: PyReadonlyArray2<'py, f64>,
    kind: &str,
    snr_db: f64,
    seed: u64,
    sample_dt: f64,
) -> PyResult<(Bound<'py, PyArray2<f64>>, Bound<'py, PyAny>)> {
    let kind: NoiseKind = kind.parse().map_err(to_py)?;
    let clean = Measurement::new(owned(&clean), sample_dt).map_err(to_py)?;
    let (noisy, meta) = tdinv::noise::add_noise(&clean, &NoiseSpec { kind, snr_db, seed }).map_err(to_py)?;
    Ok((noisy.values.into_pyarray(py), json_to_py(py, &meta)?))
}

#[pyfunction]
fn realized_snr(clean: PyReadonlyArray2<'_, f64>, noisy: PyReadonlyArray2<'_, f64>) -> PyResult<f64> {
    let c = Measurement::new(owned(&clean), 1.0).map_err(to_py)?;
    let n = Measurement::new(owned(&noisy), 1.0).map_err(to_py)?;
    tdinv::noise::realized_snr(&c, &n).map_err(to_py)
}

#[pyfunction]
fn pmse(truth: PyReadonlyArray2<'_, f64>, pred: PyReadonlyArray2<'_, f64>, a: f64) -> PyResult<f64> {
    tdinv::metrics::pmse(&owned(&truth), &owned(&pred), a).map_err(to_py)
}

/// `uint8` image of `values` mapped from `[lo, hi]`.
#[pyfunction]
fn to_pixels<'py>(
    py: Python<'py>,
    values: PyReadonlyArray2<'py, f64>,
    lo: f64,
    hi: f64,
) -> PyResult<Bound<'py, PyArray2<u8>>> {
    Ok(tdinv::metrics::to_pixels(&owned(&values), lo, hi).map_err(to_py)?.into_pyarray(py))
}

#[pyfunction]
fn psnr(reference: PyReadonlyArray2<'_, u8>, test: PyReadonlyArray2<'_, u8>) -> PyResult<f64> {
    tdinv::metrics::psnr(&reference.as_array().to_owned(), &test.as_array().to_owned()).map_err(to_py)
}

#[pyfunction]
fn ssim(a: PyReadonlyArray2<'_, u8>, b: PyReadonlyArray2<'_, u8>) -> PyResult<f64> {
    tdinv::metrics::ssim(&a.as_array().to_owned(), &b.as_array().to_owned()).map_err(to_py)
}

#[pyfunction]
fn r2(truth: PyReadonlyArray2<'_, f64>, pred: PyReadonlyArray2<'_, f64>) -> PyResult<f64> {
    let (t, p) = (owned(&truth), owned(&pred));
    tdinv::metrics::r2([(&t, &p)]).map_err(to_py)
}

/// Reads a tensor file into an array of its stored dtype.
#[pyfunction]
fn read_tensor<'py>(py: Python<'py>, path: std::path::PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let t = tdinv::store::read_tensor(&path).map_err(to_py)?;
    let shape = IxDyn(t.dims());
    let shape_err = |e: ndarray::ShapeError| PyValueError::new_err(e.to_string());
    Ok(match t.data().clone() {
        TensorData::F32(v) => ArrayD::from_shape_vec(shape, v).map_err(shape_err)?.into_pyarray(py).into_any(),
        TensorData::F64(v) => ArrayD::from_shape_vec(shape, v).map_err(shape_err)?.into_pyarray(py).into_any(),
        TensorData::U8(v) => ArrayD::from_shape_vec(shape, v).map_err(shape_err)?.into_pyarray(py).into_any(),
    })
}

/// Writes a `float32`, `float64` or `uint8` array of any rank.
#[pyfunction]
fn write_tensor(path: std::path::PathBuf, array: &Bound<'_, PyAny>) -> PyResult<()> {
    fn collect<T: numpy::Element + Copy>(a: &PyReadonlyArrayDyn<'_, T>) -> (Vec<usize>, Vec<T>) {
        let v = a.as_array();
        (a.shape().to_vec(), v.iter().copied().collect())
    }
    let (dims, data) = if let Ok(a) = array.cast::<PyArrayDyn<f32>>() {
        let (d, v) = collect(&a.readonly());
        (d, TensorData::F32(v))
    } else if let Ok(a) = array.cast::<PyArrayDyn<f64>>() {
        let (d, v) = collect(&a.readonly());
        (d, TensorData::F64(v))
    } else if let Ok(a) = array.cast::<PyArrayDyn<u8>>() {
        let (d, v) = collect(&a.readonly());
        (d, TensorData::U8(v))
    } else {
        return Err(PyValueError::new_err("expected a float32, float64 or uint8 numpy array"));
    };
    let t = Tensor::new(dims, data).map_err(|e| PyValueError::new_err(e.to_string()))?;
    tdinv::store::write_tensor(&path, &t).map_err(to_py)
}

/// Adjoint-gradient reconstruction from scattered-field traces. Returns a
/// dict with `eps`, `sigma`, `objective`, `pmse`, `iterations` and `stop`.
#[pyfunction]
#[pyo3(signature = (scenario, measured, max_iters=50, invert_sigma=false, truth=None, scale=None))]
fn invert<'py>(
    py: Python<'py>,
    scenario: &PyScenario,
    measured: PyReadonlyArray2<'py, f64>,
    max_iters: usize,
    invert_sigma: bool,
    truth: Option<PyReadonlyArray2<'py, f64>>,
    scale: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let sc = &scenario.inner;
    let measured = Measurement::new(owned(&measured), sc.sample_dt).map_err(to_py)?;
    let truth = truth.as_ref().map(owned);
    let cfg = InversionConfig { max_iters, invert_sigma, ..Default::default() };
    let st = py
        .detach(|| {
            let t = truth
                .as_ref()
                .map(|eps| Truth { eps, scale: scale.unwrap_or_else(|| eps.iter().cloned().fold(1.0, f64::max)) });
            tdinv::inversion::invert(&measured, &cfg, sc, t)
        })
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("objective", st.objective.clone())?;
    out.set_item("pmse", st.pmse.clone())?;
    out.set_item("iterations", st.iterations)?;
    out.set_item("stop", json_to_py(py, &st.stop)?)?;
    out.set_item("eps", st.eps.into_pyarray(py))?;
    out.set_item("sigma", st.sigma.into_pyarray(py))?;
    Ok(out)
}

/// Cylinder-oracle and free-space checks on the canonical scenario.
#[pyfunction]
fn validate_forward<'py>(py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
    let v = py.detach(|| tdinv::oracle::validate_forward(&tdinv::scenario::default_scenario())).map_err(to_py)?;
    json_to_py(py, &v)
}

/// Runs the command-line front end; `argv` excludes the program name.
#[pyfunction]
fn cli(py: Python<'_>, argv: Vec<String>) -> i32 {
    let args: Vec<String> = std::iter::once("tdinv".to_string()).chain(argv).collect();
    py.detach(|| tdinv::cli::cli_dispatch(args))
}

#[pymodule]
fn tdinv_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(generate_phantom, m)?)?;
    m.add_function(wrap_pyfunction!(add_noise, m)?)?;
    m.add_function(wrap_pyfunction!(realized_snr, m)?)?;
    m.add_function(wrap_pyfunction!(pmse, m)?)?;
    m.add_function(wrap_pyfunction!(to_pixels, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(r2, m)?)?;
    m.add_function(wrap_pyfunction!(read_tensor, m)?)?;
    m.add_function(wrap_pyfunction!(write_tensor, m)?)?;
    m.add_function(wrap_pyfunction!(invert, m)?)?;
    m.add_function(wrap_pyfunction!(validate_forward, m)?)?;
    m.add_function(wrap_pyfunction!(cli, m)?)?;
    Ok(())
}
