//! Python bindings: grid series I/O, Burgers simulation, CESAR training and
//! forecasting, evaluation metrics, and the wind-power chain.

use std::path::PathBuf;

use pyo3::exceptions::{PyFileNotFoundError, PyIOError, PyValueError};
use pyo3::prelude::*;

use cesar::burgers::BurgersConfig;
use cesar::cae::CaeConfig;
use cesar::esn::EsnConfig;
use cesar::pipeline::ForecastOptions;
use cesar::{CesarError, Field3};

fn py_err(e: CesarError) -> PyErr {
    match e {
        CesarError::Io(io) if io.kind() == std::io::ErrorKind::NotFound => PyFileNotFoundError::new_err(io.to_string()),
        CesarError::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Time-indexed stack of `m x n x p` fields.
#[pyclass(name = "GridSeries", module = "cesar_py", from_py_object)]
#[derive(Clone)]
struct PyGridSeries {
    inner: cesar::GridSeries,
}

#[pymethods]
impl PyGridSeries {
    /// Builds a series from flat `[t][row][col][channel]` values.
    #[new]
    #[pyo3(signature = (values, dims, dt = 1.0, var_names = None))]
    fn new(values: Vec<f64>, dims: [usize; 4], dt: f64, var_names: Option<Vec<String>>) -> PyResult<Self> {
        let [t, m, n, p] = dims;
        if values.len() != t * m * n * p {
            return Err(PyValueError::new_err(format!(
                "{} values do not fill dims {dims:?}",
                values.len()
            )));
        }
        let frames = values
            .chunks_exact(m * n * p)
            .map(|c| Field3::from_vec(m, n, p, c.to_vec()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(py_err)?;
        let names = var_names.unwrap_or_else(|| (0..p).map(|k| format!("var{k}")).collect());
        cesar::GridSeries::new(frames, dt, names)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        cesar::io::load_gsf(&path).map(|inner| Self { inner }).map_err(py_err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        cesar::io::save_gsf(&path, &self.inner).map_err(py_err)
    }

    /// `[T, m, n, p]`
    #[getter]
    fn dims(&self) -> [usize; 4] {
        self.inner.dims()
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt
    }

    #[getter]
    fn var_names(&self) -> Vec<String> {
        self.inner.var_names.clone()
    }

    #[getter]
    fn height_m(&self) -> Option<f64> {
        self.inner.height_m
    }

    #[setter]
    fn set_height_m(&mut self, h: Option<f64>) {
        self.inner.height_m = h;
    }

    #[getter]
    fn is_normalized(&self) -> bool {
        self.inner.norm.is_some()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Flat values of frame `t`.
    fn frame(&self, t: usize) -> PyResult<Vec<f64>> {
        self.inner
            .frames
            .get(t)
            .map(|f| f.as_slice().to_vec())
            .ok_or_else(|| PyValueError::new_err(format!("frame {t} out of range")))
    }

    /// All values, flat `[t][row][col][channel]`.
    fn values(&self) -> Vec<f64> {
        self.inner.frames.iter().flat_map(|f| f.as_slice().iter().copied()).collect()
    }

    /// Frames `start..stop`.
    fn slice(&self, start: usize, stop: usize) -> PyResult<Self> {
        self.inner.slice(start..stop).map(|inner| Self { inner }).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("GridSeries(dims={:?}, dt={}, var_names={:?})", self.inner.dims(), self.inner.dt, self.inner.var_names)
    }
}

/// One Burgers dataset for `seed`.
#[pyfunction]
#[pyo3(signature = (seed, viscosity = 0.005, grid = 64, steps = 101))]
fn simulate_burgers(seed: u64, viscosity: f64, grid: usize, steps: usize) -> PyResult<PyGridSeries> {
    let config = BurgersConfig {
        viscosity,
        grid,
        steps,
        ..BurgersConfig::default()
    };
    cesar::burgers::simulate(&config, seed)
        .map(|inner| PyGridSeries { inner })
        .map_err(py_err)
}

/// Forecast realizations in data units.
#[pyclass(name = "ForecastEnsemble", module = "cesar_py")]
struct PyForecastEnsemble {
    inner: cesar::pipeline::ForecastEnsemble,
}

#[pymethods]
impl PyForecastEnsemble {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.inner.horizon
    }

    fn member(&self, i: usize) -> PyResult<PyGridSeries> {
        self.inner
            .members
            .get(i)
            .map(|m| PyGridSeries { inner: m.clone() })
            .ok_or_else(|| PyValueError::new_err(format!("member {i} out of range")))
    }

    fn mean(&self) -> PyResult<PyGridSeries> {
        self.inner.mean().map(|inner| PyGridSeries { inner }).map_err(py_err)
    }

    fn quantile(&self, q: f64) -> PyResult<PyGridSeries> {
        self.inner.quantile(q).map(|inner| PyGridSeries { inner }).map_err(py_err)
    }

    /// Central band at `level` in (0, 1): `(lower, upper)`.
    fn interval(&self, level: f64) -> PyResult<(PyGridSeries, PyGridSeries)> {
        let (lo, hi) = cesar::pipeline::interval(&self.inner, level).map_err(py_err)?;
        Ok((PyGridSeries { inner: lo }, PyGridSeries { inner: hi }))
    }

    /// `(reservoir index, reservoir seed, dropout seed)` per member.
    fn provenance(&self) -> Vec<(usize, u64, Option<u64>)> {
        self.inner
            .provenance
            .iter()
            .map(|p| (p.reservoir, p.reservoir_seed, p.dropout_seed))
            .collect()
    }
}

/// Trained CAE plus ESN ensemble.
#[pyclass(name = "CesarModel", module = "cesar_py")]
struct PyCesarModel {
    inner: cesar::pipeline::CesarModel,
}

#[pymethods]
impl PyCesarModel {
    /// Trains on the first `train_frames` frames. `preset` is "burgers" or "wrf";
    /// keyword arguments override its settings.
    #[staticmethod]
    #[pyo3(signature = (data, train_frames, preset = "burgers", cae_filters = None, cae_epochs = None, batch = None, esn_nh = None, ensemble = None, lags = None, seed = 0))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        py: Python<'_>,
        data: &PyGridSeries,
        train_frames: usize,
        preset: &str,
        cae_filters: Option<Vec<usize>>,
        cae_epochs: Option<usize>,
        batch: Option<usize>,
        esn_nh: Option<usize>,
        ensemble: Option<usize>,
        lags: Option<usize>,
        seed: u64,
    ) -> PyResult<Self> {
        let (mut cae, mut esn) = match preset {
            "burgers" => (CaeConfig::burgers(), EsnConfig::burgers()),
            "wrf" => (CaeConfig::wrf(), EsnConfig::wrf()),
            other => return Err(PyValueError::new_err(format!("unknown preset {other:?}"))),
        };
        let (m, n, p) = data.inner.frame_shape();
        cae.input_height = m;
        cae.input_width = n;
        cae.input_channels = p;
        cae.filters = cae_filters.unwrap_or(cae.filters);
        cae.epochs = cae_epochs.unwrap_or(cae.epochs);
        cae.batch_size = batch.unwrap_or(cae.batch_size);
        cae.seed = cesar::rng::derive_seed(seed, 1);
        esn.reservoir_size = esn_nh.unwrap_or(esn.reservoir_size);
        esn.ensemble_size = ensemble.unwrap_or(esn.ensemble_size);
        esn.lags = lags.unwrap_or(esn.lags);
        esn.seed = cesar::rng::derive_seed(seed, 2);
        let series = data.inner.clone();
        py.detach(|| cesar::pipeline::train_cesar(&series, train_frames, &cae, &esn))
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        cesar::io::load_model(&path).map(|inner| Self { inner }).map_err(py_err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        cesar::io::save_model(&path, &self.inner).map_err(py_err)
    }

    #[getter]
    fn train_frames(&self) -> usize {
        self.inner.train_frames
    }

    #[getter]
    fn ensemble_size(&self) -> usize {
        self.inner.esn.len()
    }

    #[getter]
    fn latent_shape(&self) -> (usize, usize, usize) {
        self.inner.cae.latent_shape()
    }

    #[getter]
    fn leak_rate(&self) -> f64 {
        self.inner.esn.leak_rate
    }

    #[getter]
    fn scaling(&self) -> Vec<f64> {
        self.inner.esn.scaling.clone()
    }

    #[getter]
    fn loss_history(&self) -> Vec<f64> {
        self.inner.cae.loss_history.clone()
    }

    #[getter]
    fn observation_variance(&self) -> f64 {
        self.inner.observation_variance
    }

    #[getter]
    fn state_variance(&self) -> f64 {
        self.inner.state_variance
    }

    /// Iterative forecast of `horizon` frames after `history`.
    #[pyo3(signature = (history, horizon, n_temporal = 1, n_spatial = 1, keep_prob = 1.0, seed = 0))]
    fn forecast(
        &self,
        py: Python<'_>,
        history: &PyGridSeries,
        horizon: usize,
        n_temporal: usize,
        n_spatial: usize,
        keep_prob: f64,
        seed: u64,
    ) -> PyResult<PyForecastEnsemble> {
        let options = ForecastOptions {
            horizon,
            n_temporal,
            n_spatial,
            keep_prob,
            seed,
        };
        let history = history.inner.clone();
        py.detach(|| cesar::pipeline::forecast(&self.inner, &history, &options))
            .map(|inner| PyForecastEnsemble { inner })
            .map_err(py_err)
    }
}

/// Per-location MSE, row-major `m x n`.
#[pyfunction]
fn mse_map(truth: &PyGridSeries, pred: &PyGridSeries) -> PyResult<Vec<f64>> {
    cesar::eval::mse_map(&truth.inner, &pred.inner).map_err(py_err)
}

/// `(median, interquartile range)`.
#[pyfunction]
fn median_iqr(values: Vec<f64>) -> PyResult<(f64, f64)> {
    cesar::eval::median_iqr(&values).map_err(py_err)
}

/// Percent of `truth` inside `[lower, upper]`.
#[pyfunction]
fn coverage(lower: &PyGridSeries, upper: &PyGridSeries, truth: &PyGridSeries) -> PyResult<f64> {
    cesar::eval::coverage(&lower.inner, &upper.inner, &truth.inner).map_err(py_err)
}

#[pyfunction]
fn persistence_forecast(history: &PyGridSeries, horizon: usize) -> PyResult<PyGridSeries> {
    cesar::eval::persistence_forecast(&history.inner, horizon)
        .map(|inner| PyGridSeries { inner })
        .map_err(py_err)
}

/// Power-law wind speed multiplier `(target / source)^kappa`.
#[pyfunction]
#[pyo3(signature = (source_m, target_m, kappa = cesar::wind::DEFAULT_SHEAR_EXPONENT))]
fn height_multiplier(source_m: f64, target_m: f64, kappa: f64) -> PyResult<f64> {
    cesar::wind::height_multiplier(source_m, target_m, kappa).map_err(py_err)
}

/// Piecewise-linear turbine power curve.
#[pyclass(name = "PowerCurve", module = "cesar_py")]
struct PyPowerCurve {
    inner: cesar::wind::PowerCurve,
}

#[pymethods]
impl PyPowerCurve {
    #[new]
    #[pyo3(signature = (speeds, powers, hub_height_m = 80.0, name = "custom"))]
    fn new(speeds: Vec<f64>, powers: Vec<f64>, hub_height_m: f64, name: &str) -> PyResult<Self> {
        cesar::wind::PowerCurve::new(name, hub_height_m, speeds, powers)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    /// The bundled Nordex N100/2500 curve.
    #[staticmethod]
    fn n100_2500() -> Self {
        Self {
            inner: cesar::wind::PowerCurve::n100_2500(),
        }
    }

    #[staticmethod]
    #[pyo3(signature = (path, hub_height_m = 80.0))]
    fn from_csv(path: PathBuf, hub_height_m: f64) -> PyResult<Self> {
        cesar::wind::PowerCurve::from_csv(&path, hub_height_m)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn hub_height_m(&self) -> f64 {
        self.inner.hub_height_m
    }

    #[getter]
    fn rated_kw(&self) -> f64 {
        self.inner.rated_kw
    }

    /// Power in kW at hub-height `speed` (m/s).
    fn power(&self, speed: f64) -> f64 {
        self.inner.power(speed)
    }
}

/// Extrapolates `speeds` to the curve's hub height and applies the curve:
/// `(power series, mean kW, std kW)`.
#[pyfunction]
#[pyo3(signature = (speeds, curve, kappa = cesar::wind::DEFAULT_SHEAR_EXPONENT, source_m = 10.0))]
fn power_map(speeds: &PyGridSeries, curve: &PyPowerCurve, kappa: f64, source_m: f64) -> PyResult<(PyGridSeries, f64, f64)> {
    let m = cesar::wind::power_map(&speeds.inner, &curve.inner, kappa, source_m).map_err(py_err)?;
    Ok((PyGridSeries { inner: m.power }, m.mean_kw, m.std_kw))
}

#[pymodule]
fn cesar_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGridSeries>()?;
    m.add_class::<PyForecastEnsemble>()?;
    m.add_class::<PyCesarModel>()?;
    m.add_class::<PyPowerCurve>()?;
    m.add_function(wrap_pyfunction!(simulate_burgers, m)?)?;
    m.add_function(wrap_pyfunction!(mse_map, m)?)?;
    m.add_function(wrap_pyfunction!(median_iqr, m)?)?;
    m.add_function(wrap_pyfunction!(coverage, m)?)?;
    m.add_function(wrap_pyfunction!(persistence_forecast, m)?)?;
    m.add_function(wrap_pyfunction!(height_multiplier, m)?)?;
    m.add_function(wrap_pyfunction!(power_map, m)?)?;
    Ok(())
}
