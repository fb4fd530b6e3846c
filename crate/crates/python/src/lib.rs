//! Python module `subrayleigh`: scenarios, runs, the analytic oracle and
//! the profile metrics.

use pyo3::exceptions::{PyKeyError, PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use subrayleigh_core::analytic;
use subrayleigh_core::grid::Grid;
use subrayleigh_core::metrics::{self, Profile};
use subrayleigh_core::optics;
use subrayleigh_core::postselect::Selection;
use subrayleigh_core::scenario::{self, RunOptions, RunOutput};
use subrayleigh_core::scene::Axis;
use subrayleigh_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Config { .. } | Error::Format { .. } => PyValueError::new_err(e.to_string()),
        Error::Io(_) => PyOSError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn rows(g: &Grid<f64>) -> Vec<Vec<f64>> {
    g.rows().map(<[f64]>::to_vec).collect()
}

fn selection(text: &str) -> PyResult<Selection> {
    text.parse().map_err(PyValueError::new_err)
}

/// A parsed scenario.
#[pyclass(name = "Scenario", from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: scenario::Scenario,
}

#[pymethods]
impl PyScenario {
    /// One of the shipped scenarios, see `scenario_names()`.
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        let text = scenario::builtin(name).ok_or_else(|| PyKeyError::new_err(name.to_string()))?;
        Self::from_toml(text)
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: scenario::Scenario::from_toml_str(text).map_err(py_err)?,
        })
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml_string().map_err(py_err)
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn frames_per_position(&self) -> u64 {
        self.inner.frames_per_position
    }

    #[setter]
    fn set_frames_per_position(&mut self, v: u64) -> PyResult<()> {
        if v == 0 {
            return Err(PyValueError::new_err("frames_per_position must be at least 1"));
        }
        self.inner.frames_per_position = v;
        Ok(())
    }

    #[getter]
    fn master_seed(&self) -> u64 {
        self.inner.master_seed
    }

    #[setter]
    fn set_master_seed(&mut self, v: u64) {
        self.inner.master_seed = v;
    }

    #[getter]
    fn selection(&self) -> String {
        self.inner.selection.to_string()
    }

    #[getter]
    fn pixel_pitch(&self) -> f64 {
        self.inner.detector.pitch
    }

    /// Simulate, postselect and analyse. Releases the GIL while running.
    #[pyo3(signature = (workers=None, seed=None, out_dir=None, emit_frames=false))]
    fn run(
        &self,
        py: Python<'_>,
        workers: Option<usize>,
        seed: Option<u64>,
        out_dir: Option<std::path::PathBuf>,
        emit_frames: bool,
    ) -> PyResult<PyRunOutput> {
        let opts = RunOptions {
            workers,
            seed,
            out_dir,
            emit_frames,
            base_dir: None,
        };
        let s = self.inner.clone();
        let out = py.detach(move || scenario::run_scenario(&s, &opts)).map_err(py_err)?;
        Ok(PyRunOutput { inner: out })
    }

    /// Analytic `P_N` on every pixel, after peak calibration.
    fn analytic_pn_map(&self, py: Python<'_>, n: u32) -> PyResult<Vec<Vec<f64>>> {
        let s = self.inner.clone();
        let map = py
            .detach(move || {
                let scene = s.scene.build(None)?;
                let cfg = match s.calibrate_peak {
                    Some(t) => scenario::calibrate_peak(&s.optical, &s.detector, &scene, &s.scan, t, &s.quadrature)?,
                    None => s.optical.clone(),
                };
                analytic::analytic_pn_map(&cfg, &s.detector, &scene, &s.scan, n, &s.quadrature)
            })
            .map_err(py_err)?;
        Ok(rows(&map))
    }

    fn __repr__(&self) -> String {
        format!("Scenario({:?}, selection={})", self.inner.name, self.inner.selection)
    }
}

/// Result of `Scenario.run`.
#[pyclass(name = "RunOutput")]
struct PyRunOutput {
    inner: RunOutput,
}

#[pymethods]
impl PyRunOutput {
    /// Image rows for `"all_counts"`, `"exact:N"` or `"at_least:N"`. Any
    /// order can be projected from the stored count histogram.
    fn image(&self, selection_text: &str) -> PyResult<Vec<Vec<f64>>> {
        let sel = selection(selection_text)?;
        let img = match sel {
            Selection::AllCounts => self.inner.histogram.conventional().map_err(py_err)?,
            Selection::Mode(m) => self.inner.histogram.image(m, "").frequency(),
        };
        Ok(rows(&img))
    }

    /// Metric name to value.
    fn metrics(&self) -> Vec<(String, f64)> {
        self.inner.metrics.iter().map(|m| (m.metric.clone(), m.value)).collect()
    }

    fn metric(&self, name: &str) -> PyResult<f64> {
        self.inner.metric(name).ok_or_else(|| PyKeyError::new_err(name.to_string()))
    }

    #[getter]
    fn frames_processed(&self) -> u64 {
        self.inner.histogram.frames()
    }

    #[getter]
    fn photons_per_frame(&self) -> f64 {
        self.inner.summary.photons_per_frame
    }

    #[getter]
    fn peak_mean_count(&self) -> f64 {
        self.inner.summary.peak_mean_count
    }

    #[getter]
    fn checks_failed(&self) -> usize {
        self.inner.summary.checks_failed
    }

    #[getter]
    fn positions(&self) -> Vec<(f64, f64)> {
        self.inner.positions.iter().map(|t| (t[0], t[1])).collect()
    }
}

#[pyfunction]
fn scenario_names() -> Vec<&'static str> {
    scenario::builtin_names().collect()
}

#[pyfunction]
fn poisson_pmf(n: u64, mu: f64) -> f64 {
    analytic::poisson_pmf(n, mu)
}

#[pyfunction]
fn bessel_j1(x: f64) -> PyResult<f64> {
    optics::bessel_j1(x).map_err(py_err)
}

#[pyfunction]
fn airy_power(u: f64, n: u32) -> PyResult<f64> {
    optics::airy_power(u, n).map_err(py_err)
}

/// Half width at half maximum of `A(u)^n`, in Airy-argument units.
#[pyfunction]
fn airy_half_width(n: u32) -> PyResult<f64> {
    optics::airy_half_width(n).map_err(py_err)
}

/// Rows of `(n, ratio, 1/sqrt(n), rel_error)`.
#[pyfunction]
fn fwhm_sweep(n_min: u32, n_max: u32) -> PyResult<Vec<(u32, f64, f64, f64)>> {
    Ok(metrics::fwhm_sweep(n_min, n_max)
        .map_err(py_err)?
        .into_iter()
        .map(|r| (r.n, r.ratio, r.inv_sqrt_n, r.rel_error))
        .collect())
}

fn profile(positions: Vec<f64>, values: Vec<f64>) -> PyResult<Profile> {
    Profile::new(positions, values, Axis::X, 0).map_err(py_err)
}

#[pyfunction]
fn fwhm(positions: Vec<f64>, values: Vec<f64>) -> PyResult<f64> {
    Ok(metrics::fwhm(&profile(positions, values)?).map_err(py_err)?.width)
}

#[pyfunction]
fn donut_score(positions: Vec<f64>, values: Vec<f64>) -> PyResult<f64> {
    metrics::donut_score(&profile(positions, values)?).map_err(py_err)
}

#[pyfunction]
fn stripe_contrast(positions: Vec<f64>, values: Vec<f64>, period: f64) -> PyResult<f64> {
    metrics::stripe_contrast(&profile(positions, values)?, period).map_err(py_err)
}

#[pymodule]
fn subrayleigh(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyRunOutput>()?;
    m.add_function(wrap_pyfunction!(scenario_names, m)?)?;
    m.add_function(wrap_pyfunction!(poisson_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(bessel_j1, m)?)?;
    m.add_function(wrap_pyfunction!(airy_power, m)?)?;
    m.add_function(wrap_pyfunction!(airy_half_width, m)?)?;
    m.add_function(wrap_pyfunction!(fwhm_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(fwhm, m)?)?;
    m.add_function(wrap_pyfunction!(donut_score, m)?)?;
    m.add_function(wrap_pyfunction!(stripe_contrast, m)?)?;
    Ok(())
}
