//! Python bindings: regulator configuration and certification, closed-loop
//! simulation of the benchmark plant, steady-state norms and spectra, and
//! the frequency-domain gains.

use std::f64::consts::PI;
use std::fs::File;
use std::io::BufWriter;

use imreg::analysis::{fourier_at, norms, steady_window};
use imreg::freqdomain::{self, bound_constants};
use imreg::internal_model::CoefficientSequence;
use imreg::verify::{certify, check_sequence};
use imreg::{example_plant, Controller, NoiseModel, OscillatorBank, RegulatorError, SimConfig};
use pyo3::exceptions::{PyArithmeticError, PyIOError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: RegulatorError) -> PyErr {
    match e {
        RegulatorError::Overflow { .. } | RegulatorError::SingularSolve(_) | RegulatorError::NotHurwitz(_) => {
            PyArithmeticError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

#[pyclass(name = "RegulatorConfig", module = "pyimreg", skip_from_py_object)]
#[derive(Clone)]
pub struct PyRegulatorConfig {
    inner: imreg::RegulatorConfig,
}

#[pymethods]
impl PyRegulatorConfig {
    /// Canonical coefficients `n_z0 = 2`, `n_zl = l^-(1+epsilon)` unless
    /// `coefficients` lists `n_z0..n_z(n_o)` explicitly.
    #[new]
    #[pyo3(signature = (n_o, sigma=2.0, mu=1.0, omega_hat=2.0*PI, epsilon=0.5, coefficients=None))]
    fn new(n_o: usize, sigma: f64, mu: f64, omega_hat: f64, epsilon: f64, coefficients: Option<Vec<f64>>) -> PyResult<Self> {
        let inner = match coefficients {
            None => imreg::RegulatorConfig::canonical(n_o, sigma, mu, omega_hat, epsilon).map_err(to_py)?,
            Some(c) => {
                let cfg = imreg::RegulatorConfig {
                    n_o,
                    sigma,
                    mu,
                    omega_hat,
                    coefficients: CoefficientSequence::explicit(c).map_err(to_py)?,
                };
                cfg.validate().map_err(to_py)?;
                cfg
            }
        };
        Ok(Self { inner })
    }

    #[getter]
    fn n_o(&self) -> usize {
        self.inner.n_o
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu
    }

    #[getter]
    fn omega_hat(&self) -> f64 {
        self.inner.omega_hat
    }

    #[getter]
    fn coefficients(&self) -> Vec<f64> {
        self.inner.coefficients.values().to_vec()
    }

    /// `[0, omega_hat, 2 omega_hat, ...]`.
    fn frequencies(&self) -> Vec<f64> {
        self.inner.frequencies()
    }

    /// Regulator state dimension `2 n_o + 1`.
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Observability, Hurwitz and ordering checks as `(passed, text)`.
    fn certify(&self) -> (bool, String) {
        let r = certify(&self.inner);
        (r.passed(), r.to_string())
    }

    fn transfer_gain(&self, omega: f64) -> f64 {
        freqdomain::transfer_gain(&self.inner, omega)
    }

    /// `(kappa0, kappa1)` of the envelope `T(x) <= kappa0 + kappa1 x^2`.
    fn bound_constants(&self) -> PyResult<(f64, f64)> {
        let b = bound_constants(&self.inner.coefficients, self.inner.mu).map_err(to_py)?;
        Ok((b.kappa0, b.kappa1))
    }

    /// `|e/q|` of the linear loop at each frequency.
    fn bode_magnitude(&self, omegas: Vec<f64>) -> Vec<f64> {
        omegas
            .iter()
            .map(|w| freqdomain::internal_model_magnitude(&self.inner, *w))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "RegulatorConfig(n_o={}, sigma={}, mu={}, omega_hat={})",
            self.inner.n_o, self.inner.sigma, self.inner.mu, self.inner.omega_hat
        )
    }
}

#[pyclass(name = "Trajectory", module = "pyimreg", skip_from_py_object)]
pub struct PyTrajectory {
    inner: imreg::Trajectory,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    #[getter]
    fn e(&self) -> Vec<f64> {
        self.inner.e.clone()
    }

    #[getter]
    fn u(&self) -> Vec<f64> {
        self.inner.u.clone()
    }

    #[getter]
    fn v(&self) -> Vec<f64> {
        self.inner.v.clone()
    }

    /// Plant state rows.
    #[getter]
    fn x(&self) -> Vec<Vec<f64>> {
        (0..self.inner.len()).map(|i| self.inner.x_row(i).to_vec()).collect()
    }

    /// Regulator state rows.
    #[getter]
    fn z(&self) -> Vec<Vec<f64>> {
        (0..self.inner.len()).map(|i| self.inner.z_row(i).to_vec()).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// `(sup |e|, period mean of e^2)` over the last `n_periods` periods.
    #[pyo3(signature = (period=1.0, n_periods=20))]
    fn norms(&self, period: f64, n_periods: usize) -> PyResult<(f64, f64)> {
        let w = steady_window(&self.inner, period, n_periods, 0.0).map_err(to_py)?;
        let n = norms(&w);
        Ok((n.sup, n.l2))
    }

    /// Fourier magnitudes of the steady-state error at the given rad/s.
    #[pyo3(signature = (frequencies, period=1.0, n_periods=20))]
    fn spectrum(&self, frequencies: Vec<f64>, period: f64, n_periods: usize) -> PyResult<Vec<f64>> {
        let w = steady_window(&self.inner, period, n_periods, 0.0).map_err(to_py)?;
        Ok(fourier_at(&w, &frequencies).magnitudes)
    }

    fn write_csv(&self, path: &str) -> PyResult<()> {
        let f = File::create(path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        self.inner
            .write_csv(BufWriter::new(f))
            .map_err(|e| PyIOError::new_err(e.to_string()))
    }
}

/// Closed loop of the benchmark plant. With `config=None` the controller is
/// the static law `u = -sigma e`.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (config=None, sigma=2.0, dt=1e-4, t_end=150.0, seed=0, noise_power=0.0, record_stride=100))]
fn simulate(
    py: Python<'_>,
    config: Option<PyRef<'_, PyRegulatorConfig>>,
    sigma: f64,
    dt: f64,
    t_end: f64,
    seed: u64,
    noise_power: f64,
    record_stride: usize,
) -> PyResult<PyTrajectory> {
    let controller = match config {
        Some(c) => Controller::InternalModel(OscillatorBank::build(&c.inner).map_err(to_py)?),
        None => Controller::high_gain(sigma).map_err(to_py)?,
    };
    let sim = SimConfig {
        dt,
        t_end,
        record_stride,
        seed,
        ..SimConfig::default()
    };
    let noise = if noise_power > 0.0 {
        NoiseModel::with_power(noise_power)
    } else {
        NoiseModel::off()
    };
    let inner = py
        .detach(|| imreg::run(&example_plant(), &controller, &sim, &noise))
        .map_err(to_py)?;
    Ok(PyTrajectory { inner })
}

/// `n_z0..n_z(n_o)` of the canonical sequence.
#[pyfunction]
#[pyo3(signature = (n_o, epsilon=0.5))]
fn canonical_coefficients(n_o: usize, epsilon: f64) -> PyResult<Vec<f64>> {
    Ok(CoefficientSequence::canonical(n_o, epsilon).map_err(to_py)?.values().to_vec())
}

/// Descriptions of every ordering condition the sequence violates.
#[pyfunction]
fn sequence_violations(values: Vec<f64>) -> Vec<String> {
    check_sequence(&values).iter().map(|v| v.to_string()).collect()
}

/// `|e/q| = 1/|i omega + sigma|` of the static law.
#[pyfunction]
fn high_gain_magnitude(sigma: f64, omegas: Vec<f64>) -> Vec<f64> {
    omegas.iter().map(|w| freqdomain::high_gain_magnitude(sigma, *w)).collect()
}

#[pymodule]
fn pyimreg(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRegulatorConfig>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(canonical_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(sequence_violations, m)?)?;
    m.add_function(wrap_pyfunction!(high_gain_magnitude, m)?)?;
    Ok(())
}
