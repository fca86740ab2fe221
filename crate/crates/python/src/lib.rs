//! Python bindings. Reports are returned as canonical JSON strings.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use twopoint::disintegration::{decompose, decompose_exact, mixture_expect, partners, sample_pairs, MixtureMode};
use twopoint::estimator::{bootstrap_ci, BootstrapConfig, Calibration, ThetaMode};
use twopoint::invariants::{verify, VerifyOptions};
use twopoint::io::{parse_alternative, parse_measure, to_canonical_json};
use twopoint::optimal::{cost_compare, marginal_check, norm_report, CostFunction, CostSpec};
use twopoint::selfnorm::{self, Statistic, TestMode};
use twopoint::ZeroMeanMeasure;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json<T: serde::Serialize>(v: &T) -> PyResult<String> {
    to_canonical_json(v).map_err(err)
}

/// A zero-mean probability distribution.
#[pyclass(name = "Measure", frozen)]
struct PyMeasure {
    inner: ZeroMeanMeasure,
}

#[pymethods]
impl PyMeasure {
    /// Parse the measure JSON schema, e.g. `{"backend":"discrete","atoms":[[-1,"1/2"],[1,"1/2"]]}`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyMeasure { inner: parse_measure(text).map_err(err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (atoms, recentre = false))]
    fn discrete(atoms: Vec<(f64, f64)>, recentre: bool) -> PyResult<Self> {
        Ok(PyMeasure { inner: ZeroMeanMeasure::from_atoms(&atoms, recentre).map_err(err)? })
    }

    /// Empirical law of a sample, shifted to mean zero.
    #[staticmethod]
    fn from_samples(xs: Vec<f64>) -> PyResult<Self> {
        Ok(PyMeasure { inner: ZeroMeanMeasure::from_samples(&xs, true).map_err(err)? })
    }

    #[staticmethod]
    fn uniform(half_width: f64) -> PyResult<Self> {
        Ok(PyMeasure { inner: ZeroMeanMeasure::uniform(half_width).map_err(err)? })
    }

    #[getter]
    fn m(&self) -> f64 {
        self.inner.m()
    }

    fn g(&self, x: f64) -> f64 {
        self.inner.g(x)
    }

    fn g_tilde(&self, x: f64, u: f64) -> f64 {
        self.inner.g_tilde(x, u)
    }

    fn x_plus(&self, h: f64) -> PyResult<f64> {
        self.inner.x_plus(h).map_err(err)
    }

    fn x_minus(&self, h: f64) -> PyResult<f64> {
        self.inner.x_minus(h).map_err(err)
    }

    fn reciprocate(&self, x: f64, u: f64) -> f64 {
        self.inner.reciprocate(x, u)
    }

    fn cdf(&self, x: f64) -> f64 {
        self.inner.cdf(x)
    }

    /// Components `(a, b, weight)` of the canonical disintegration.
    fn decompose(&self) -> PyResult<Vec<(f64, f64, f64)>> {
        let d = decompose(&self.inner).map_err(err)?;
        Ok(d.components.iter().map(|c| (c.law.a, c.law.b, c.weight)).collect())
    }

    /// As `decompose`, with rationals as strings such as `"3/10"`.
    fn decompose_exact(&self) -> PyResult<Vec<(String, String, String)>> {
        let d = decompose_exact(&self.inner).map_err(err)?;
        Ok(d.components.iter().map(|c| (c.law.a.to_string(), c.law.b.to_string(), c.weight.to_string())).collect())
    }

    /// `E g(X)` by one of `direct`, `u_integral`, `h_integral`, `ratio_weighted`, `half_sum`.
    #[pyo3(signature = (g, mode = "direct"))]
    fn expect(&self, g: Bound<'_, PyAny>, mode: &str) -> PyResult<f64> {
        let mode: MixtureMode = mode.parse().map_err(err)?;
        let f = |x: f64| g.call1((x,)).and_then(|v| v.extract::<f64>()).unwrap_or(f64::NAN);
        mixture_expect(&self.inner, &f, mode).map_err(err)
    }

    /// Seeded draws `(x, r(x, u), u)`.
    fn sample_pairs(&self, n: usize, seed: u64) -> Vec<(f64, f64, f64)> {
        sample_pairs(&self.inner, n, seed).into_iter().map(|s| (s.x, s.r, s.u)).collect()
    }

    /// Partners `r(x_i, u_i)` of the given points with seeded `u_i`.
    fn partners(&self, xs: Vec<f64>, seed: u64) -> Vec<f64> {
        partners(&self.inner, &xs, seed).into_iter().map(|s| s.r).collect()
    }

    #[pyo3(signature = (grid = 50, n = None, seed = None))]
    fn verify(&self, grid: usize, n: Option<usize>, seed: Option<u64>) -> PyResult<String> {
        let monte_carlo = match (n, seed) {
            (Some(n), Some(seed)) => Some((n, seed)),
            (None, _) => None,
            (Some(_), None) => return Err(err("the Monte Carlo checks need a seed")),
        };
        json(&verify(&self.inner, &VerifyOptions { grid, monte_carlo }))
    }

    /// Compare an alternative (decomposition JSON) under a cost spec (JSON).
    #[pyo3(signature = (alternative, cost, p = None))]
    fn optimal(&self, alternative: &str, cost: &str, p: Option<f64>) -> PyResult<String> {
        let alt = parse_alternative(alternative).map_err(err)?;
        let spec: CostSpec = serde_json::from_str(cost).map_err(err)?;
        let k = CostFunction::from_spec(&spec).map_err(err)?;
        let marginal = marginal_check(&alt, &self.inner).map_err(err)?;
        let comparison = cost_compare(&alt, &self.inner, &k, 0, 0).map_err(err)?;
        let norms = p.map(|p| norm_report(&alt, &self.inner, p)).transpose().map_err(err)?;
        json(&serde_json::json!({ "marginal": marginal, "cost": comparison, "norms": norms }))
    }

    fn __repr__(&self) -> String {
        format!("Measure(backend={:?}, m={})", self.inner.backend(), self.inner.m())
    }
}

#[pyfunction]
fn s_w(xs: Vec<f64>, rs: Vec<f64>) -> PyResult<f64> {
    selfnorm::s_w(&xs, &rs).map_err(err)
}

#[pyfunction]
fn s_y(xs: Vec<f64>, rs: Vec<f64>, lambda: f64) -> PyResult<f64> {
    selfnorm::s_y(&xs, &rs, lambda).map_err(err)
}

#[pyfunction]
fn lambda_star(p: f64) -> PyResult<f64> {
    selfnorm::lambda_star(p).map_err(err)
}

#[pyfunction]
fn c50() -> f64 {
    selfnorm::c50()
}

#[pyfunction]
fn c30() -> f64 {
    selfnorm::c30()
}

/// `mode` is `gaussian` or `bernoulli` (which needs `p`; `lambda` defaults to the optimal value).
#[pyfunction]
#[pyo3(signature = (xs, rs, mode = "gaussian", p = None, lambda = None))]
fn conservative_test(xs: Vec<f64>, rs: Vec<f64>, mode: &str, p: Option<f64>, lambda: Option<f64>) -> PyResult<String> {
    let mode = match mode {
        "gaussian" => TestMode::Gaussian,
        "bernoulli" => {
            let p = p.ok_or_else(|| err("bernoulli mode needs p"))?;
            let lambda = match lambda {
                Some(l) => l,
                None => selfnorm::lambda_star(p).map_err(err)?,
            };
            TestMode::Bernoulli { p, lambda }
        }
        other => return Err(err(format!("unknown mode {other:?}"))),
    };
    json(&selfnorm::conservative_test(&xs, &rs, mode).map_err(err)?)
}

/// Bootstrap confidence interval for the mean; `lambda` selects the Bernoulli-type statistic.
#[pyfunction]
#[pyo3(signature = (xs, seed, level = 0.95, b = 2000, lambda = None, fixed_denominator = false, conservative = false))]
fn bootstrap(
    xs: Vec<f64>,
    seed: u64,
    level: f64,
    b: usize,
    lambda: Option<f64>,
    fixed_denominator: bool,
    conservative: bool,
) -> PyResult<String> {
    let cfg = BootstrapConfig {
        level,
        b,
        seed,
        mode: if fixed_denominator { ThetaMode::FixedDenominator } else { ThetaMode::Recompute },
        calibration: if conservative { Calibration::Conservative } else { Calibration::BootstrapPercentile },
        ..Default::default()
    };
    let kind = lambda.map_or(Statistic::W, |lambda| Statistic::Y { lambda });
    json(&bootstrap_ci(&xs, kind, &cfg).map_err(err)?)
}

#[pymodule]
fn twopoint_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMeasure>()?;
    m.add_function(wrap_pyfunction!(s_w, m)?)?;
    m.add_function(wrap_pyfunction!(s_y, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_star, m)?)?;
    m.add_function(wrap_pyfunction!(c50, m)?)?;
    m.add_function(wrap_pyfunction!(c30, m)?)?;
    m.add_function(wrap_pyfunction!(conservative_test, m)?)?;
    m.add_function(wrap_pyfunction!(bootstrap, m)?)?;
    Ok(())
}
