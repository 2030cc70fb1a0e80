//! Python bindings. Structured results come back as plain dicts decoded from the same JSON the CLI writes.

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use lsi_core::asymptotics::{
    verify_heavytail, verify_instability_suite, verify_theorem1, InstabilityParams, InstabilityTheorem, DEFAULT_K_GRID,
};
use lsi_core::density::{
    make_bump_family_with, make_heavytail_family, make_shifted_gaussian, BridgeShape, PiecewiseLogDensity,
};
use lsi_core::functionals::{compute_report, fisher_info, lsi_deficit, lp_dist_to_one, moment, rel_entropy};
use lsi_core::serde_ext::to_json17;
use lsi_core::transport::{hwi_chain, talagrand_deficit, wasserstein_p};
use lsi_core::uncertainty::{
    bhi_deficit, dist_to_optimizers, fourier_wiener_remainder, lsi_to_bhi_transform, weighted_lp_norm, GridSpec,
    OptimizerParams, WeightSpec,
};

create_exception!(lsi_instab, LsiError, PyValueError);

fn err(e: lsi_core::Error) -> PyErr {
    LsiError::new_err(e.to_string())
}

fn to_dict<T: serde::Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let text = to_json17(v).map_err(err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn parse_weight(w: &str) -> PyResult<WeightSpec> {
    w.parse::<WeightSpec>().map_err(err)
}

fn grid(n: Option<usize>) -> GridSpec {
    n.map_or_else(GridSpec::default, GridSpec::with_n)
}

/// A probability density relative to the standard Gaussian.
#[pyclass(name = "Density", module = "lsi_instab", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyDensity {
    inner: PiecewiseLogDensity,
}

#[pymethods]
impl PyDensity {
    #[staticmethod]
    fn standard_gaussian() -> Self {
        PyDensity { inner: PiecewiseLogDensity::standard_gaussian() }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyDensity { inner: PiecewiseLogDensity::from_json(text).map_err(err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label().to_string()
    }

    /// f(x), the density against dgamma.
    fn __call__(&self, x: f64) -> f64 {
        self.inner.evaluate(x)
    }

    fn log_density(&self, x: f64) -> f64 {
        self.inner.log_density(x)
    }

    fn cdf(&self, x: f64) -> PyResult<f64> {
        self.inner.cdf(x).map_err(err)
    }

    fn quantile(&self, u: f64) -> PyResult<f64> {
        self.inner.quantile(u).map_err(err)
    }

    fn fisher_info(&self) -> PyResult<f64> {
        fisher_info(&self.inner).map_err(err)
    }

    fn rel_entropy(&self) -> PyResult<f64> {
        rel_entropy(&self.inner).map_err(err)
    }

    fn lsi_deficit(&self) -> PyResult<f64> {
        lsi_deficit(&self.inner).map_err(err)
    }

    /// `inf` when the moment diverges.
    fn moment(&self, p: f64) -> PyResult<f64> {
        Ok(moment(&self.inner, p).map_err(err)?.to_f64())
    }

    /// ||f - 1||_{L^p(dgamma)}; `inf` outside L^p.
    fn lp_dist(&self, p: f64) -> PyResult<f64> {
        Ok(lp_dist_to_one(&self.inner, p).map_err(err)?.to_f64())
    }

    /// W_p to `other`, the standard Gaussian by default.
    #[pyo3(signature = (p, other = None))]
    fn wasserstein(&self, py: Python<'_>, p: f64, other: Option<&PyDensity>) -> PyResult<f64> {
        let nu = other.map_or_else(PiecewiseLogDensity::standard_gaussian, |o| o.inner.clone());
        py.detach(|| wasserstein_p(&self.inner, &nu, p)).map_err(err)
    }

    fn talagrand_deficit(&self, py: Python<'_>) -> PyResult<f64> {
        py.detach(|| talagrand_deficit(&self.inner)).map_err(err)
    }

    fn hwi_chain(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let r = py.detach(|| hwi_chain(&self.inner)).map_err(err)?;
        to_dict(py, &r)
    }

    #[pyo3(signature = (ps = vec![1.0, 2.0]))]
    fn report(&self, py: Python<'_>, ps: Vec<f64>) -> PyResult<Py<PyAny>> {
        let r = py.detach(|| compute_report(&self.inner, &ps)).map_err(err)?;
        to_dict(py, &r)
    }

    /// ln ||h_f||_{L^p(w)} for the profile h_f(x) = sqrt(f(2 sqrt(pi) x)) g(x).
    #[pyo3(signature = (p, weight = "lebesgue"))]
    fn bhi_log_norm(&self, py: Python<'_>, p: f64, weight: &str) -> PyResult<f64> {
        let w = parse_weight(weight)?;
        let h = lsi_to_bhi_transform(&self.inner);
        Ok(py.detach(|| weighted_lp_norm(&h, p, w)).map_err(err)?.ln())
    }

    /// Distance from h_f to the Gaussians G_{a,r} in L^p(w).
    #[pyo3(signature = (p, weight = "lebesgue"))]
    fn dist_to_optimizers(&self, py: Python<'_>, p: f64, weight: &str) -> PyResult<Py<PyAny>> {
        let w = parse_weight(weight)?;
        let h = lsi_to_bhi_transform(&self.inner);
        let d = py.detach(|| dist_to_optimizers(&h, p, w)).map_err(err)?;
        to_dict(py, &d)
    }

    #[pyo3(signature = (grid_n = None))]
    fn bhi_deficit(&self, py: Python<'_>, grid_n: Option<usize>) -> PyResult<Py<PyAny>> {
        let h = lsi_to_bhi_transform(&self.inner);
        let r = py.detach(|| bhi_deficit(&h, &grid(grid_n))).map_err(err)?;
        to_dict(py, &r)
    }

    #[pyo3(signature = (grid_n = None))]
    fn carlen(&self, py: Python<'_>, grid_n: Option<usize>) -> PyResult<Py<PyAny>> {
        let r = py.detach(|| fourier_wiener_remainder(&self.inner, &grid(grid_n))).map_err(err)?;
        to_dict(py, &r)
    }

    fn __repr__(&self) -> String {
        format!("Density({:?})", self.inner.label())
    }
}

#[pyfunction]
#[pyo3(signature = (s, t, k, bridge = "quintic"))]
fn make_bump_family(s: f64, t: f64, k: f64, bridge: &str) -> PyResult<PyDensity> {
    let shape = match bridge {
        "quintic" => BridgeShape::Quintic,
        "cubic" => BridgeShape::Cubic,
        "smooth" => BridgeShape::Smooth,
        other => return Err(LsiError::new_err(format!("unknown bridge {other:?}; use quintic, cubic or smooth"))),
    };
    Ok(PyDensity { inner: make_bump_family_with(s, t, k, shape).map_err(err)? })
}

#[pyfunction]
fn shifted_gaussian(b: f64) -> PyResult<PyDensity> {
    Ok(PyDensity { inner: make_shifted_gaussian(b).map_err(err)? })
}

#[pyfunction]
fn heavytail(k: f64) -> PyResult<PyDensity> {
    Ok(PyDensity { inner: make_heavytail_family(k).map_err(err)? })
}

/// delta_BH of the Gaussian G_{a,r}.
#[pyfunction]
#[pyo3(signature = (a, r = 0.0, grid_n = None))]
fn optimizer_bhi_deficit(py: Python<'_>, a: f64, r: f64, grid_n: Option<usize>) -> PyResult<f64> {
    let g = OptimizerParams::new(a, r).map_err(err)?;
    Ok(py.detach(|| bhi_deficit(&g, &grid(grid_n))).map_err(err)?.delta_bh)
}

#[pyfunction]
#[pyo3(signature = (s = 1.0, t = 2.0, k = None, p = vec![1.0, 3.0]))]
fn theorem1(py: Python<'_>, s: f64, t: f64, k: Option<Vec<f64>>, p: Vec<f64>) -> PyResult<Py<PyAny>> {
    let ks = k.unwrap_or_else(|| DEFAULT_K_GRID.to_vec());
    let v = py.detach(|| verify_theorem1(s, t, &ks, &p)).map_err(err)?;
    to_dict(py, &v)
}

/// `which` is one of lsi-w2, lsi-w1, tal-w2, tal-w1.
#[pyfunction]
#[pyo3(signature = (which, m = 5.0, p = 2.0, k = None))]
fn instability(py: Python<'_>, which: &str, m: f64, p: f64, k: Option<Vec<f64>>) -> PyResult<Py<PyAny>> {
    let th = which.parse::<InstabilityTheorem>().map_err(err)?;
    let ks = k.unwrap_or_else(|| DEFAULT_K_GRID.to_vec());
    let v = py.detach(|| verify_instability_suite(th, InstabilityParams { m, p }, &ks)).map_err(err)?;
    to_dict(py, &v)
}

#[pyfunction]
#[pyo3(signature = (k = vec![2.0, 5.0, 10.0, 20.0]))]
fn heavytail_verdict(py: Python<'_>, k: Vec<f64>) -> PyResult<Py<PyAny>> {
    let (v, _) = py.detach(|| verify_heavytail(&k)).map_err(err)?;
    to_dict(py, &v)
}

#[pymodule]
pub fn lsi_instab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDensity>()?;
    m.add("LsiError", m.py().get_type::<LsiError>())?;
    m.add_function(wrap_pyfunction!(make_bump_family, m)?)?;
    m.add_function(wrap_pyfunction!(shifted_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(heavytail, m)?)?;
    m.add_function(wrap_pyfunction!(optimizer_bhi_deficit, m)?)?;
    m.add_function(wrap_pyfunction!(theorem1, m)?)?;
    m.add_function(wrap_pyfunction!(instability, m)?)?;
    m.add_function(wrap_pyfunction!(heavytail_verdict, m)?)?;
    Ok(())
}
