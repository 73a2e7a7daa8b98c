use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;
use serde_json::json;

use sobolab_core::cuspmap::distortion_report;
use sobolab_core::exponents::{select_witness, weighted_threshold, EmbeddingQuery};
use sobolab_core::pde::{solve_dirichlet, triangulate, weak_residual, MeshDomain, SolveOptions};
use sobolab_core::probe::{default_schedule, run_probe, TrialKind};
use sobolab_core::weights::{ap_check, BallFamily};
use sobolab_core::{CuspDomain, Error, IntegrateConfig, Weight};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Evaluation(_) | Error::Solver { .. } | Error::Inconclusive(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

// plain dicts and lists, same shape as the CLI reports
fn to_py<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Weighted embedding threshold for the cusp `|x'| < x_n^γ`.
#[pyfunction]
#[pyo3(signature = (n, p, alpha, gamma, m=1, s=None))]
fn exponents(py: Python<'_>, n: u32, p: f64, alpha: f64, gamma: f64, m: u32, s: Option<f64>) -> PyResult<Py<PyAny>> {
    let q = EmbeddingQuery { n, p, alpha, gamma, m };
    let t = weighted_threshold(&q);
    let witness = s.and_then(|s| select_witness(&q, s));
    to_py(py, &json!({ "threshold": t, "valid": t.is_valid(), "witness": witness }))
}

/// `A_p` check of `|x|^alpha` over the default ball family.
#[pyfunction]
#[pyo3(signature = (n, p, alpha, seed=0))]
fn ap(py: Python<'_>, n: usize, p: f64, alpha: f64, seed: u64) -> PyResult<Py<PyAny>> {
    let w = Weight::power(n, alpha).map_err(py_err)?;
    let family = BallFamily { seed, ..Default::default() };
    let report = py.detach(|| ap_check(&w, p, &family, &IntegrateConfig::default())).map_err(py_err)?;
    to_py(py, &report)
}

#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (exponents, a, p, q, r, s, alpha=0.0))]
fn distortion(py: Python<'_>, exponents: Vec<f64>, a: f64, p: f64, q: f64, r: f64, s: f64, alpha: f64) -> PyResult<Py<PyAny>> {
    let domain = CuspDomain::new(exponents).map_err(py_err)?;
    let report = py
        .detach(|| distortion_report(&domain, a, p, q, r, s, alpha, &IntegrateConfig::default()))
        .map_err(py_err)?;
    to_py(py, &report)
}

/// Dirichlet problem `-div(|x|^alpha ∇u) = load` on the unit square.
#[pyfunction]
#[pyo3(signature = (h, alpha, load=1.0, tol=1e-10))]
fn solve(py: Python<'_>, h: f64, alpha: f64, load: f64, tol: f64) -> PyResult<Py<PyAny>> {
    let w = Weight::power(2, alpha).map_err(py_err)?;
    let f = move |_: &[f64]| load;
    let (sol, residual) = py
        .detach(|| {
            let mesh = triangulate(&MeshDomain::unit_square(), h, 1.0)?;
            let sol = solve_dirichlet(&mesh, &w, f, &SolveOptions { tol, max_iterations: None })?;
            let residual = weak_residual(&sol, &w, f, None)?;
            Ok((sol, residual))
        })
        .map_err(py_err)?;
    let peak = sol.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    to_py(
        py,
        &json!({
            "vertices": sol.mesh.vertices.len(),
            "iterations": sol.iterations,
            "solver_residual": sol.residual,
            "weak_residual": residual,
            "energy": sol.energy,
            "max_abs": peak,
        }),
    )
}

/// Trial-function probe of the embedding at exponent `s`.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (n, p, alpha, gamma, s, family="tip_bump", beta=0.5, schedule=None))]
fn probe(
    py: Python<'_>,
    n: u32,
    p: f64,
    alpha: f64,
    gamma: f64,
    s: f64,
    family: &str,
    beta: f64,
    schedule: Option<Vec<f64>>,
) -> PyResult<Py<PyAny>> {
    let kind = match family {
        "tip_bump" => TrialKind::TipBump,
        "power_spike" => TrialKind::PowerSpike { beta },
        other => return Err(PyValueError::new_err(format!("unknown trial family {other:?}"))),
    };
    let q = EmbeddingQuery::new(n, p, alpha, gamma);
    let schedule = schedule.unwrap_or_else(default_schedule);
    let report = py.detach(|| run_probe(&q, s, kind, &schedule)).map_err(py_err)?;
    to_py(py, &report)
}

#[pymodule]
fn sobolab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(exponents, m)?)?;
    m.add_function(wrap_pyfunction!(ap, m)?)?;
    m.add_function(wrap_pyfunction!(distortion, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(probe, m)?)?;
    Ok(())
}
