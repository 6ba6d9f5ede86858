//! Python bindings: flux validation, single solves and the CLI commands.

use std::path::PathBuf;

use ohx_core::flux::{default_x_extent, linspace, make_flux, validate_assumptions};
use ohx_core::grid::{make_grid, project_initial};
use ohx_core::{
    Error, FluxFamily, FluxModel, FluxSpec, InitialData, Integrator, NumericalFluxKind,
    SolverConfig,
};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_error(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn core_error(e: Error) -> PyErr {
    match e {
        Error::SolverFault { .. } | Error::NonFinite(_) | Error::OutsideStateBox { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        other => value_error(other),
    }
}

fn model(family: &str, a: f64, s: f64, m: f64) -> PyResult<(FluxModel, FluxFamily)> {
    if family == "zero" {
        return Ok((FluxModel::zero(), FluxFamily::Burgers));
    }
    let fam = FluxFamily::parse(family, Some(a), Some(s), None).map_err(core_error)?;
    let model = make_flux(&FluxSpec::new(fam.clone()).with_state_box(m)).map_err(core_error)?;
    Ok((model, fam))
}

/// Checks the flux hypotheses and returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (family = "weighted-burgers", a = 4.0, s = 1.0, m = 8.0, x_lo = 0.01, n_x = 201, tol = 1e-6))]
#[allow(clippy::too_many_arguments)]
fn validate_flux<'py>(
    py: Python<'py>,
    family: &str,
    a: f64,
    s: f64,
    m: f64,
    x_lo: f64,
    n_x: usize,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let (model, fam) = model(family, a, s, m)?;
    let box_m = if model.state_box_m().is_finite() {
        model.state_box_m()
    } else {
        1.0
    };
    let xs = linspace(x_lo, default_x_extent(&fam), n_x);
    let report = validate_assumptions(&model, &xs, (-box_m, box_m), tol);
    let out = PyDict::new(py);
    out.set_item("flux", &report.flux)?;
    out.set_item("passed", report.passed())?;
    out.set_item(
        "failures",
        report.failures().map(|c| c.name).collect::<Vec<_>>(),
    )?;
    out.set_item(
        "warnings",
        report.warnings().map(|c| c.name).collect::<Vec<_>>(),
    )?;
    let k = model.constants();
    out.set_item("c", k.c)?;
    out.set_item("l", k.l)?;
    out.set_item("l1", k.l1)?;
    Ok(out)
}

/// Solves from a gaussian dipole and returns `{"t", "x", "u"}` with one
/// row of `u` per snapshot. Faults raise `RuntimeError`.
#[pyfunction]
#[pyo3(signature = (
    x_max = 10.0, n = 200, t_end = 0.5, family = "weighted-burgers", a = 4.0, s = 1.0, m = 8.0,
    mu = 5.0, w = 1.0, epsilon = 0.0, flux = "engquist-osher", integrator = "ssp-rk2", cfl = 0.5,
    include_source = true, stride = 1
))]
#[allow(clippy::too_many_arguments)]
fn solve<'py>(
    py: Python<'py>,
    x_max: f64,
    n: usize,
    t_end: f64,
    family: &str,
    a: f64,
    s: f64,
    m: f64,
    mu: f64,
    w: f64,
    epsilon: f64,
    flux: &str,
    integrator: &str,
    cfl: f64,
    include_source: bool,
    stride: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let (model, _) = model(family, a, s, m)?;
    let grid = make_grid(x_max, n).map_err(core_error)?;
    let u0 =
        project_initial(&InitialData::GaussianDipole { mu, w }, &grid, true).map_err(core_error)?;
    let config = SolverConfig {
        epsilon,
        numerical_flux: flux.parse::<NumericalFluxKind>().map_err(core_error)?,
        integrator: integrator.parse::<Integrator>().map_err(core_error)?,
        cfl,
        t_end,
        output_stride: stride,
        include_source,
        monitor_window: None,
    };
    let h = py
        .detach(|| ohx_core::solver::solve(&u0, &model, &config))
        .map_err(core_error)?;
    let out = PyDict::new(py);
    out.set_item("t", h.times())?;
    out.set_item("x", grid.centers())?;
    out.set_item(
        "u",
        h.snapshots
            .iter()
            .map(|s| s.field.values().to_vec())
            .collect::<Vec<_>>(),
    )?;
    out.set_item("warnings", h.warnings.clone())?;
    Ok(out)
}

/// Runs a CLI command; returns `(exit_code, message)`.
#[pyfunction]
#[pyo3(signature = (command, config, out = None))]
fn run_command(
    py: Python<'_>,
    command: &str,
    config: PathBuf,
    out: Option<PathBuf>,
) -> PyResult<(i32, String)> {
    use ohx_cli::Command;
    let cmd = match command {
        "validate-flux" => Command::ValidateFlux,
        "run" => Command::Run,
        "certify" => Command::Certify,
        "sweep" => Command::Sweep,
        "converge" => Command::Converge,
        other => return Err(value_error(format!("unknown command `{other}`"))),
    };
    let report = py.detach(|| ohx_cli::execute(cmd, &config, out.as_deref()));
    Ok((report.code, report.message))
}

#[pymodule]
fn ohx(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(validate_flux, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(run_command, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
