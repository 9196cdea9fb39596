use lieident::ident::identifiability;
use lieident::indist::{closed_form as eval_closed_form, ClosedForm};
use lieident::model::{builtin, builtin_names, parse_model_json};
use lieident::uio::Options;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use std::collections::BTreeMap;

fn err(e: lieident::Error) -> PyErr {
    PyValueError::new_err(e.to_json().to_string())
}

/// Identifiability report of a built-in model, or of a JSON model document
/// when `model` starts with '{'. Returns JSON text.
#[pyfunction]
#[pyo3(signature = (model, seed = None, trials = None))]
fn analyze(model: &str, seed: Option<u64>, trials: Option<usize>) -> PyResult<String> {
    let g = if model.trim_start().starts_with('{') { parse_model_json(model) } else { builtin(model) }.map_err(err)?;
    let mut opts = Options::default();
    if let Some(s) = seed {
        opts.oracle.seed = s;
    }
    if let Some(t) = trials {
        opts.oracle.trials = t.max(1);
    }
    let r = identifiability(&g.to_affine().map_err(err)?, &opts).map_err(err)?;
    Ok(r.report().to_string())
}

/// Runs the command line front end; returns (exit code, stdout, stderr).
#[pyfunction]
fn run_cli(args: Vec<String>) -> (i32, String, String) {
    let mut full = vec!["lieident".to_string()];
    full.extend(args);
    let o = lieident::cli::run(&full);
    (o.code, o.stdout, o.stderr)
}

#[pyfunction]
fn models() -> Vec<(String, String)> {
    builtin_names().iter().map(|(n, d)| (n.to_string(), d.to_string())).collect()
}

/// Closed-form transformation `kind` ("hiv", "seiar_sym2", "toggle_set3", ...)
/// at group parameter `tau`.
#[pyfunction]
fn closed_form(kind: &str, tau: f64, baseline: BTreeMap<String, f64>) -> PyResult<BTreeMap<String, f64>> {
    let k: ClosedForm = kind.parse().map_err(err)?;
    eval_closed_form(k, tau, &baseline).map_err(err)
}

#[pymodule]
fn lieident_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add_function(wrap_pyfunction!(models, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form, m)?)?;
    Ok(())
}
