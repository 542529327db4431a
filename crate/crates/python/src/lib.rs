//! Python bindings: expressions, systems and the check/transform/verify
//! pipeline. Reports cross the boundary as JSON strings.

use std::collections::HashMap;
use std::path::PathBuf;

use ::flatcheck::cli::{self, Command, RunConfig};
use ::flatcheck::diffgeo::lie_bracket;
use ::flatcheck::symx::{self, Symbol};
use ::flatcheck::system::SystemSpec;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A symbolic scalar expression.
#[pyclass(name = "Expr", module = "flatcheck", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyExpr(symx::Expr);

#[pymethods]
impl PyExpr {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        symx::parse_free(text).map(PyExpr).map_err(value_err)
    }

    fn diff(&self, var: &str) -> Self {
        PyExpr(symx::diff(&self.0, &Symbol::new(var)))
    }

    fn normalize(&self) -> Self {
        PyExpr(symx::normalize(&self.0))
    }

    /// Value at the given symbol bindings.
    fn eval(&self, values: HashMap<String, f64>) -> PyResult<f64> {
        symx::eval_with(&self.0, &|s: &Symbol| values.get(s.name()).copied()).map_err(value_err)
    }

    #[pyo3(signature = (other, trials = 50, seed = 0, tol = 1e-9))]
    fn equiv(&self, other: &PyExpr, trials: usize, seed: u64, tol: f64) -> PyResult<bool> {
        symx::equiv(&self.0, &other.0, trials, seed, tol).map_err(value_err)
    }

    fn symbols(&self) -> Vec<String> {
        self.0.symbols().iter().map(|s| s.name().to_string()).collect()
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Expr('{}')", self.0)
    }

    fn __eq__(&self, other: &PyExpr) -> bool {
        symx::same(&self.0, &other.0)
    }
}

/// A two-input control-affine system loaded from spec-file text.
#[pyclass(name = "System", module = "flatcheck", frozen)]
struct PySystem {
    spec: SystemSpec,
    source: String,
}

#[pymethods]
impl PySystem {
    #[new]
    #[pyo3(signature = (text, seed = 0))]
    fn new(text: &str, seed: u64) -> PyResult<Self> {
        let spec = cli::parse_spec(text, seed).map_err(value_err)?;
        Ok(PySystem {
            spec,
            source: "<string>".into(),
        })
    }

    #[staticmethod]
    #[pyo3(signature = (path, seed = 0))]
    fn load(path: PathBuf, seed: u64) -> PyResult<Self> {
        let spec = cli::load_spec(&path, seed).map_err(|e| match e {
            cli::SpecFileError::Io { .. } => PyIOError::new_err(e.to_string()),
            e => value_err(e),
        })?;
        Ok(PySystem {
            spec,
            source: path.display().to_string(),
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.spec.n()
    }

    #[getter]
    fn states(&self) -> Vec<String> {
        self.spec.states().iter().map(|s| s.name().to_string()).collect()
    }

    #[getter]
    fn params(&self) -> HashMap<String, f64> {
        self.spec
            .param_values
            .iter()
            .map(|(k, v)| (k.name().to_string(), *v))
            .collect()
    }

    /// Components of the named field: "f", "g1" or "g2".
    fn field(&self, name: &str) -> PyResult<Vec<PyExpr>> {
        let v = match name {
            "f" => &self.spec.f,
            "g1" => &self.spec.g1,
            "g2" => &self.spec.g2,
            _ => return Err(value_err(format!("unknown field `{name}`"))),
        };
        Ok(v.comps.iter().cloned().map(PyExpr).collect())
    }

    /// [a, b] for two of "f", "g1", "g2".
    fn bracket(&self, a: &str, b: &str) -> PyResult<Vec<PyExpr>> {
        let pick = |n: &str| match n {
            "f" => Ok(&self.spec.f),
            "g1" => Ok(&self.spec.g1),
            "g2" => Ok(&self.spec.g2),
            _ => Err(value_err(format!("unknown field `{n}`"))),
        };
        let br = lie_bracket(pick(a)?, pick(b)?).map_err(value_err)?;
        Ok(br.comps.into_iter().map(PyExpr).collect())
    }

    #[pyo3(signature = (seed = 0, samples = 100, degree = 2))]
    fn check(&self, seed: u64, samples: usize, degree: u32) -> PyResult<String> {
        self.run(Command::Check, seed, samples, degree, false)
    }

    #[pyo3(signature = (seed = 0, samples = 100, degree = 2, force = false))]
    fn transform(&self, seed: u64, samples: usize, degree: u32, force: bool) -> PyResult<String> {
        self.run(Command::Transform, seed, samples, degree, force)
    }

    #[pyo3(signature = (seed = 0, samples = 100, degree = 2, force = false))]
    fn verify(&self, seed: u64, samples: usize, degree: u32, force: bool) -> PyResult<String> {
        self.run(Command::Verify, seed, samples, degree, force)
    }

    /// Writes the trajectory CSV to `out` and returns the JSON report.
    #[pyo3(signature = (out, seed = 0, dt = 1e-3, horizon = 1.0))]
    fn simulate(&self, out: PathBuf, seed: u64, dt: f64, horizon: f64) -> PyResult<String> {
        let mut cfg = RunConfig::new(Command::Simulate, &self.source);
        cfg.seed = seed;
        cfg.dt = dt;
        cfg.horizon = horizon;
        cfg.out = Some(out);
        let (report, _) = cli::run_spec(&self.spec, &cfg).map_err(value_err)?;
        Ok(report.to_json())
    }
}

impl PySystem {
    fn run(&self, command: Command, seed: u64, samples: usize, degree: u32, force: bool) -> PyResult<String> {
        let mut cfg = RunConfig::new(command, &self.source);
        cfg.seed = seed;
        cfg.samples = samples;
        cfg.degree = degree;
        cfg.force = force;
        let (report, _) = cli::run_spec(&self.spec, &cfg).map_err(value_err)?;
        Ok(report.to_json())
    }
}

#[pymodule(name = "flatcheck")]
fn flatcheck_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyExpr>()?;
    m.add_class::<PySystem>()?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
