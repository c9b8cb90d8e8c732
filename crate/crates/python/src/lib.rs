//! Python bindings: datasets, the hard-margin solver, optimizer runs and the
//! rate analysis. Vectors cross the boundary as plain lists of floats.

use mm::data::{self, Dataset};
use mm::losses::{LossConfig, LossSpec, LossTag};
use mm::margin::{self, MaxMarginSolution};
use mm::multiclass::{self, CrossEntropyObjective, MulticlassProblem};
use mm::optim::{self, OptimConfig, Trajectory, Variant};
use mm::rates::{self, AnalysisOptions, RateReport};
use mm::Error;
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

create_exception!(maxmargin, InfeasibleError, PyValueError, "The dataset is not linearly separable.");
create_exception!(maxmargin, NumericalError, PyRuntimeError, "A solver did not converge or overflowed.");

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Infeasible(_) => InfeasibleError::new_err(err.to_string()),
        Error::NonConvergence { .. } | Error::Overflow { .. } => NumericalError::new_err(err.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn loss_from_name(name: &str) -> PyResult<LossSpec> {
    let tag = match name {
        "exp" => LossTag::Exp,
        "logistic" => LossTag::Logistic,
        "probit" => LossTag::Probit,
        other => return Err(PyValueError::new_err(format!("unknown loss '{other}'"))),
    };
    LossSpec::from_config(&LossConfig { tag, beta: None, tail: None }).map_err(to_py)
}

/// Label-folded binary samples, one column per sample.
#[pyclass(name = "Dataset", module = "maxmargin", frozen)]
struct PyDataset {
    inner: Dataset,
}

#[pymethods]
impl PyDataset {
    /// Raw points (one list per sample) with labels in {-1, +1}.
    #[new]
    fn new(points: Vec<Vec<f64>>, labels: Vec<f64>) -> PyResult<Self> {
        Ok(PyDataset { inner: Dataset::from_labeled(&points, &labels).map_err(to_py)? })
    }

    #[staticmethod]
    fn figure1(seed: u64) -> Self {
        PyDataset { inner: data::make_figure1(seed) }
    }

    #[staticmethod]
    #[pyo3(signature = (seed, x2_scale = 20.0))]
    fn figure1_scaled(seed: u64, x2_scale: f64) -> Self {
        PyDataset { inner: data::make_figure1_scaled(seed, x2_scale) }
    }

    #[staticmethod]
    fn degenerate3d() -> Self {
        PyDataset { inner: data::make_degenerate3d() }
    }

    #[staticmethod]
    fn from_csv(path: &str) -> PyResult<Self> {
        Ok(PyDataset { inner: data::load_csv(std::path::Path::new(path)).map_err(to_py)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn count(&self) -> usize {
        self.inner.count()
    }

    /// Folded samples `y_n x_n`.
    fn folded(&self) -> Vec<Vec<f64>> {
        (0..self.inner.count()).map(|n| self.inner.column(n).to_vec()).collect()
    }

    fn sigma_max(&self) -> f64 {
        self.inner.sigma_max()
    }

    fn to_csv(&self) -> String {
        data::to_csv(&self.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.count()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(dim={}, count={})", self.inner.dim(), self.inner.count())
    }
}

#[pyclass(name = "MaxMarginSolution", module = "maxmargin", frozen)]
struct PySolution {
    inner: MaxMarginSolution,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn w_hat(&self) -> Vec<f64> {
        self.inner.w_hat.clone()
    }

    #[getter]
    fn support(&self) -> Vec<usize> {
        self.inner.support.clone()
    }

    #[getter]
    fn zero_coefficient(&self) -> Vec<usize> {
        self.inner.zero_coefficient.clone()
    }

    #[getter]
    fn alpha(&self) -> Vec<f64> {
        self.inner.alpha.clone()
    }

    #[getter]
    fn margin(&self) -> f64 {
        self.inner.margin
    }

    #[getter]
    fn theta(&self) -> Option<f64> {
        self.inner.theta
    }

    #[getter]
    fn degenerate(&self) -> bool {
        self.inner.degenerate
    }

    #[getter]
    fn kkt_residual(&self) -> f64 {
        self.inner.kkt_residual
    }

    fn direction(&self) -> Vec<f64> {
        self.inner.direction()
    }

    fn __repr__(&self) -> String {
        format!("MaxMarginSolution(margin={}, support={:?})", self.inner.margin, self.inner.support)
    }
}

#[pyclass(name = "Trajectory", module = "maxmargin", frozen)]
struct PyTrajectory {
    inner: Trajectory,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn times(&self) -> Vec<u64> {
        self.inner.times()
    }

    #[getter]
    fn weights(&self) -> Vec<Vec<f64>> {
        self.inner.checkpoints.iter().map(|c| c.w.clone()).collect()
    }

    #[getter]
    fn losses(&self) -> Vec<f64> {
        self.inner.checkpoints.iter().map(|c| c.loss).collect()
    }

    #[getter]
    fn final_w(&self) -> Vec<f64> {
        self.inner.final_w.clone()
    }

    #[getter]
    fn step_size(&self) -> f64 {
        self.inner.step_size
    }

    #[getter]
    fn truncated(&self) -> bool {
        self.inner.truncated.is_some()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.checkpoints.len()
    }
}

#[pyclass(name = "RateReport", module = "maxmargin", frozen)]
struct PyRateReport {
    inner: RateReport,
}

#[pymethods]
impl PyRateReport {
    fn all_passed(&self) -> bool {
        self.inner.all_passed()
    }

    /// `(name, passed, detail)` for every verdict.
    #[getter]
    fn verdicts(&self) -> Vec<(String, bool, String)> {
        self.inner.verdicts.iter().map(|v| (v.name.clone(), v.passed, v.detail.clone())).collect()
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py)
    }
}

#[pyfunction]
fn solve_hard_margin(dataset: &PyDataset) -> PyResult<PySolution> {
    Ok(PySolution { inner: margin::solve_hard_margin(&dataset.inner).map_err(to_py)? })
}

/// `w_hat` of every level of the degenerate chain.
#[pyfunction]
fn degenerate_chain(dataset: &PyDataset) -> PyResult<Vec<Vec<f64>>> {
    Ok(margin::degenerate_chain(&dataset.inner).map_err(to_py)?.w_hats())
}

#[pyfunction]
#[pyo3(signature = (solution, dataset, eta, w0 = None))]
fn solve_w_tilde(solution: &PySolution, dataset: &PyDataset, eta: f64, w0: Option<Vec<f64>>) -> PyResult<Vec<f64>> {
    let w0 = w0.unwrap_or_else(|| vec![0.0; dataset.inner.dim()]);
    Ok(margin::solve_w_tilde(&solution.inner, &dataset.inner, eta, &w0).map_err(to_py)?.w_tilde)
}

/// Runs one optimizer. `step_size` defaults to `1 / sigma_max^2`.
#[pyfunction]
#[pyo3(signature = (dataset, iters, variant = "gd", loss = "logistic", step_size = None, momentum = 0.9, batch_size = 4, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn run(
    py: Python<'_>,
    dataset: &PyDataset,
    iters: u64,
    variant: &str,
    loss: &str,
    step_size: Option<f64>,
    momentum: f64,
    batch_size: usize,
    seed: u64,
) -> PyResult<PyTrajectory> {
    let variant: Variant = variant.parse().map_err(|e| PyValueError::new_err(format!("{e}")))?;
    let loss = loss_from_name(loss)?;
    let mut cfg = OptimConfig::new(variant, iters);
    cfg.step_size = step_size;
    cfg.momentum = momentum;
    cfg.batch_size = batch_size;
    cfg.seed = seed;
    let data = dataset.inner.clone();
    let traj = py.detach(move || optim::run(&cfg, &loss, &data)).map_err(to_py)?;
    Ok(PyTrajectory { inner: traj })
}

/// Rate verdicts of a binary trajectory; GD runs on non-degenerate data also
/// get the offset convergence check.
#[pyfunction]
fn analyze(trajectory: &PyTrajectory, dataset: &PyDataset) -> PyResult<PyRateReport> {
    let traj = &trajectory.inner;
    let data = &dataset.inner;
    let sol = margin::solve_hard_margin(data).map_err(to_py)?;
    let chain = if sol.degenerate { Some(margin::degenerate_chain(data).map_err(to_py)?) } else { None };
    let offset = if traj.config.variant == Variant::Gd && !sol.degenerate {
        let w0 = traj.config.init.clone().unwrap_or_else(|| vec![0.0; data.dim()]);
        Some(margin::solve_w_tilde(&sol, data, traj.step_size, &w0).map_err(to_py)?)
    } else {
        None
    };
    let series = rates::residual_series(traj, data, &sol, offset.as_ref(), chain.as_ref()).map_err(to_py)?;
    Ok(PyRateReport { inner: rates::analyze(&series, AnalysisOptions::default()).map_err(to_py)? })
}

#[pyfunction]
fn direction_gap(w: Vec<f64>, w_hat: Vec<f64>) -> PyResult<f64> {
    rates::direction_gap(&w, &w_hat).map_err(to_py)
}

fn problem(points: Vec<Vec<f64>>, labels: Vec<usize>, classes: usize) -> PyResult<MulticlassProblem> {
    MulticlassProblem::from_columns(&points, labels, classes).map_err(to_py)
}

/// Rows `w_hat_k` of the K-class hard-margin SVM; labels are `1..=classes`.
#[pyfunction]
fn solve_kclass_svm(points: Vec<Vec<f64>>, labels: Vec<usize>, classes: usize) -> PyResult<Vec<Vec<f64>>> {
    Ok(multiclass::solve_kclass_svm(&problem(points, labels, classes)?).map_err(to_py)?.w_hat)
}

#[pyfunction]
fn ce_loss(points: Vec<Vec<f64>>, labels: Vec<usize>, classes: usize, w_flat: Vec<f64>) -> PyResult<f64> {
    multiclass::ce_loss(&problem(points, labels, classes)?, &w_flat).map_err(to_py)
}

#[pyfunction]
fn ce_gradient(points: Vec<Vec<f64>>, labels: Vec<usize>, classes: usize, w_flat: Vec<f64>) -> PyResult<Vec<f64>> {
    multiclass::ce_gradient(&problem(points, labels, classes)?, &w_flat).map_err(to_py)
}

/// Cross-entropy GD on the flat `K d` parameter; the step defaults to `1 / (4 sigma_max(X~)^2)`.
#[pyfunction]
#[pyo3(signature = (points, labels, classes, iters, step_size = None))]
fn run_multiclass(
    py: Python<'_>,
    points: Vec<Vec<f64>>,
    labels: Vec<usize>,
    classes: usize,
    iters: u64,
    step_size: Option<f64>,
) -> PyResult<PyTrajectory> {
    let p = problem(points, labels, classes)?;
    let eta = match step_size {
        Some(s) => s,
        None => p.default_step().map_err(to_py)?,
    };
    let cfg = OptimConfig::new(Variant::Gd, iters);
    let traj = py.detach(move || optim::run_objective(&cfg, &CrossEntropyObjective(&p), eta)).map_err(to_py)?;
    Ok(PyTrajectory { inner: traj })
}

#[pymodule]
fn maxmargin(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PySolution>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyRateReport>()?;
    m.add("InfeasibleError", m.py().get_type::<InfeasibleError>())?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_function(wrap_pyfunction!(solve_hard_margin, m)?)?;
    m.add_function(wrap_pyfunction!(degenerate_chain, m)?)?;
    m.add_function(wrap_pyfunction!(solve_w_tilde, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(direction_gap, m)?)?;
    m.add_function(wrap_pyfunction!(solve_kclass_svm, m)?)?;
    m.add_function(wrap_pyfunction!(ce_loss, m)?)?;
    m.add_function(wrap_pyfunction!(ce_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(run_multiclass, m)?)?;
    Ok(())
}
