//! Python bindings for `lipbatch`.
//!
//! The module mirrors the core crate at a coarse grain:
//!
//! * `Gp` wraps a fitted (or fixed-hyperparameter) posterior and exposes
//!   prediction, the gradient posterior, acquisitions and Lipschitz estimates.
//! * `Penalizer` is a single local penalizer around a batch point.
//! * `Benchmark` gives access to the synthetic objectives.
//! * `propose_batch` and `run_bbo` drive the batch strategies; `run_bbo`
//!   accepts any Python callable as the objective.
//!
//! Points are plain lists of floats. Invalid arguments raise `ValueError`,
//! numerical or objective failures raise `RuntimeError`, and exceptions raised
//! by a Python objective propagate unchanged.

use lipbatch::acquisition::{ei as ei_value, ucb as ucb_value};
use lipbatch::batch::DesignSettings;
use lipbatch::gp::{eq_kernel as eq_kernel_value, fit_gp};
use lipbatch::lipschitz::{estimate_l_global, estimate_l_local, estimate_m, maximize_mean};
use lipbatch::{
    Acquisition, AcquisitionSpec, Benchmark, BatchStrategy, BoxDomain, Dataset, Error, GpPosterior, Goal,
    Hyperparams, MMode, PenalizerParams, RunOptions, RunState, RunTrace, StrategyKind, Transform,
};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidInput(msg) => PyValueError::new_err(msg),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

fn spec(acquisition: &str, kappa: f64, transform: Option<&str>) -> PyResult<AcquisitionSpec> {
    let base = match acquisition.to_ascii_lowercase().as_str() {
        "ei" => AcquisitionSpec::ei(),
        "ucb" => AcquisitionSpec::ucb(kappa).map_err(to_py)?,
        other => return Err(PyValueError::new_err(format!("unknown acquisition '{other}'"))),
    };
    match transform {
        Some(t) => base.with_transform(parse::<Transform>(t)?).map_err(to_py),
        None => Ok(base),
    }
}

fn m_mode(s: &str) -> PyResult<MMode> {
    match s {
        "max_y" => Ok(MMode::MaxY),
        "max_mu" => Ok(MMode::MaxMu),
        other => Err(PyValueError::new_err(format!("unknown incumbent mode '{other}'"))),
    }
}

fn dataset(x: Vec<Vec<f64>>, y: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> PyResult<Dataset> {
    let domain = BoxDomain::new(lower, upper).map_err(to_py)?;
    Dataset::new(x, y, domain).map_err(to_py)
}

fn check_dim(gp: &GpPosterior, x: &[f64]) -> PyResult<()> {
    if x.len() != gp.dataset().dim() {
        return Err(PyValueError::new_err(format!("point has {} coordinates, model expects {}", x.len(), gp.dataset().dim())));
    }
    Ok(())
}

/// Gaussian-process posterior with an exponentiated-quadratic kernel.
///
/// The constructor uses the given hyperparameters as they are; `Gp.fit`
/// maximizes the marginal likelihood with random restarts.
#[pyclass(name = "Gp", module = "lipbatch_py", frozen)]
pub struct PyGp {
    inner: GpPosterior,
}

#[pymethods]
impl PyGp {
    #[new]
    #[pyo3(signature = (x, y, lower, upper, theta = 1.0, gamma = 1.0, noise_var = 1e-6))]
    fn new(
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        theta: f64,
        gamma: f64,
        noise_var: f64,
    ) -> PyResult<Self> {
        let hyper = Hyperparams::new(theta, gamma, noise_var).map_err(to_py)?;
        let inner = GpPosterior::new(dataset(x, y, lower, upper)?, hyper).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Fit the hyperparameters by type-II maximum likelihood.
    #[staticmethod]
    #[pyo3(signature = (x, y, lower, upper, restarts = 10, seed = 0))]
    fn fit(x: Vec<Vec<f64>>, y: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>, restarts: usize, seed: u64) -> PyResult<Self> {
        let data = dataset(x, y, lower, upper)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self { inner: fit_gp(&data, restarts, &mut rng).map_err(to_py)? })
    }

    /// `(theta, gamma, noise_var)`.
    #[getter]
    fn hyperparameters(&self) -> (f64, f64, f64) {
        let h = self.inner.hyper();
        (h.theta, h.gamma, h.noise_var)
    }

    /// `(offset, scale)` used to standardize the targets.
    #[getter]
    fn scaling(&self) -> (f64, f64) {
        self.inner.scaling()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dataset().dim()
    }

    fn __len__(&self) -> usize {
        self.inner.dataset().len()
    }

    /// Posterior mean and variance at `x`.
    fn predict(&self, x: Vec<f64>) -> PyResult<(f64, f64)> {
        check_dim(&self.inner, &x)?;
        Ok(self.inner.mean_var(&x))
    }

    /// Gradient of the posterior mean at `x`.
    fn mean_grad(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        check_dim(&self.inner, &x)?;
        Ok(self.inner.mean_grad(&x))
    }

    /// Mean vector and covariance matrix of the gradient posterior at `x`.
    fn gradient(&self, x: Vec<f64>) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
        check_dim(&self.inner, &x)?;
        let g = self.inner.gradient(&x);
        let cov = g.cov_grad.row_iter().map(|r| r.iter().copied().collect()).collect();
        Ok((g.mean_grad, cov))
    }

    fn log_marginal_likelihood(&self) -> f64 {
        self.inner.log_marginal_likelihood()
    }

    /// A new posterior with one more observation and the same hyperparameters.
    fn condition_on(&self, x: Vec<f64>, y: f64) -> PyResult<Self> {
        Ok(Self { inner: self.inner.condition_on(x, y).map_err(to_py)? })
    }

    /// Acquisition value and gradient at `x` (maximization convention).
    #[pyo3(signature = (x, acquisition = "ucb", kappa = 2.0))]
    fn acquisition(&self, x: Vec<f64>, acquisition: &str, kappa: f64) -> PyResult<(f64, Vec<f64>)> {
        check_dim(&self.inner, &x)?;
        Ok(Acquisition::new(&self.inner, spec(acquisition, kappa, None)?).value_grad(&x))
    }

    /// Global Lipschitz estimate: `(value, argmax_point)`.
    #[pyo3(signature = (seed = 0))]
    fn lipschitz(&self, seed: u64) -> (f64, Vec<f64>) {
        let est = estimate_l_global(&self.inner, &mut ChaCha8Rng::seed_from_u64(seed));
        (est.value, est.argmax_point)
    }

    /// Norm of the posterior-mean gradient at `x`.
    fn local_lipschitz(&self, x: Vec<f64>) -> PyResult<f64> {
        check_dim(&self.inner, &x)?;
        Ok(estimate_l_local(&self.inner, &x))
    }

    /// Incumbent value `M`, either the best target (`"max_y"`) or the maximum of the mean (`"max_mu"`).
    #[pyo3(signature = (mode = "max_y", seed = 0))]
    fn incumbent(&self, mode: &str, seed: u64) -> PyResult<f64> {
        Ok(estimate_m(&self.inner, m_mode(mode)?, &mut ChaCha8Rng::seed_from_u64(seed)))
    }

    /// Maximizer of the posterior mean: `(point, value)`.
    #[pyo3(signature = (seed = 0))]
    fn maximize_mean(&self, seed: u64) -> (Vec<f64>, f64) {
        maximize_mean(&self.inner, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn __repr__(&self) -> String {
        let (t, g, n) = self.hyperparameters();
        format!("Gp(n={}, dim={}, theta={t:.4}, gamma={g:.4}, noise_var={n:.3e})", self.__len__(), self.dim())
    }
}

/// Local penalizer around a batch point `center`.
#[pyclass(name = "Penalizer", module = "lipbatch_py", frozen)]
pub struct PyPenalizer {
    inner: PenalizerParams,
}

#[pymethods]
impl PyPenalizer {
    #[new]
    fn new(center: Vec<f64>, mu_c: f64, sigma_c: f64, lipschitz: f64, incumbent: f64) -> PyResult<Self> {
        if center.is_empty() {
            return Err(PyValueError::new_err("center must have at least one coordinate"));
        }
        if ![mu_c, sigma_c, lipschitz, incumbent].iter().all(|v| v.is_finite()) || sigma_c < 0.0 || lipschitz < 0.0 {
            return Err(PyValueError::new_err("penalizer parameters must be finite, sigma_c and lipschitz non-negative"));
        }
        Ok(Self { inner: PenalizerParams::new(center, mu_c, sigma_c, lipschitz, incumbent) })
    }

    fn value(&self, x: Vec<f64>) -> PyResult<f64> {
        self.check(&x)?;
        Ok(self.inner.value(&x))
    }

    fn ln_value(&self, x: Vec<f64>) -> PyResult<f64> {
        self.check(&x)?;
        Ok(self.inner.ln_value(&x))
    }

    fn grad(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.check(&x)?;
        Ok(self.inner.grad(&x))
    }

    /// Distance at which the penalizer reaches one half.
    #[getter]
    fn exclusion_radius(&self) -> f64 {
        self.inner.exclusion_radius()
    }

    fn __call__(&self, x: Vec<f64>) -> PyResult<f64> {
        self.value(x)
    }
}

impl PyPenalizer {
    fn check(&self, x: &[f64]) -> PyResult<()> {
        if x.len() != self.inner.center().len() {
            return Err(PyValueError::new_err("point and center differ in dimension"));
        }
        Ok(())
    }
}

/// One of the synthetic objectives: `"gsobol"`, `"cosines"` or `"forrester"`.
#[pyclass(name = "Benchmark", module = "lipbatch_py", frozen)]
pub struct PyBenchmark {
    inner: Benchmark,
}

#[pymethods]
impl PyBenchmark {
    #[new]
    #[pyo3(signature = (name, dimension = None))]
    fn new(name: &str, dimension: Option<usize>) -> PyResult<Self> {
        Ok(Self { inner: Benchmark::by_name(name, dimension).map_err(to_py)? })
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.inner.name()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn lower(&self) -> Vec<f64> {
        self.inner.domain().lower().to_vec()
    }

    #[getter]
    fn upper(&self) -> Vec<f64> {
        self.inner.domain().upper().to_vec()
    }

    /// `"min"` or `"max"`.
    #[getter]
    fn goal(&self) -> &'static str {
        match self.inner.goal() {
            Goal::Minimize => "min",
            Goal::Maximize => "max",
        }
    }

    /// `(location, value)` of the known optimum, if any.
    #[getter]
    fn known_optimum(&self) -> Option<(Vec<f64>, f64)> {
        self.inner.known_opt().map(|o| (o.location.clone(), o.value))
    }

    fn __call__(&self, x: Vec<f64>) -> PyResult<f64> {
        if x.len() != self.inner.dim() {
            return Err(PyValueError::new_err(format!("{} expects {} coordinates", self.inner.name(), self.inner.dim())));
        }
        Ok(self.inner.evaluate(&x))
    }
}

/// Exponentiated-quadratic kernel `theta * exp(-gamma * ||x1 - x2||^2)`;
/// `gamma` is an inverse squared length-scale.
#[pyfunction]
#[pyo3(signature = (x1, x2, theta = 1.0, gamma = 1.0))]
fn eq_kernel(x1: Vec<f64>, x2: Vec<f64>, theta: f64, gamma: f64) -> PyResult<f64> {
    if x1.len() != x2.len() {
        return Err(PyValueError::new_err("points differ in dimension"));
    }
    let h = Hyperparams::new(theta, gamma, 0.0).map_err(to_py)?;
    Ok(eq_kernel_value(&x1, &x2, &h))
}

/// Expected improvement over `y_best` for a maximization problem.
#[pyfunction]
fn expected_improvement(mu: f64, sigma: f64, y_best: f64) -> f64 {
    ei_value(mu, sigma, y_best)
}

/// Upper confidence bound `mu + kappa * sigma`.
#[pyfunction]
fn upper_confidence_bound(mu: f64, sigma: f64, kappa: f64) -> f64 {
    ucb_value(mu, sigma, kappa)
}

/// Propose the next batch for observed data, without evaluating anything.
#[pyfunction]
#[pyo3(signature = (
    x, y, lower, upper, strategy = "lp", batch_size = 5, acquisition = "ucb", kappa = 2.0, goal = "max", seed = 0,
    lipschitz = None, transform = None,
))]
#[allow(clippy::too_many_arguments)]
fn propose_batch(
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    strategy: &str,
    batch_size: usize,
    acquisition: &str,
    kappa: f64,
    goal: &str,
    seed: u64,
    lipschitz: Option<f64>,
    transform: Option<&str>,
) -> PyResult<Vec<Vec<f64>>> {
    let goal: Goal = parse(goal)?;
    let y = y.into_iter().map(|v| goal.to_internal(v)).collect();
    let strategy = BatchStrategy::new(parse::<StrategyKind>(strategy)?, batch_size, spec(acquisition, kappa, transform)?).map_err(to_py)?;
    let settings = DesignSettings { lipschitz_override: lipschitz, ..DesignSettings::default() };
    let mut state = RunState::new(dataset(x, y, lower, upper)?, seed, settings).map_err(to_py)?;
    Ok(state.propose(&strategy).map_err(to_py)?.points)
}

fn trace_dict<'py>(py: Python<'py>, trace: &RunTrace) -> PyResult<Bound<'py, PyDict>> {
    let rows = trace
        .rows
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("replicate", r.replicate)?;
            d.set_item("iteration", r.iteration)?;
            d.set_item("batch_index", r.batch_index)?;
            d.set_item("x", r.x.clone())?;
            d.set_item("y", r.y)?;
            d.set_item("best_so_far", r.best_so_far)?;
            d.set_item("design_time_s", r.design_time_s)?;
            d.set_item("eval_time_s", r.eval_time_s)?;
            d.set_item("wall_clock_s", r.wall_clock_s)?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    let out = PyDict::new(py);
    out.set_item("rows", rows)?;
    out.set_item("best", trace.best())?;
    out.set_item("recommended", trace.recommended.clone())?;
    out.set_item("recommended_mean", trace.recommended_mean)?;
    Ok(out)
}

/// Run batch Bayesian optimization of a Python callable `objective(x) -> float`.
///
/// Returns a dict with the evaluation `rows`, the `best` observed value, and the
/// `recommended` point (maximizer of the final posterior mean in the goal's sense).
#[pyfunction]
#[pyo3(signature = (
    objective, lower, upper, strategy = "lp", batch_size = 5, iterations = 10, init_size = None,
    acquisition = "ucb", kappa = 2.0, goal = "min", seed = 0, record_timing = true, transform = None,
))]
#[allow(clippy::too_many_arguments)]
fn run_bbo<'py>(
    py: Python<'py>,
    objective: Bound<'py, PyAny>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    strategy: &str,
    batch_size: usize,
    iterations: usize,
    init_size: Option<usize>,
    acquisition: &str,
    kappa: f64,
    goal: &str,
    seed: u64,
    record_timing: bool,
    transform: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let domain = BoxDomain::new(lower, upper).map_err(to_py)?;
    let strategy = BatchStrategy::new(parse::<StrategyKind>(strategy)?, batch_size, spec(acquisition, kappa, transform)?).map_err(to_py)?;
    let mut opts = RunOptions::new(iterations, init_size.unwrap_or(2 * domain.dim() + 1), seed, parse(goal)?);
    opts.record_timing = record_timing;

    let mut raised: Option<PyErr> = None;
    let mut f = |x: &[f64]| -> Result<f64, String> {
        match objective.call1((x.to_vec(),)).and_then(|v| v.extract::<f64>()) {
            Ok(v) => Ok(v),
            Err(e) => {
                let msg = e.to_string();
                raised = Some(e);
                Err(msg)
            }
        }
    };
    let result = lipbatch::run_bbo(&mut f, &domain, &strategy, &opts);
    match result {
        Ok(trace) => trace_dict(py, &trace),
        Err(failure) => Err(raised.unwrap_or_else(|| to_py(failure.error))),
    }
}

#[pymodule]
pub fn lipbatch_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGp>()?;
    m.add_class::<PyPenalizer>()?;
    m.add_class::<PyBenchmark>()?;
    m.add_function(wrap_pyfunction!(eq_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(expected_improvement, m)?)?;
    m.add_function(wrap_pyfunction!(upper_confidence_bound, m)?)?;
    m.add_function(wrap_pyfunction!(propose_batch, m)?)?;
    m.add_function(wrap_pyfunction!(run_bbo, m)?)?;
    Ok(())
}
