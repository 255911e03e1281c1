//! Python bindings. Matrices cross the boundary as lists of rows, subsets as
//! `"{1,5}"` strings or lists of one-based indices.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use pmsearch_core::forge::{self, ForgeConfig};
use pmsearch_core::mask::{parse_subset, SubsetMask};
use pmsearch_core::minors::{self, MinorRecord};
use pmsearch_core::oracle::{self, StrategyKind};
use pmsearch_core::rng::substream;
use pmsearch_core::schur::{self, EnsembleConfig, PairSpec};
use pmsearch_core::{info, Error, Matrix};

create_exception!(pmsearch, PmsearchError, PyException);

fn err(e: Error) -> PyErr {
    PmsearchError::new_err(e.to_string())
}

fn to_matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    Matrix::from_rows(&rows).map_err(err)
}

#[derive(FromPyObject)]
enum SubsetArg {
    Text(String),
    Indices(Vec<usize>),
}

impl SubsetArg {
    fn resolve(self, n: usize) -> PyResult<SubsetMask> {
        match self {
            SubsetArg::Text(s) => parse_subset(&s, n),
            SubsetArg::Indices(v) => SubsetMask::from_one_based(&v, n),
        }
        .map_err(err)
    }
}

fn parse_strategy(s: &str) -> PyResult<StrategyKind> {
    s.parse().map_err(err)
}

fn minor_tuple(r: &MinorRecord) -> (String, u64, f64) {
    (r.alpha.to_string(), r.alpha.bits(), r.value)
}

/// `M + u vᵀ` with its base matrix and vectors.
#[pyclass(module = "pmsearch", from_py_object)]
#[derive(Clone)]
struct Instance {
    inner: pmsearch_core::Instance,
}

#[pymethods]
impl Instance {
    #[new]
    #[pyo3(signature = (m, u=None, v=None))]
    fn new(m: Vec<Vec<f64>>, u: Option<Vec<f64>>, v: Option<Vec<f64>>) -> PyResult<Self> {
        let m = to_matrix(m)?;
        let n = m.n();
        let inner = pmsearch_core::Instance::new(m, u.unwrap_or(vec![0.0; n]), v.unwrap_or(vec![0.0; n])).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        Ok(Self { inner: pmsearch_core::Instance::from_json(s).map_err(err)? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { inner: pmsearch_core::Instance::load(path).map_err(err)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn m(&self) -> Vec<Vec<f64>> {
        self.inner.m().rows()
    }

    #[getter]
    fn u(&self) -> Vec<f64> {
        self.inner.u().to_vec()
    }

    #[getter]
    fn v(&self) -> Vec<f64> {
        self.inner.v().to_vec()
    }

    /// Rows of `M + u vᵀ`.
    fn perturbed(&self) -> Vec<Vec<f64>> {
        self.inner.perturbed().rows()
    }

    #[pyo3(signature = (tol=0.0))]
    fn check(&self, tol: f64) -> PyResult<ViolationReport> {
        let r = minors::violation_set(&self.inner.perturbed(), tol).map_err(err)?;
        Ok(ViolationReport { inner: r })
    }

    fn __eq__(&self, other: &Instance) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Instance(n={})", self.inner.n())
    }
}

#[pyclass(module = "pmsearch", frozen)]
struct ViolationReport {
    inner: minors::ViolationReport,
}

#[pymethods]
impl ViolationReport {
    /// `p_matrix`, `single_violation`, `sparse_violation` or `dense_violation`.
    #[getter]
    fn regime(&self) -> &'static str {
        self.inner.regime.as_str()
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau
    }

    #[getter]
    fn total_minors(&self) -> u64 {
        self.inner.total_minors
    }

    /// `(subset, mask_bits, value)` per violating subset, ascending by mask.
    #[getter]
    fn violations(&self) -> Vec<(String, u64, f64)> {
        self.inner.violations.iter().map(minor_tuple).collect()
    }

    #[getter]
    fn min_minor(&self) -> (String, u64, f64) {
        minor_tuple(&self.inner.min_minor)
    }

    #[getter]
    fn witness(&self) -> Option<String> {
        self.inner.witness().map(|w| w.to_string())
    }

    fn __repr__(&self) -> String {
        format!("ViolationReport(regime={:?}, violations={})", self.regime(), self.inner.violations.len())
    }
}

#[pyclass(module = "pmsearch", frozen)]
struct ForgeResult {
    inner: forge::ForgeResult,
}

#[pymethods]
impl ForgeResult {
    #[getter]
    fn instance(&self) -> Instance {
        Instance { inner: self.inner.instance.clone() }
    }

    #[getter]
    fn witness(&self) -> String {
        self.inner.witness.to_string()
    }

    #[getter]
    fn witness_value(&self) -> f64 {
        self.inner.witness_value
    }

    #[getter]
    fn alpha_star(&self) -> String {
        self.inner.alpha_star.to_string()
    }

    #[getter]
    fn f_m(&self) -> f64 {
        self.inner.f_m
    }

    #[getter]
    fn s(&self) -> f64 {
        self.inner.s
    }

    #[getter]
    fn lambda0(&self) -> f64 {
        self.inner.lambda0
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    #[getter]
    fn report(&self) -> ViolationReport {
        ViolationReport { inner: self.inner.report.clone() }
    }
}

/// The 6×6 worked example with its single violation at `{1,5}`.
#[pyfunction]
fn fixture() -> Instance {
    Instance { inner: forge::appendix_b_fixture() }
}

#[pyfunction]
#[pyo3(signature = (matrix, tol=0.0))]
fn violation_set(matrix: Vec<Vec<f64>>, tol: f64) -> PyResult<ViolationReport> {
    let r = minors::violation_set(&to_matrix(matrix)?, tol).map_err(err)?;
    Ok(ViolationReport { inner: r })
}

#[pyfunction]
fn principal_minor(matrix: Vec<Vec<f64>>, subset: SubsetArg) -> PyResult<f64> {
    let a = to_matrix(matrix)?;
    let mask = subset.resolve(a.n())?;
    a.principal_minor(&mask).map_err(err)
}

#[pyfunction]
fn det(matrix: Vec<Vec<f64>>) -> PyResult<f64> {
    Ok(to_matrix(matrix)?.det())
}

#[pyfunction]
#[pyo3(name = "forge", signature = (matrix, epsilon=1e-3, steps=64, max_lambda_factor=1.0))]
fn forge_py(matrix: Vec<Vec<f64>>, epsilon: f64, steps: usize, max_lambda_factor: f64) -> PyResult<ForgeResult> {
    let cfg = ForgeConfig { epsilon, lambda_search_steps: steps, max_lambda_factor };
    let r = forge::forge_single_violation(&to_matrix(matrix)?, &cfg).map_err(err)?;
    Ok(ForgeResult { inner: r })
}

/// Seeded random diagonally dominant P-matrix base.
#[pyfunction]
#[pyo3(signature = (n, seed=0, index=0))]
fn random_base(n: usize, seed: u64, index: u64) -> Vec<Vec<f64>> {
    forge::random_dominant_base(n, &mut substream(seed, index)).rows()
}

#[pyfunction]
fn reproduce_fixture(py: Python<'_>) -> PyResult<Bound<'_, PyDict>> {
    let r = forge::reproduce_fixture().map_err(err)?;
    let out = PyDict::new(py);
    let rows = PyList::empty(py);
    for row in &r.rows {
        rows.append((row.row, row.subset.to_string(), row.printed, row.computed, row.pass))?;
    }
    let checks = PyList::empty(py);
    for c in &r.checks {
        checks.append((c.name, c.expected.clone(), c.observed.clone(), c.pass))?;
    }
    out.set_item("rows", rows)?;
    out.set_item("checks", checks)?;
    out.set_item("all_pass", r.all_pass)?;
    Ok(out)
}

/// Synthetic first-hit experiment; returns the summary as a dict.
#[pyfunction]
#[pyo3(signature = (n, p, trials, strategy="uniform-without-replacement", seed=0))]
fn first_hit<'py>(
    py: Python<'py>,
    n: usize,
    p: usize,
    trials: u64,
    strategy: &str,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let kind = parse_strategy(strategy)?;
    let r = py.detach(|| oracle::first_hit_experiment(n, p, trials, &kind, seed)).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("n", r.n)?;
    out.set_item("p", r.p)?;
    out.set_item("trials", r.trials)?;
    out.set_item("strategy", r.strategy)?;
    out.set_item("mean_rounds", r.mean_rounds)?;
    out.set_item("mean_queries", r.mean_queries)?;
    out.set_item("stderr_rounds", r.stderr_rounds)?;
    out.set_item("exact_expectation", r.exact_expectation)?;
    out.set_item("misses", r.misses)?;
    out.set_item("histogram", r.histogram)?;
    Ok(out)
}

/// `E[⌈U/p⌉]` for `U` uniform on `{1..k}`.
#[pyfunction]
fn exact_rounds(k: u64, p: usize) -> f64 {
    oracle::exact_rounds_without_replacement(k, p)
}

#[pyfunction]
fn prior_entropy(n: usize) -> PyResult<f64> {
    info::prior_entropy(n).map_err(err)
}

#[pyfunction]
fn posterior_hit_prob(n: usize, k: u64) -> PyResult<f64> {
    info::posterior_hit_prob(n, k).map_err(err)
}

#[pyfunction]
fn mi_chain_bound(n: usize, q: u64) -> PyResult<f64> {
    info::mi_chain_bound(n, q).map_err(err)
}

#[pyfunction]
fn mi_exact_nonadaptive(n: usize, q: u64) -> PyResult<f64> {
    info::mi_exact_nonadaptive(n, q).map_err(err)
}

/// Plug-in estimate from `samples` synthetic runs.
#[pyfunction]
#[pyo3(signature = (n, q, samples, strategy="sweep", seed=0))]
fn mi_estimate(py: Python<'_>, n: usize, q: u64, samples: usize, strategy: &str, seed: u64) -> PyResult<f64> {
    let kind = parse_strategy(strategy)?;
    py.detach(|| info::mi_estimate(&info::sample_transcripts(n, q, &kind, samples, seed)?))
        .map(|e| e.bits)
        .map_err(err)
}

#[pyfunction]
fn fano_error_bound(mi_bits: f64, k: u64) -> f64 {
    info::fano_error_bound(mi_bits, k)
}

#[pyfunction]
fn fano_exact_bound(mi_bits: f64, k: u64) -> f64 {
    info::fano_exact_bound(mi_bits, k)
}

/// `(exact, union_bound)`.
#[pyfunction]
fn all_zero_probability(n: usize, q: u64) -> PyResult<(f64, f64)> {
    let a = info::all_zero_probability(n, q).map_err(err)?;
    Ok((a.exact, a.union_bound))
}

#[pyfunction]
fn transcript_tv_distance(n: usize, strategy: &str, q: u64, w: SubsetArg, w2: SubsetArg) -> PyResult<f64> {
    let kind = parse_strategy(strategy)?;
    info::transcript_tv_distance(n, &kind, q, &w.resolve(n)?, &w2.resolve(n)?).map_err(err)
}

/// `(max relative error, samples used)`.
#[pyfunction]
#[pyo3(signature = (samples, n, seed=0))]
fn verify_schur_identity(samples: usize, n: usize, seed: u64) -> PyResult<(f64, usize)> {
    schur::verify_schur_identity(samples, n, seed).map_err(err)
}

/// One dict per `(α, β)` pair with the 2×2 sign table and sign MI.
#[pyfunction]
#[pyo3(signature = (n, samples, ensemble="iid_uniform", overlap="defaults", seed=0))]
fn conditional_sign_study<'py>(
    py: Python<'py>,
    n: usize,
    samples: usize,
    ensemble: &str,
    overlap: &str,
    seed: u64,
) -> PyResult<Bound<'py, PyList>> {
    let cfg = EnsembleConfig { n, kind: ensemble.parse().map_err(err)?, samples, seed };
    let spec: PairSpec = overlap.parse().map_err(err)?;
    let r = py.detach(|| schur::conditional_sign_study(&cfg, &spec)).map_err(err)?;
    let out = PyList::empty(py);
    for p in &r.pairs {
        let d = PyDict::new(py);
        d.set_item("alpha", p.alpha.to_string())?;
        d.set_item("beta", p.beta.to_string())?;
        d.set_item("overlap", p.overlap)?;
        d.set_item("n_pp", p.n_pp)?;
        d.set_item("n_pn", p.n_pn)?;
        d.set_item("n_np", p.n_np)?;
        d.set_item("n_nn", p.n_nn)?;
        d.set_item("mi_bits", p.mi_bits)?;
        out.append(d)?;
    }
    Ok(out)
}

#[pymodule]
fn pmsearch(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PmsearchError", m.py().get_type::<PmsearchError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Instance>()?;
    m.add_class::<ViolationReport>()?;
    m.add_class::<ForgeResult>()?;
    m.add_function(wrap_pyfunction!(fixture, m)?)?;
    m.add_function(wrap_pyfunction!(violation_set, m)?)?;
    m.add_function(wrap_pyfunction!(principal_minor, m)?)?;
    m.add_function(wrap_pyfunction!(det, m)?)?;
    m.add_function(wrap_pyfunction!(forge_py, m)?)?;
    m.add_function(wrap_pyfunction!(random_base, m)?)?;
    m.add_function(wrap_pyfunction!(reproduce_fixture, m)?)?;
    m.add_function(wrap_pyfunction!(first_hit, m)?)?;
    m.add_function(wrap_pyfunction!(exact_rounds, m)?)?;
    m.add_function(wrap_pyfunction!(prior_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(posterior_hit_prob, m)?)?;
    m.add_function(wrap_pyfunction!(mi_chain_bound, m)?)?;
    m.add_function(wrap_pyfunction!(mi_exact_nonadaptive, m)?)?;
    m.add_function(wrap_pyfunction!(mi_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(fano_error_bound, m)?)?;
    m.add_function(wrap_pyfunction!(fano_exact_bound, m)?)?;
    m.add_function(wrap_pyfunction!(all_zero_probability, m)?)?;
    m.add_function(wrap_pyfunction!(transcript_tv_distance, m)?)?;
    m.add_function(wrap_pyfunction!(verify_schur_identity, m)?)?;
    m.add_function(wrap_pyfunction!(conditional_sign_study, m)?)?;
    Ok(())
}
